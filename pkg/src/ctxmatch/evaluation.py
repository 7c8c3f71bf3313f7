"""Ground-truth match classification and benchmark metrics.

Classification methods: 'A' thresholds the symmetric epipolar distance alone;
'C' combines a capped reprojection error with the overlap error of the
reprojected patch; 'D' thresholds reprojection (planar) or epipolar distance
plus optional admissible-region masks (non-planar); 'depth' reprojects
keypoints through depth maps and camera poses, falling back to the epipolar
check where depth is missing.

Recall counts correct matches in normalized form, min(distinct rows,
distinct columns), so many-to-many associations count once. Precision
uses the raw correct count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Match, MatchSet, PairContext
from .model import (
    FundamentalMatrix,
    Homography,
    ellipse_overlap_area,
    epipolar_distances,
    transfer_errors,
)

METHODS = ("A", "C", "D", "depth")


@dataclass(frozen=True)
class Tolerances:
    """Pixel and overlap tolerances of the classification methods."""

    reprojection_px: float = 15.0
    epipolar_px: float = 15.0
    method_a_px: float = 7.0
    method_c_px: float = 30.0
    method_c_overlap: float = 0.5

    def __post_init__(self):
        for name in ("reprojection_px", "epipolar_px", "method_a_px", "method_c_px"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.method_c_overlap < 1.0:
            raise ValueError("method_c_overlap must lie in (0, 1)")


@dataclass(frozen=True)
class CameraPose:
    """Pinhole camera: x_cam = rotation @ X_world + translation."""

    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "intrinsics", np.asarray(self.intrinsics, float).reshape(3, 3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, float).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, float).reshape(3))


@dataclass(frozen=True)
class GroundTruth:
    """One of: planar homography, fundamental matrix (optionally with
    admissible-region masks), or depth maps with camera poses (fundamental
    matrix as fallback where depth is missing)."""

    variant: str
    homography: Homography | None = None
    fundamental: FundamentalMatrix | None = None
    region_masks: tuple[np.ndarray, np.ndarray] | None = None
    depth_maps: tuple[np.ndarray, np.ndarray] | None = None
    poses: tuple[CameraPose, CameraPose] | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.variant == "homography":
            if self.homography is None:
                raise ValueError("homography variant needs a homography")
        elif self.variant == "fundamental":
            if self.fundamental is None:
                raise ValueError("fundamental variant needs a fundamental matrix")
        elif self.variant == "depth":
            if self.depth_maps is None or self.poses is None:
                raise ValueError("depth variant needs depth maps and poses")
        else:
            raise ValueError(f"unknown ground-truth variant {self.variant!r}")


def _mask_lookup(mask: np.ndarray, pts: np.ndarray) -> np.ndarray:
    xs = np.floor(pts[:, 0] + 0.5).astype(int)
    ys = np.floor(pts[:, 1] + 0.5).astype(int)
    h, w = mask.shape
    inside = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    out = np.zeros(len(pts), dtype=bool)
    out[inside] = mask[ys[inside], xs[inside]]
    return out


def _depth_at(depth: np.ndarray, x: float, y: float) -> float | None:
    xi = int(np.floor(x + 0.5))
    yi = int(np.floor(y + 0.5))
    h, w = depth.shape
    if not (0 <= xi < w and 0 <= yi < h):
        return None
    d = float(depth[yi, xi])
    return d if d > 0 else None


def _depth_reprojection(gt: GroundTruth, x_from: np.ndarray, pose_from: CameraPose,
                        pose_to: CameraPose, depth_from: np.ndarray) -> np.ndarray | None:
    d = _depth_at(depth_from, x_from[0], x_from[1])
    if d is None:
        return None
    ray = np.linalg.inv(pose_from.intrinsics) @ np.array([x_from[0], x_from[1], 1.0])
    x_cam = d * ray
    x_world = pose_from.rotation.T @ (x_cam - pose_from.translation)
    x_cam2 = pose_to.rotation @ x_world + pose_to.translation
    if x_cam2[2] <= 1e-12:
        return np.array([np.inf, np.inf])
    proj = pose_to.intrinsics @ x_cam2
    return proj[:2] / proj[2]


def classify_array(gt: GroundTruth, i_idx: np.ndarray, j_idx: np.ndarray,
                   ctx: PairContext, method: str = "D") -> np.ndarray:
    """Correctness labels of (i, j) index pairs under one classification method."""
    if method not in METHODS:
        raise ValueError(f"unknown classification method {method!r}")
    i_idx = np.asarray(i_idx, dtype=np.int64)
    j_idx = np.asarray(j_idx, dtype=np.int64)
    if len(i_idx) == 0:
        return np.zeros(0, dtype=bool)
    tol = gt.tolerances
    p1 = ctx.coords(1)[i_idx]
    p2 = ctx.coords(2)[j_idx]

    if method == "A":
        if gt.fundamental is None:
            raise ValueError("method A needs a fundamental-matrix ground truth")
        return epipolar_distances(gt.fundamental, p1, p2) <= tol.method_a_px

    if method == "D":
        if gt.variant == "homography":
            return transfer_errors(gt.homography, p1, p2) <= tol.reprojection_px
        if gt.variant == "fundamental":
            ok = epipolar_distances(gt.fundamental, p1, p2) <= tol.epipolar_px
            if gt.region_masks is not None:
                ok &= _mask_lookup(gt.region_masks[0], p1)
                ok &= _mask_lookup(gt.region_masks[1], p2)
            return ok
        raise ValueError("method D needs a homography or fundamental ground truth")

    if method == "C":
        if gt.variant != "homography":
            raise ValueError("method C needs a homography ground truth")
        ell1 = ctx.ellipses(1)
        ell2 = ctx.ellipses(2)
        if ell1 is None or ell2 is None:
            raise ValueError("method C needs ellipses on all keypoints")
        ok = transfer_errors(gt.homography, p1, p2) <= tol.method_c_px
        h = gt.homography
        proj = h.apply(p1)
        for k in np.nonzero(ok)[0]:
            shape = _reproject_shape(h, p1[k], proj[k], ell1[i_idx[k]])
            inter, union = ellipse_overlap_area(
                proj[k], shape, p2[k], ell2[j_idx[k]], magnify=2.0
            )
            err = 0.0 if union == 0 else 1.0 - inter / union
            ok[k] = err <= tol.method_c_overlap
        return ok

    # depth
    if gt.variant != "depth":
        raise ValueError("method 'depth' needs a depth ground truth")
    d1, d2 = gt.depth_maps
    pose1, pose2 = gt.poses
    out = np.zeros(len(i_idx), dtype=bool)
    for k in range(len(i_idx)):
        fwd = _depth_reprojection(gt, p1[k], pose1, pose2, d1)
        bwd = _depth_reprojection(gt, p2[k], pose2, pose1, d2)
        errors = []
        if fwd is not None:
            errors.append(float(np.linalg.norm(fwd - p2[k])))
        if bwd is not None:
            errors.append(float(np.linalg.norm(bwd - p1[k])))
        if errors:
            out[k] = min(errors) < tol.reprojection_px
        elif gt.fundamental is not None:
            out[k] = epipolar_distances(gt.fundamental, p1[k:k + 1], p2[k:k + 1])[0] <= tol.epipolar_px
    return out


def _reproject_shape(h: Homography, src: np.ndarray, dst: np.ndarray, shape: np.ndarray) -> np.ndarray:
    """Ellipse coefficients mapped by the local affine approximation of h."""
    m = h.matrix
    w = m[2, 0] * src[0] + m[2, 1] * src[1] + m[2, 2]
    jac = np.array([
        [m[0, 0] - dst[0] * m[2, 0], m[0, 1] - dst[0] * m[2, 1]],
        [m[1, 0] - dst[1] * m[2, 0], m[1, 1] - dst[1] * m[2, 1]],
    ]) / w
    s = np.array([[shape[0], shape[2]], [shape[2], shape[1]]])
    ij = np.linalg.inv(jac)
    s2 = ij.T @ s @ ij
    return np.array([s2[0, 0], s2[1, 1], s2[0, 1]])


def classify(gt: GroundTruth, match: Match, ctx: PairContext, method: str = "D") -> bool:
    """Whether a single match is correct under the ground truth and method."""
    return bool(classify_array(gt, [match.i], [match.j], ctx, method)[0])


def normalized_correct_count(correct: MatchSet) -> int:
    """min(distinct row indices, distinct column indices) of a correct set.

    Equals the set size exactly when the matches are one-to-one, so multiple
    associations of a keypoint count once.
    """
    if len(correct) == 0:
        return 0
    i_idx, j_idx, _ = correct.arrays()
    return int(min(len(np.unique(i_idx)), len(np.unique(j_idx))))


@dataclass(frozen=True)
class EvalReport:
    """Metrics of one filtered match set against a ground truth."""

    precision: float | None
    recall: float | None
    recall_star: float | None
    correct_count: int
    output_count: int
    failed: bool
    labels: tuple[bool, ...]

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "recall_star": self.recall_star,
            "correct_count": self.correct_count,
            "output_count": self.output_count,
            "failed": self.failed,
            "labels": [bool(b) for b in self.labels],
        }


def _normalized_correct_in(matches: MatchSet, gt, ctx, method) -> int:
    i_idx, j_idx, _ = matches.arrays()
    labels = classify_array(gt, i_idx, j_idx, ctx, method)
    return normalized_correct_count(MatchSet(m for m, ok in zip(matches, labels) if ok))


def score_pair(matches: MatchSet, gt: GroundTruth, ctx: PairContext, method: str = "D",
               universe: MatchSet | None = None,
               gt_universe: MatchSet | None = None) -> EvalReport:
    """Precision/recall report for a match set.

    ``universe`` is the candidate set the filter ran on (defaults to
    ``matches`` itself) and provides the recall denominator; ``gt_universe``
    optionally provides a larger pool for the starred recall. Undefined
    ratios (empty output, no correct candidates) are reported as None.
    """
    i_idx, j_idx, _ = matches.arrays()
    labels = classify_array(gt, i_idx, j_idx, ctx, method)
    raw_correct = int(labels.sum())
    correct_set = MatchSet(m for m, ok in zip(matches, labels) if ok)
    norm_correct = normalized_correct_count(correct_set)
    precision = raw_correct / len(matches) if len(matches) else None

    if universe is None:
        universe = matches
    denom = _normalized_correct_in(universe, gt, ctx, method)
    recall = norm_correct / denom if denom > 0 else None

    recall_star = None
    if gt_universe is not None:
        denom_star = _normalized_correct_in(gt_universe, gt, ctx, method)
        recall_star = norm_correct / denom_star if denom_star > 0 else None

    return EvalReport(
        precision=precision,
        recall=recall,
        recall_star=recall_star,
        correct_count=norm_correct,
        output_count=len(matches),
        failed=norm_correct == 0,
        labels=tuple(bool(b) for b in labels),
    )


def average_precision(labels, interpolation: str = "none") -> float:
    """Rank-based average precision of a score-ordered label sequence.

    ``labels[k]`` is the correctness of the k-th best-scoring match. The
    default is the mean of precision-at-rank over the correct matches;
    ``interpolation='eleven_point'`` uses the PASCAL-style 11-point variant.
    Returns 0.0 when nothing is correct.
    """
    lab = np.asarray(labels, dtype=bool)
    total = int(lab.sum())
    if total == 0:
        return 0.0
    ranks = np.arange(1, len(lab) + 1)
    cum = np.cumsum(lab)
    prec_at = cum / ranks
    if interpolation == "none":
        return float(prec_at[lab].mean())
    if interpolation == "eleven_point":
        rec_at = cum / total
        out = 0.0
        for level in np.linspace(0.0, 1.0, 11):
            mask = rec_at >= level
            out += float(prec_at[mask].max()) if mask.any() else 0.0
        return out / 11.0
    raise ValueError(f"unknown interpolation {interpolation!r}")


def mean_average_precision(aps) -> float:
    """Arithmetic mean of per-pair average precisions."""
    aps = list(aps)
    if not aps:
        raise ValueError("mean_average_precision needs at least one AP value")
    return float(np.mean(aps))


def f_beta(precision: float, recall: float, beta: float = 1.0) -> float:
    """Weighted harmonic mean of precision and recall."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    denom = beta * beta * precision + recall
    if denom == 0:
        return 0.0
    return (1.0 + beta * beta) * precision * recall / denom

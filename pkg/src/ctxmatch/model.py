"""Geometric models and single-sample consensus filtering.

Homography estimation by normalized DLT, fundamental matrix by the
normalized 8-point algorithm with rank-2 enforcement, symmetric transfer
and epipolar residuals, grid-sampled elliptical patch overlap, and 1SAC:
a single least-squares fit on the top-ranked matches followed by residual
thresholding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import ParamsMixin, check_points
from .core import Keypoint, Match, MatchSet, PairContext
from .errors import ModelFitError

# minimal correspondences needed per model kind
MIN_SAMPLE = {"homography": 4, "fundamental": 8}

# 1SAC fits one sample of 3*q top-ranked matches
SAMPLE_FACTOR = 3

_OVERLAP_CELLS = 256


class Homography:
    """A nonsingular 3x3 plane projective map, scaled so the largest-magnitude entry is 1."""

    __slots__ = ("matrix", "_inverse")

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(m)):
            raise ModelFitError("homography has non-finite entries")
        peak = m.flat[np.argmax(np.abs(m))]
        if peak == 0 or abs(np.linalg.det(m / peak)) < 1e-12:
            raise ModelFitError("homography is singular")
        m = m / peak
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        inv = np.linalg.inv(m)
        inv.setflags(write=False)
        object.__setattr__(self, "_inverse", inv)

    def __setattr__(self, name, value):
        raise AttributeError("Homography is immutable")

    def apply(self, points: np.ndarray) -> np.ndarray:
        return _project(self.matrix, points)

    def apply_inverse(self, points: np.ndarray) -> np.ndarray:
        return _project(self._inverse, points)

    def __repr__(self) -> str:
        return f"Homography({self.matrix.tolist()})"


class FundamentalMatrix:
    """A rank-2 fundamental matrix with unit Frobenius norm."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(m)):
            raise ModelFitError("fundamental matrix has non-finite entries")
        u, s, vt = np.linalg.svd(m)
        if s[1] <= 0:
            raise ModelFitError("fundamental matrix has rank < 2")
        s = s.copy()
        s[2] = 0.0
        m = u @ np.diag(s) @ vt
        m /= np.linalg.norm(m)
        peak = m.flat[np.argmax(np.abs(m))]
        if peak < 0:
            m = -m
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __setattr__(self, name, value):
        raise AttributeError("FundamentalMatrix is immutable")

    def __repr__(self) -> str:
        return f"FundamentalMatrix({self.matrix.tolist()})"


def _project(m: np.ndarray, points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    h = pts @ m[:, :2].T + m[:, 2]
    w = h[:, 2]
    if np.any(np.abs(w) < 1e-300):
        raise ModelFitError("point maps to infinity under projective transform")
    return h[:, :2] / w[:, None]


def _hartley_normalization(pts: np.ndarray) -> np.ndarray:
    """Similarity transform taking the centroid to the origin, mean norm to sqrt(2)."""
    centroid = pts.mean(axis=0)
    dist = np.linalg.norm(pts - centroid, axis=1).mean()
    if dist < 1e-12:
        raise ModelFitError("all points coincide")
    s = np.sqrt(2.0) / dist
    return np.array([[s, 0, -s * centroid[0]], [0, s, -s * centroid[1]], [0, 0, 1.0]])


def _to_homogeneous(pts: np.ndarray) -> np.ndarray:
    return np.hstack([pts, np.ones((len(pts), 1))])


def fit_homography(pts1, pts2) -> Homography:
    """Least-squares DLT homography from >= 4 correspondences.

    Raises ModelFitError on rank-deficient configurations (e.g. 3 of 4
    source points collinear).
    """
    pts1 = check_points(pts1, "pts1")
    pts2 = check_points(pts2, "pts2")
    if len(pts1) != len(pts2) or len(pts1) < 4:
        raise ModelFitError("homography needs >= 4 correspondences on both sides")
    t1 = _hartley_normalization(pts1)
    t2 = _hartley_normalization(pts2)
    x1 = _to_homogeneous(pts1) @ t1.T
    x2 = _to_homogeneous(pts2) @ t2.T
    n = len(pts1)
    a = np.zeros((2 * n, 9))
    a[0::2, 0:3] = x1
    a[0::2, 6:9] = -x2[:, 0:1] * x1
    a[1::2, 3:6] = x1
    a[1::2, 6:9] = -x2[:, 1:2] * x1
    _, s, vt = np.linalg.svd(a)
    if s[7] < 1e-11 * s[0]:
        raise ModelFitError("degenerate correspondence configuration for homography")
    h = np.linalg.inv(t2) @ vt[-1].reshape(3, 3) @ t1
    return Homography(h)


def fit_fundamental(pts1, pts2) -> FundamentalMatrix:
    """Normalized 8-point fundamental matrix with rank-2 enforcement.

    Raises ModelFitError on degenerate input, including all points lying on
    one plane (detected through the conditioning of the design matrix).
    """
    pts1 = check_points(pts1, "pts1")
    pts2 = check_points(pts2, "pts2")
    if len(pts1) != len(pts2) or len(pts1) < 8:
        raise ModelFitError("fundamental matrix needs >= 8 correspondences on both sides")
    t1 = _hartley_normalization(pts1)
    t2 = _hartley_normalization(pts2)
    x1 = _to_homogeneous(pts1) @ t1.T
    x2 = _to_homogeneous(pts2) @ t2.T
    a = (x2[:, :, None] * x1[:, None, :]).reshape(len(pts1), 9)
    _, s, vt = np.linalg.svd(a)
    if s[7] < 1e-9 * s[0]:
        raise ModelFitError("degenerate correspondence configuration for fundamental matrix")
    f = t2.T @ vt[-1].reshape(3, 3) @ t1
    return FundamentalMatrix(f)


def _match_points(match: Match, ctx: PairContext) -> tuple[np.ndarray, np.ndarray]:
    k1 = ctx.keypoints1[match.i]
    k2 = ctx.keypoints2[match.j]
    return np.array([[k1.x, k1.y]]), np.array([[k2.x, k2.y]])


def transfer_errors(h: Homography, pts1: np.ndarray, pts2: np.ndarray) -> np.ndarray:
    """Symmetric transfer distance per correspondence: max of both directions."""
    fwd = np.linalg.norm(h.apply(pts1) - pts2, axis=1)
    bwd = np.linalg.norm(h.apply_inverse(pts2) - pts1, axis=1)
    return np.maximum(fwd, bwd)


def epipolar_distances(f: FundamentalMatrix, pts1: np.ndarray, pts2: np.ndarray) -> np.ndarray:
    """Symmetric point-to-epipolar-line distance per correspondence."""
    x1 = _to_homogeneous(np.atleast_2d(pts1))
    x2 = _to_homogeneous(np.atleast_2d(pts2))
    l2 = x1 @ f.matrix.T  # lines in image 2
    l1 = x2 @ f.matrix  # lines in image 1
    num = np.abs(np.einsum("ij,ij->i", x2, l2))
    d2 = num / np.maximum(np.hypot(l2[:, 0], l2[:, 1]), 1e-300)
    d1 = np.abs(np.einsum("ij,ij->i", x1, l1)) / np.maximum(np.hypot(l1[:, 0], l1[:, 1]), 1e-300)
    return np.maximum(d1, d2)


def reprojection_error(h: Homography, match: Match, ctx: PairContext) -> float:
    """Max of the two directed transfer distances of a match, in pixels."""
    p1, p2 = _match_points(match, ctx)
    return float(transfer_errors(h, p1, p2)[0])


def epipolar_distance(f: FundamentalMatrix, match: Match, ctx: PairContext) -> float:
    """Max point-to-epipolar-line distance over both directions, in pixels."""
    p1, p2 = _match_points(match, ctx)
    return float(epipolar_distances(f, p1, p2)[0])


def _ellipse_half_extents(shape: np.ndarray) -> tuple[float, float]:
    a, b, c = shape
    det = a * b - c * c
    return float(np.sqrt(b / det)), float(np.sqrt(a / det))


def ellipse_overlap_area(center1, shape1, center2, shape2, magnify: float = 1.0,
                         cells: int = _OVERLAP_CELLS) -> tuple[int, int]:
    """Grid-sampled (intersection, union) cell counts of two elliptical regions.

    The joint bounding box of both (magnified) ellipses is sampled at
    ``cells x cells`` cell centers; the count error is on the order of the
    region perimeter divided by the cell count.
    """
    c1 = np.asarray(center1, dtype=np.float64)
    c2 = np.asarray(center2, dtype=np.float64)
    s1 = np.asarray(shape1, dtype=np.float64)
    s2 = np.asarray(shape2, dtype=np.float64)
    g2 = magnify * magnify
    w1, h1 = _ellipse_half_extents(s1)
    w2, h2 = _ellipse_half_extents(s2)
    x0 = min(c1[0] - magnify * w1, c2[0] - magnify * w2)
    x1 = max(c1[0] + magnify * w1, c2[0] + magnify * w2)
    y0 = min(c1[1] - magnify * h1, c2[1] - magnify * h2)
    y1 = max(c1[1] + magnify * h1, c2[1] + magnify * h2)
    xs = x0 + (np.arange(cells) + 0.5) * ((x1 - x0) / cells)
    ys = y0 + (np.arange(cells) + 0.5) * ((y1 - y0) / cells)
    gx, gy = np.meshgrid(xs, ys)

    def inside(c, s):
        dx = gx - c[0]
        dy = gy - c[1]
        return s[0] * dx * dx + 2.0 * s[2] * dx * dy + s[1] * dy * dy <= g2

    in1 = inside(c1, s1)
    in2 = inside(c2, s2)
    return int(np.count_nonzero(in1 & in2)), int(np.count_nonzero(in1 | in2))


def ellipse_overlap_error(kp1: Keypoint, kp2: Keypoint, magnify: float = 1.0,
                          cells: int = _OVERLAP_CELLS) -> float:
    """1 - intersection/union of two elliptical patches, in [0, 1].

    ``magnify`` scales both regions about their centers before sampling.
    """
    if kp1.ellipse is None or kp2.ellipse is None:
        raise ValueError("both keypoints need an ellipse for overlap computation")
    if magnify < 1.0:
        raise ValueError("magnify must be >= 1")
    inter, union = ellipse_overlap_area(
        (kp1.x, kp1.y), kp1.ellipse, (kp2.x, kp2.y), kp2.ellipse, magnify, cells
    )
    if union == 0:
        return 0.0
    return 1.0 - inter / union


@dataclass(frozen=True)
class OneSacResult:
    model: Homography | FundamentalMatrix | None
    matches: MatchSet
    failed: bool


def _sample_one_to_one(matches: MatchSet, size: int) -> list[Match] | None:
    """Top-ranked sample where every keypoint counts once on each side."""
    used_i: set[int] = set()
    used_j: set[int] = set()
    sample: list[Match] = []
    for m in matches:
        if m.i in used_i or m.j in used_j:
            continue
        sample.append(m)
        used_i.add(m.i)
        used_j.add(m.j)
        if len(sample) == size:
            return sample
    return None


def one_sac(matches: MatchSet, kind: str, ctx: PairContext,
            inlier_threshold: float = 15.0) -> OneSacResult:
    """Fit one model on the 3q top-ranked matches and keep matches within threshold.

    ``matches`` must already be sorted ascending by score. The sample is
    composed so that multiple associations of one keypoint count once. On an
    insufficient or degenerate sample the result is empty with ``failed`` set.
    """
    if kind not in MIN_SAMPLE:
        raise ValueError(f"unknown model kind {kind!r}")
    size = SAMPLE_FACTOR * MIN_SAMPLE[kind]
    sample = _sample_one_to_one(matches, size)
    if sample is None:
        return OneSacResult(None, MatchSet(), True)
    coords1 = ctx.coords(1)
    coords2 = ctx.coords(2)
    sp1 = coords1[[m.i for m in sample]]
    sp2 = coords2[[m.j for m in sample]]
    try:
        if kind == "homography":
            model = fit_homography(sp1, sp2)
        else:
            model = fit_fundamental(sp1, sp2)
    except ModelFitError:
        return OneSacResult(None, MatchSet(), True)
    i_idx, j_idx, _ = matches.arrays()
    p1 = coords1[i_idx]
    p2 = coords2[j_idx]
    if kind == "homography":
        residuals = transfer_errors(model, p1, p2)
    else:
        residuals = epipolar_distances(model, p1, p2)
    keep = residuals <= inlier_threshold
    kept = MatchSet(m for m, ok in zip(matches, keep) if ok)
    return OneSacResult(model, kept, False)


class OneSac(ParamsMixin):
    """Single-sample consensus filter with a fit/predict surface.

    After ``fit`` the attributes ``model_``, ``inliers_`` and ``failed_``
    hold the estimated model, the retained matches and the failure flag.
    """

    def __init__(self, kind: str = "homography", inlier_threshold: float = 15.0):
        self.kind = kind
        self.inlier_threshold = inlier_threshold

    def fit(self, matches: MatchSet, ctx: PairContext) -> "OneSac":
        result = one_sac(matches, self.kind, ctx, self.inlier_threshold)
        self.model_ = result.model
        self.inliers_ = result.matches
        self.failed_ = result.failed
        return self

    def predict(self, matches: MatchSet, ctx: PairContext) -> np.ndarray:
        """Boolean inlier labels for ``matches`` under the fitted model."""
        if getattr(self, "model_", None) is None:
            raise ValueError("OneSac.predict requires a successful fit")
        i_idx, j_idx, _ = matches.arrays()
        p1 = ctx.coords(1)[i_idx]
        p2 = ctx.coords(2)[j_idx]
        if self.kind == "homography":
            residuals = transfer_errors(self.model_, p1, p2)
        else:
            residuals = epipolar_distances(self.model_, p1, p2)
        return residuals <= self.inlier_threshold

    def fit_predict(self, matches: MatchSet, ctx: PairContext) -> MatchSet:
        return self.fit(matches, ctx).inliers_

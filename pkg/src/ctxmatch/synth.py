"""Synthetic scene generation for desk-scale verification.

A scene plants n_inliers matches consistent with a known model (homography
for planar scenes, fundamental matrix from two synthetic cameras otherwise)
plus n_outliers incoherent matches, and builds a distance matrix in which
planted pairs get low (inliers) or mid-band (outliers) distances while all
other pairs get high distances. Outlier geometry is resampled until it
violates the model by a safety margin, so the manifest labels agree exactly
with ground-truth classification. Everything is a pure function of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .base import check_random_state
from .core import DistanceMatrix, Keypoint, PairContext
from .evaluation import CameraPose, GroundTruth
from .model import FundamentalMatrix, Homography, epipolar_distances, transfer_errors
from . import io as ctxio

SCENES = ("planar", "two_view")

# distance bands: planted inliers, planted outliers, everything else
_LOW_BAND = (0.10, 0.30)
_MID_BAND = (0.40, 0.60)
_HIGH_BAND = (0.70, 1.00)

# planted outliers must miss the model by at least twice the 15 px tolerance
_OUTLIER_MARGIN = 30.0


@dataclass(frozen=True)
class SynthScene:
    """A generated pair: keypoints, distances, ground truth, planted labels."""

    ctx: PairContext
    distances: DistanceMatrix
    ground_truth: GroundTruth
    labels: tuple[bool, ...]
    manifest: dict

    @property
    def n_matches(self) -> int:
        return len(self.labels)


def _random_keypoint_shapes(rng, n: int) -> list[tuple[tuple[float, float, float], float]]:
    radii = rng.uniform(3.0, 10.0, n)
    return [((1.0 / (r * r), 1.0 / (r * r), 0.0), float(r)) for r in radii]


def _random_homography(rng, width: float, height: float) -> Homography:
    theta = rng.uniform(-0.25, 0.25)
    scale = rng.uniform(0.9, 1.1)
    cos, sin = np.cos(theta), np.sin(theta)
    h = np.array([
        [scale * cos, -scale * sin, rng.uniform(-0.08, 0.08) * width],
        [scale * sin, scale * cos, rng.uniform(-0.08, 0.08) * height],
        [rng.uniform(-1.0, 1.0) * 1e-4, rng.uniform(-1.0, 1.0) * 1e-4, 1.0],
    ])
    return Homography(h)


def _sample_planar(rng, n_inliers, width, height, h: Homography, noise_px):
    margin = 0.05 * min(width, height)
    pts1 = np.empty((0, 2))
    pts2 = np.empty((0, 2))
    while len(pts1) < n_inliers:
        cand = rng.uniform([margin, margin], [width - margin, height - margin],
                           (max(4 * n_inliers, 16), 2))
        mapped = h.apply(cand)
        ok = ((mapped >= 0) & (mapped < [width, height])).all(axis=1)
        pts1 = np.vstack([pts1, cand[ok]])
        pts2 = np.vstack([pts2, mapped[ok]])
    pts1 = pts1[:n_inliers]
    pts2 = pts2[:n_inliers] + rng.normal(0.0, noise_px, (n_inliers, 2))
    return pts1, pts2


def _sample_planar_outliers(rng, n_outliers, width, height, h: Homography):
    o1 = np.empty((0, 2))
    o2 = np.empty((0, 2))
    while len(o1) < n_outliers:
        c1 = rng.uniform([0, 0], [width, height], (max(4 * n_outliers, 16), 2))
        c2 = rng.uniform([0, 0], [width, height], (len(c1), 2))
        bad = transfer_errors(h, c1, c2) > _OUTLIER_MARGIN
        o1 = np.vstack([o1, c1[bad]])
        o2 = np.vstack([o2, c2[bad]])
    return o1[:n_outliers], o2[:n_outliers]


def _two_view_cameras(rng, width, height):
    focal = 1.1 * max(width, height)
    k = np.array([[focal, 0, width / 2.0], [0, focal, height / 2.0], [0, 0, 1.0]])
    pose1 = CameraPose(k, np.eye(3), np.zeros(3))
    angle = rng.uniform(0.03, 0.12) * rng.choice([-1.0, 1.0])
    axis = rng.normal(0, 1, 3)
    axis /= np.linalg.norm(axis)
    kx = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    r = np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * (kx @ kx)
    t = np.array([rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0]),
                  rng.uniform(-0.3, 0.3), rng.uniform(-0.2, 0.2)])
    pose2 = CameraPose(k, r, t)
    return pose1, pose2


def fundamental_from_poses(pose1: CameraPose, pose2: CameraPose) -> FundamentalMatrix:
    """Exact fundamental matrix of a relative pose: x2' F x1 = 0."""
    r = pose2.rotation @ pose1.rotation.T
    t = pose2.translation - r @ pose1.translation
    tx = np.array([[0, -t[2], t[1]], [t[2], 0, -t[0]], [-t[1], t[0], 0]])
    f = np.linalg.inv(pose2.intrinsics).T @ tx @ r @ np.linalg.inv(pose1.intrinsics)
    return FundamentalMatrix(f)


def _project(pose: CameraPose, points_world: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cam = points_world @ pose.rotation.T + pose.translation
    pix = cam @ pose.intrinsics.T
    return pix[:, :2] / pix[:, 2:3], cam[:, 2]


def _sample_two_view(rng, n_inliers, width, height, pose1, pose2, noise_px):
    k_inv = np.linalg.inv(pose1.intrinsics)
    pts1 = np.empty((0, 2))
    pts2 = np.empty((0, 2))
    depth1 = np.empty(0)
    world = np.empty((0, 3))
    while len(pts1) < n_inliers:
        n = max(4 * n_inliers, 16)
        pix = rng.uniform([0, 0], [width, height], (n, 2))
        z = rng.uniform(4.0, 10.0, n)
        rays = np.hstack([pix, np.ones((n, 1))]) @ k_inv.T
        x_world = rays * z[:, None]  # camera 1 at the world origin
        p2, z2 = _project(pose2, x_world)
        ok = (z2 > 0.5) & ((p2 >= 0) & (p2 < [width, height])).all(axis=1)
        pts1 = np.vstack([pts1, pix[ok]])
        pts2 = np.vstack([pts2, p2[ok]])
        depth1 = np.concatenate([depth1, z[ok]])
        world = np.vstack([world, x_world[ok]])
    pts2 = pts2[:n_inliers] + rng.normal(0.0, noise_px, (n_inliers, 2))
    return pts1[:n_inliers], pts2, depth1[:n_inliers], world[:n_inliers]


def _sample_two_view_outliers(rng, n_outliers, width, height, f: FundamentalMatrix):
    o1 = np.empty((0, 2))
    o2 = np.empty((0, 2))
    while len(o1) < n_outliers:
        c1 = rng.uniform([0, 0], [width, height], (max(4 * n_outliers, 16), 2))
        c2 = rng.uniform([0, 0], [width, height], (len(c1), 2))
        bad = epipolar_distances(f, c1, c2) > _OUTLIER_MARGIN
        o1 = np.vstack([o1, c1[bad]])
        o2 = np.vstack([o2, c2[bad]])
    return o1[:n_outliers], o2[:n_outliers]


def synth(scene: str = "planar", n_inliers: int = 100, n_outliers: int = 100,
          noise_px: float = 0.0, seed: int = 0,
          width: float = 800.0, height: float = 600.0) -> SynthScene:
    """Generate a reproducible synthetic matching problem.

    Planted match k pairs keypoint k of each image; the first ``n_inliers``
    follow the scene geometry (plus Gaussian noise on the second image), the
    rest are uniform and violate it by a safety margin.
    """
    if scene not in SCENES:
        raise ValueError(f"unknown scene {scene!r}")
    if n_inliers < 0 or n_outliers < 0:
        raise ValueError("counts must be non-negative")
    n = n_inliers + n_outliers
    if n == 0:
        raise ValueError("scene needs at least one match")
    rng = check_random_state(np.random.default_rng(int(seed)))

    if scene == "planar":
        model = _random_homography(rng, width, height)
        in1, in2 = _sample_planar(rng, n_inliers, width, height, model, noise_px)
        out1, out2 = _sample_planar_outliers(rng, n_outliers, width, height, model)
        gt = GroundTruth(variant="homography", homography=model)
        model_payload = {"homography": [float(v) for v in model.matrix.ravel()]}
    else:
        pose1, pose2 = _two_view_cameras(rng, width, height)
        f = fundamental_from_poses(pose1, pose2)
        in1, in2, _, _ = _sample_two_view(rng, n_inliers, width, height, pose1, pose2, noise_px)
        out1, out2 = _sample_two_view_outliers(rng, n_outliers, width, height, f)
        gt = GroundTruth(variant="fundamental", fundamental=f)
        model_payload = {"fundamental": [float(v) for v in f.matrix.ravel()]}

    kp1_xy = np.vstack([in1, out1])
    kp2_xy = np.vstack([in2, out2])
    shapes1 = _random_keypoint_shapes(rng, n)
    shapes2 = _random_keypoint_shapes(rng, n)
    kps1 = tuple(Keypoint(float(p[0]), float(p[1]), e, s) for p, (e, s) in zip(kp1_xy, shapes1))
    kps2 = tuple(Keypoint(float(p[0]), float(p[1]), e, s) for p, (e, s) in zip(kp2_xy, shapes2))
    ctx = PairContext(kps1, kps2, width, height, width, height)

    values = rng.uniform(*_HIGH_BAND, (n, n))
    diag = np.concatenate([
        rng.uniform(*_LOW_BAND, n_inliers),
        rng.uniform(*_MID_BAND, n_outliers),
    ])
    values[np.arange(n), np.arange(n)] = diag
    distances = DistanceMatrix(values)

    labels = tuple([True] * n_inliers + [False] * n_outliers)
    manifest = {
        "scene": scene,
        "seed": int(seed),
        "n_inliers": n_inliers,
        "n_outliers": n_outliers,
        "noise_px": noise_px,
        "width1": width, "height1": height,
        "width2": width, "height2": height,
        "planted_pairs": [[k, k] for k in range(n)],
        "labels": [bool(b) for b in labels],
        **model_payload,
    }
    return SynthScene(ctx, distances, gt, labels, manifest)


def write_scene(scene: SynthScene, out_dir) -> dict:
    """Write a scene to a directory; returns the file map (also in the manifest)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "keypoints1": "keypoints1.csv",
        "keypoints2": "keypoints2.csv",
        "distances": "distances.ctxd",
        "ground_truth": "ground_truth.json",
        "manifest": "manifest.json",
    }
    ctxio.write_keypoints_csv(out / files["keypoints1"], scene.ctx.keypoints1)
    ctxio.write_keypoints_csv(out / files["keypoints2"], scene.ctx.keypoints2)
    ctxio.write_distances_binary(out / files["distances"], scene.distances)
    ctxio.write_ground_truth_json(out / files["ground_truth"], scene.ground_truth)
    manifest = dict(scene.manifest)
    manifest["files"] = files
    ctxio.write_json(out / files["manifest"], manifest)
    return files

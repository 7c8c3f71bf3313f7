"""File formats: keypoint CSV, distance matrices (binary and CSV), match CSV,
ground-truth JSON, 16-bit PGM depth maps, and metrics serialization.

All writers are atomic (temp file + rename) and all formats round-trip
exactly. Indices in files are 0-based. The binary distance format is:
magic ``CTXD``, little-endian u32 version, u64 row count, u64 column count,
then row-major IEEE-754 little-endian float64 values.
"""

from __future__ import annotations

import csv
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .core import DistanceMatrix, Keypoint, Match, MatchSet
from .errors import ParseError
from .evaluation import CameraPose, GroundTruth, Tolerances
from .model import FundamentalMatrix, Homography

CTXD_MAGIC = b"CTXD"
CTXD_VERSION = 1


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# -- keypoints ---------------------------------------------------------------

def write_keypoints_csv(path, keypoints) -> None:
    """One keypoint per line: x,y[,a,b,c[,scale]], header row, LF endings."""
    keypoints = list(keypoints)
    with_ellipse = all(k.ellipse is not None for k in keypoints)
    with_scale = with_ellipse and all(k.scale is not None for k in keypoints)
    header = ["x", "y"]
    if with_ellipse:
        header += ["a", "b", "c"]
    if with_scale:
        header += ["scale"]
    lines = [",".join(header)]
    for k in keypoints:
        row = [repr(k.x), repr(k.y)]
        if with_ellipse:
            row += [repr(v) for v in k.ellipse]
        if with_scale:
            row += [repr(k.scale)]
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_keypoints_csv(path) -> list[Keypoint]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError:
        raise
    except Exception as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: empty keypoint file")
    header = [h.strip() for h in rows[0]]
    if header[:2] != ["x", "y"] or len(header) not in (2, 5, 6):
        raise ParseError(f"{path}: expected header x,y[,a,b,c[,scale]], got {header}")
    keypoints = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            vals = [float(v) for v in row]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        if len(vals) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(vals)}")
        ellipse = tuple(vals[2:5]) if len(header) >= 5 else None
        scale = vals[5] if len(header) == 6 else None
        try:
            keypoints.append(Keypoint(vals[0], vals[1], ellipse, scale))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return keypoints


# -- distance matrices -------------------------------------------------------

def write_distances_binary(path, dist: DistanceMatrix) -> None:
    header = CTXD_MAGIC + struct.pack("<IQQ", CTXD_VERSION, dist.n, dist.m)
    body = np.ascontiguousarray(dist.values, dtype="<f8").tobytes()
    atomic_write_bytes(path, header + body)


def read_distances_binary(path) -> DistanceMatrix:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CTXD_MAGIC:
        raise ParseError(f"{path}: bad magic {blob[:4]!r}, expected {CTXD_MAGIC!r}")
    if len(blob) < 24:
        raise ParseError(f"{path}: truncated header")
    version, n, m = struct.unpack("<IQQ", blob[4:24])
    if version != CTXD_VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    expected = 24 + 8 * n * m
    if len(blob) != expected:
        raise ParseError(f"{path}: expected {expected} bytes, found {len(blob)}")
    values = np.frombuffer(blob, dtype="<f8", offset=24).reshape(n, m)
    try:
        return DistanceMatrix(values)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_distances_csv(path, dist: DistanceMatrix) -> None:
    lines = [",".join(repr(v) for v in row) for row in dist.values]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_distances_csv(path) -> DistanceMatrix:
    try:
        values = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError:
        raise
    except Exception as exc:
        raise ParseError(f"{path}: {exc}") from exc
    try:
        return DistanceMatrix(values)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_distances(path, dist: DistanceMatrix) -> None:
    if str(path).endswith(".csv"):
        write_distances_csv(path, dist)
    else:
        write_distances_binary(path, dist)


def read_distances(path) -> DistanceMatrix:
    if str(path).endswith(".csv"):
        return read_distances_csv(path)
    return read_distances_binary(path)


# -- matches -----------------------------------------------------------------

def write_matches_csv(path, matches: MatchSet) -> None:
    lines = ["i,j,score"]
    for m in matches:
        lines.append(f"{m.i},{m.j},{repr(m.score)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_matches_csv(path) -> MatchSet:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError:
        raise
    except Exception as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not rows or [h.strip() for h in rows[0]] != ["i", "j", "score"]:
        raise ParseError(f"{path}: expected header i,j,score")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            out.append(Match(int(row[0]), int(row[1]), float(row[2])))
        except (ValueError, IndexError) as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return MatchSet(out)


# -- PGM (masks and 16-bit depth) ---------------------------------------------

def write_pgm16(path, values: np.ndarray) -> None:
    """Binary PGM, maxval 65535, big-endian samples (the standard encoding)."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError("PGM data must be 2-D")
    if arr.min() < 0 or arr.max() > 65535:
        raise ValueError("PGM-16 samples must lie in [0, 65535]")
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n65535\n".encode("ascii")
    atomic_write_bytes(path, header + arr.astype(">u2").tobytes())


def read_pgm(path) -> np.ndarray:
    """Binary (P5) or ASCII (P2) PGM of either sample width."""
    with open(path, "rb") as fh:
        blob = fh.read()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4 and pos < len(blob):
        # skip whitespace and comment lines
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if pos > start:
            tokens.append(blob[start:pos])
    if len(tokens) < 4 or tokens[0] not in (b"P5", b"P2"):
        raise ParseError(f"{path}: not a supported PGM file")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise ParseError(f"{path}: bad PGM header") from exc
    if tokens[0] == b"P2":
        try:
            data = np.array(blob[pos:].split(), dtype=np.int64).reshape(height, width)
        except ValueError as exc:
            raise ParseError(f"{path}: bad ASCII PGM body") from exc
        return data
    pos += 1  # single whitespace after maxval
    dtype = ">u2" if maxval > 255 else np.uint8
    count = width * height
    body = np.frombuffer(blob, dtype=dtype, offset=pos, count=count)
    if body.size != count:
        raise ParseError(f"{path}: truncated PGM body")
    return body.reshape(height, width).astype(np.int64)


# -- ground truth ------------------------------------------------------------

def _tolerances_to_dict(tol: Tolerances) -> dict:
    return {
        "reprojection_px": tol.reprojection_px,
        "epipolar_px": tol.epipolar_px,
        "method_a_px": tol.method_a_px,
        "method_c_px": tol.method_c_px,
        "method_c_overlap": tol.method_c_overlap,
    }


def write_ground_truth_json(path, gt: GroundTruth, *, depth_paths=None,
                            mask_paths=None, depth_scale: float = 1.0) -> None:
    """Ground truth as tagged JSON; matrices row-major, auxiliary rasters by path.

    Depth maps and region masks are referenced by relative path; pass the
    paths they were written to. Depth sample values are multiplied by
    ``depth_scale`` when read back.
    """
    doc: dict = {"variant": gt.variant, "tolerances": _tolerances_to_dict(gt.tolerances)}
    if gt.homography is not None:
        doc["homography"] = [float(v) for v in gt.homography.matrix.ravel()]
    if gt.fundamental is not None:
        doc["fundamental"] = [float(v) for v in gt.fundamental.matrix.ravel()]
    if gt.variant == "fundamental" and mask_paths is not None:
        doc["region_mask1"], doc["region_mask2"] = [str(p) for p in mask_paths]
    if gt.variant == "depth":
        if depth_paths is None:
            raise ValueError("depth ground truth needs depth map paths")
        doc["depth1"], doc["depth2"] = [str(p) for p in depth_paths]
        doc["depth_scale"] = depth_scale
        poses = []
        for pose in gt.poses:
            poses.append({
                "intrinsics": [float(v) for v in pose.intrinsics.ravel()],
                "rotation": [float(v) for v in pose.rotation.ravel()],
                "translation": [float(v) for v in pose.translation],
            })
        doc["poses"] = poses
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_ground_truth_json(path) -> GroundTruth:
    base = Path(path).parent
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError:
        raise
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    try:
        variant = doc["variant"]
        tolerances = Tolerances(**doc.get("tolerances", {}))
        homography = Homography(doc["homography"]) if "homography" in doc else None
        fundamental = FundamentalMatrix(doc["fundamental"]) if "fundamental" in doc else None
        region_masks = None
        if "region_mask1" in doc:
            region_masks = (
                read_pgm(base / doc["region_mask1"]) > 0,
                read_pgm(base / doc["region_mask2"]) > 0,
            )
        depth_maps = None
        poses = None
        if variant == "depth":
            scale = float(doc.get("depth_scale", 1.0))
            depth_maps = (
                read_pgm(base / doc["depth1"]).astype(float) * scale,
                read_pgm(base / doc["depth2"]).astype(float) * scale,
            )
            poses = tuple(
                CameraPose(p["intrinsics"], p["rotation"], p["translation"])
                for p in doc["poses"]
            )
        return GroundTruth(
            variant=variant,
            homography=homography,
            fundamental=fundamental,
            region_masks=region_masks,
            depth_maps=depth_maps,
            poses=poses,
            tolerances=tolerances,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"{path}: {exc}") from exc


# -- metrics -----------------------------------------------------------------

def write_json(path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError:
        raise
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


METRICS_CSV_COLUMNS = ["pair", "precision", "recall", "recall_star",
                       "correct_matches", "output_matches", "failures", "time_s"]


def write_metrics_csv(path, rows: list[dict]) -> None:
    """Per-pair metric rows in the benchmark table layout."""
    lines = [",".join(METRICS_CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join("" if row.get(c) is None else str(row.get(c))
                              for c in METRICS_CSV_COLUMNS))
    atomic_write_text(path, "\n".join(lines) + "\n")

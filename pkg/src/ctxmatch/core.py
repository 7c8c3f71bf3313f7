"""Fundamental data types: distance matrices, keypoints, matches, match multisets.

All types are immutable after construction and safe to share between threads.
Indices are 0-based everywhere, including file formats and CLI output.
Distances are stored at 64-bit precision: ratio scores of near-equal
distances are ill-conditioned at 32-bit.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .base import check_array_2d


class DistanceMatrix:
    """An n x m matrix of non-negative descriptor distances.

    Entry (i, j) is the distance between descriptor i of the first image
    and descriptor j of the second image.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        arr = check_array_2d(values, "distance matrix")
        if np.any(arr < 0):
            raise ValueError("distance matrix entries must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("DistanceMatrix is immutable")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def transposed(self) -> "DistanceMatrix":
        return DistanceMatrix(self.values.T)

    def __repr__(self) -> str:
        return f"DistanceMatrix(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class Keypoint:
    """An image point, optionally with an elliptical patch region.

    The ellipse coefficients (a, b, c) define the patch as the set of
    offsets p from the center with p' [[a, c], [c, b]] p <= 1.
    """

    x: float
    y: float
    ellipse: tuple[float, float, float] | None = None
    scale: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError("keypoint coordinates must be finite")
        if self.ellipse is not None:
            a, b, c = self.ellipse
            if not (a > 0 and b > 0 and a * b - c * c > 0):
                raise ValueError("ellipse (a, b, c) must be symmetric positive definite")
        if self.scale is not None and not self.scale > 0:
            raise ValueError("scale must be positive")


@dataclass(frozen=True, order=True)
class Match:
    """An (i, j) index pair with a matching score; lower score = better."""

    i: int
    j: int
    score: float = 0.0


class MatchSet:
    """An ordered multiset of matches with per-index multiplicity queries.

    Ordering is stable: equal scores preserve insertion order. Multiplicity
    refers to how often a row index i (or column index j) appears among the
    entries, which is what bounds many-to-many selection.
    """

    __slots__ = ("_entries", "_row_counts", "_col_counts")

    def __init__(self, entries: Iterable[Match] = ()):
        ents = tuple(entries)
        for e in ents:
            if not isinstance(e, Match):
                raise TypeError("MatchSet entries must be Match instances")
        object.__setattr__(self, "_entries", ents)
        object.__setattr__(self, "_row_counts", Counter(e.i for e in ents))
        object.__setattr__(self, "_col_counts", Counter(e.j for e in ents))

    def __setattr__(self, name, value):
        raise AttributeError("MatchSet is immutable")

    @classmethod
    def from_arrays(cls, i_idx, j_idx, scores=None) -> "MatchSet":
        i_idx = np.asarray(i_idx, dtype=np.int64)
        j_idx = np.asarray(j_idx, dtype=np.int64)
        if scores is None:
            scores = np.zeros(len(i_idx))
        scores = np.asarray(scores, dtype=np.float64)
        return cls(Match(int(i), int(j), float(s)) for i, j, s in zip(i_idx, j_idx, scores))

    @property
    def entries(self) -> tuple[Match, ...]:
        return self._entries

    def row_count(self, i: int) -> int:
        return self._row_counts.get(i, 0)

    def col_count(self, j: int) -> int:
        return self._col_counts.get(j, 0)

    def pairs(self) -> list[tuple[int, int]]:
        return [(e.i, e.j) for e in self._entries]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self._entries:
            return (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.float64))
        i_idx = np.fromiter((e.i for e in self._entries), np.int64, len(self._entries))
        j_idx = np.fromiter((e.j for e in self._entries), np.int64, len(self._entries))
        scores = np.fromiter((e.score for e in self._entries), np.float64, len(self._entries))
        return i_idx, j_idx, scores

    def __iter__(self) -> Iterator[Match]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, k: int) -> Match:
        return self._entries[k]

    def __eq__(self, other) -> bool:
        return isinstance(other, MatchSet) and self._entries == other._entries

    def __repr__(self) -> str:
        return f"MatchSet({len(self._entries)} matches)"


@dataclass(frozen=True)
class PairContext:
    """Keypoints and canvas dimensions for an image pair.

    Keypoint coordinates may overshoot the canvas (detectors do), but must
    be finite. Coordinate arrays and ellipse arrays are derived once and
    cached for vectorized access.
    """

    keypoints1: tuple[Keypoint, ...]
    keypoints2: tuple[Keypoint, ...]
    width1: float
    height1: float
    width2: float
    height2: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "keypoints1", tuple(self.keypoints1))
        object.__setattr__(self, "keypoints2", tuple(self.keypoints2))
        for d in (self.width1, self.height1, self.width2, self.height2):
            if not d > 0:
                raise ValueError("image dimensions must be positive")

    def coords(self, side: int) -> np.ndarray:
        """(N, 2) coordinate array of the requested image (1 or 2)."""
        key = ("coords", side)
        if key not in self._cache:
            kps = self.keypoints1 if side == 1 else self.keypoints2
            self._cache[key] = np.array([(k.x, k.y) for k in kps], dtype=np.float64).reshape(-1, 2)
        return self._cache[key]

    def ellipses(self, side: int) -> np.ndarray | None:
        """(N, 3) ellipse coefficient array, or None if any keypoint lacks one."""
        key = ("ellipses", side)
        if key not in self._cache:
            kps = self.keypoints1 if side == 1 else self.keypoints2
            if any(k.ellipse is None for k in kps):
                self._cache[key] = None
            else:
                self._cache[key] = np.array([k.ellipse for k in kps], dtype=np.float64).reshape(-1, 3)
        return self._cache[key]

    def size(self, side: int) -> tuple[float, float]:
        return (self.width1, self.height1) if side == 1 else (self.width2, self.height2)


def compute_distance_matrix(desc1: Sequence, desc2: Sequence, metric: str = "euclidean") -> DistanceMatrix:
    """Exhaustive pairwise descriptor distances.

    ``euclidean`` is the plain L2 distance. ``hellinger`` L1-normalizes each
    vector, takes element-wise square roots, then measures L2; it requires
    non-negative descriptors.
    """
    a = check_array_2d(np.atleast_2d(np.asarray(desc1, dtype=np.float64)), "desc1")
    b = check_array_2d(np.atleast_2d(np.asarray(desc2, dtype=np.float64)), "desc2")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"descriptor dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if metric == "hellinger":
        if np.any(a < 0) or np.any(b < 0):
            raise ValueError("hellinger distance requires non-negative descriptors")
        a = np.sqrt(a / np.maximum(np.abs(a).sum(axis=1, keepdims=True), np.finfo(float).tiny))
        b = np.sqrt(b / np.maximum(np.abs(b).sum(axis=1, keepdims=True), np.finfo(float).tiny))
    elif metric != "euclidean":
        raise ValueError(f"unknown metric {metric!r}")
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return DistanceMatrix(np.sqrt(np.maximum(sq, 0.0)))


def kth_best(dist: DistanceMatrix, axis: str, index: int, k: int) -> float:
    """k-th smallest value along a row or column of the distance matrix.

    Equal values occupy consecutive ranks, so ties are resolved by value.
    """
    if axis == "row":
        vals = dist.values[index, :]
    elif axis == "column":
        vals = dist.values[:, index]
    else:
        raise ValueError("axis must be 'row' or 'column'")
    if not 1 <= k <= vals.shape[0]:
        raise ValueError(f"k={k} out of range for length {vals.shape[0]}")
    return float(np.partition(vals, k - 1)[k - 1])

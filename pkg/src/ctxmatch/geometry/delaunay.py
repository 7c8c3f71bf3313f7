"""Delaunay triangulation with deterministic ordering and exact queries.

Construction is delegated to Qhull (scipy.spatial.Delaunay); the wrapper
canonicalizes triangle ordering so results are reproducible across runs,
builds a symmetric vertex adjacency index, and answers point location with
exact predicates so points exactly on shared edges resolve deterministically.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay as _SciPyDelaunay
from scipy.spatial import QhullError

from ..base import check_points
from .predicates import orient2d, point_in_triangle


def _csr_from_pairs(sources: np.ndarray, targets: np.ndarray, n: int):
    """Sorted CSR adjacency (indptr, indices) from directed pair arrays."""
    order = np.lexsort((targets, sources))
    src = sources[order]
    tgt = targets[order]
    if len(src):
        keep = np.ones(len(src), dtype=bool)
        keep[1:] = (src[1:] != src[:-1]) | (tgt[1:] != tgt[:-1])
        src = src[keep]
        tgt = tgt[keep]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, tgt


class Triangulation:
    """An immutable planar triangulation with adjacency and location queries."""

    __slots__ = ("points", "triangles", "_adj_indptr", "_adj_indices",
                 "_inc_indptr", "_inc_indices", "_qhull", "_order")

    def __init__(self, points: np.ndarray, triangles: np.ndarray, qhull, order):
        points.setflags(write=False)
        triangles.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "triangles", triangles)
        object.__setattr__(self, "_qhull", qhull)
        object.__setattr__(self, "_order", order)
        nv = len(points)
        a, b, c = triangles[:, 0], triangles[:, 1], triangles[:, 2]
        src = np.concatenate([a, b, b, c, c, a])
        tgt = np.concatenate([b, a, c, b, a, c])
        indptr, indices = _csr_from_pairs(src, tgt, nv)
        object.__setattr__(self, "_adj_indptr", indptr)
        object.__setattr__(self, "_adj_indices", indices)
        tri_ids = np.tile(np.arange(len(triangles), dtype=np.int64), 3)
        iptr, iind = _csr_from_pairs(triangles.T.reshape(-1), tri_ids, nv)
        object.__setattr__(self, "_inc_indptr", iptr)
        object.__setattr__(self, "_inc_indices", iind)

    def __setattr__(self, name, value):
        raise AttributeError("Triangulation is immutable")

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def edges(self) -> set[tuple[int, int]]:
        out: set[tuple[int, int]] = set()
        for a, b, c in self.triangles:
            out.add((min(a, b), max(a, b)))
            out.add((min(b, c), max(b, c)))
            out.add((min(c, a), max(c, a)))
        return out

    def neighbors(self, v: int) -> np.ndarray:
        """Vertices sharing an edge with v, sorted ascending (v excluded)."""
        if not 0 <= v < self.n_vertices:
            raise IndexError(f"vertex index {v} out of range")
        return self._adj_indices[self._adj_indptr[v]:self._adj_indptr[v + 1]]

    def incident_triangles(self, v: int) -> np.ndarray:
        """Triangles having v as a vertex, sorted ascending."""
        return self._inc_indices[self._inc_indptr[v]:self._inc_indptr[v + 1]]

    def _contains(self, t: int, px: float, py: float) -> bool:
        a, b, c = self.triangles[t]
        pa, pb, pc = self.points[a], self.points[b], self.points[c]
        return point_in_triangle(px, py, pa[0], pa[1], pb[0], pb[1], pc[0], pc[1])

    def locate(self, point) -> int | None:
        """Index of a triangle containing the point (boundary inclusive).

        Points on shared edges or vertices resolve to the lowest triangle
        index; None if the point lies outside every triangle.
        """
        return self.locate_many(np.asarray(point, dtype=np.float64).reshape(1, 2))[0]

    def locate_many(self, points: np.ndarray) -> list[int | None]:
        pts = check_points(points, "query points")
        guesses = self._qhull.find_simplex(pts)
        results: list[int | None] = []
        for k, guess in enumerate(guesses):
            px, py = float(pts[k, 0]), float(pts[k, 1])
            best: int | None = None
            if guess >= 0:
                t = int(self._order[guess])
                # a point on a shared edge or vertex may also belong to a
                # lower-index triangle incident to the same vertices
                seen = set()
                for v in self.triangles[t]:
                    for tt in self.incident_triangles(int(v)):
                        tt = int(tt)
                        if tt in seen:
                            continue
                        seen.add(tt)
                        if (best is None or tt < best) and self._contains(tt, px, py):
                            best = tt
            if best is None:
                # rare: walk failed near the hull boundary; exact full scan
                for tt in range(self.n_triangles):
                    if self._contains(tt, px, py):
                        best = tt
                        break
            results.append(best)
        return results


def delaunay(points) -> Triangulation | None:
    """Delaunay triangulation of distinct planar points.

    Triangles are CCW-oriented and listed in canonical (sorted-index) order,
    so the output is deterministic for a fixed input. Returns None when fewer
    than 3 distinct points are given or all points are collinear.
    """
    pts = check_points(points, "points")
    if len(np.unique(pts, axis=0)) != len(pts):
        raise ValueError("duplicate points must be removed by the caller")
    if len(pts) < 3:
        return None
    try:
        qhull = _SciPyDelaunay(pts)
    except QhullError:
        return None
    simplices = qhull.simplices.astype(np.int64)
    if len(simplices) == 0:
        return None
    pa = pts[simplices[:, 0]]
    pb = pts[simplices[:, 1]]
    pc = pts[simplices[:, 2]]
    d1 = (pb[:, 0] - pa[:, 0]) * (pc[:, 1] - pa[:, 1])
    d2 = (pb[:, 1] - pa[:, 1]) * (pc[:, 0] - pa[:, 0])
    cross = d1 - d2
    uncertain = np.abs(cross) <= 4.0e-16 * (np.abs(d1) + np.abs(d2))
    for k in np.nonzero(uncertain)[0]:
        cross[k] = orient2d(pa[k, 0], pa[k, 1], pb[k, 0], pb[k, 1], pc[k, 0], pc[k, 1])
    flip = cross < 0
    simplices[flip, 1], simplices[flip, 2] = simplices[flip, 2], simplices[flip, 1].copy()
    # rotate each triangle so the smallest vertex leads, preserving orientation
    lead = np.argmin(simplices, axis=1)
    cols = (lead[:, None] + np.arange(3)[None, :]) % 3
    simplices = np.take_along_axis(simplices, cols, axis=1)
    order = np.lexsort((simplices[:, 2], simplices[:, 1], simplices[:, 0]))
    triangles = simplices[order]
    inverse = np.empty(len(order), dtype=np.int64)
    inverse[order] = np.arange(len(order))
    return Triangulation(pts.copy(), triangles, qhull, inverse)


def adjacency(tri: Triangulation, v: int) -> list[int]:
    """Vertices adjacent to v in the triangulation, including v itself."""
    return sorted(set(int(u) for u in tri.neighbors(v)) | {int(v)})


def locate_triangle(tri: Triangulation, point) -> int | None:
    """Triangle index containing the point, or None if outside the hull."""
    return tri.locate(point)

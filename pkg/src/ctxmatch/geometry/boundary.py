"""Convex hulls, alpha-shape boundaries, and the fattened/split border point
set placed around a keypoint cloud before triangulation.

The border construction fattens the alpha-shape boundary edges outward by a
length s (one tenth of the smaller image dimension), re-extracts the boundary
of the enlarged cloud, and splits its edges into length-s segments whose
endpoints become the synthetic border vertices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..base import check_points
from ..errors import DegenerateGeometryError
from .delaunay import Triangulation, delaunay
from .predicates import orient2d

DEFAULT_SHRINK = 0.5

BOUNDARY_MODES = ("alpha", "convex-hull", "none")


def convex_hull(points) -> np.ndarray:
    """Indices of the convex hull vertices in CCW order (monotone chain).

    Collinear points interior to hull edges are excluded. Raises
    DegenerateGeometryError for fewer than 3 distinct points or collinear input.
    """
    pts = check_points(points, "points")
    uniq = np.unique(pts, axis=0)
    if len(uniq) < 3:
        raise DegenerateGeometryError("convex hull needs >= 3 distinct points")
    order = np.lexsort((pts[:, 1], pts[:, 0]))

    def half(indices):
        chain: list[int] = []
        for idx in indices:
            p = pts[idx]
            while len(chain) >= 2:
                a = pts[chain[-2]]
                b = pts[chain[-1]]
                if orient2d(a[0], a[1], b[0], b[1], p[0], p[1]) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(int(idx))
        return chain

    lower = half(order)
    upper = half(order[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateGeometryError("points are collinear")
    return np.array(hull, dtype=np.int64)


def triangle_circumradii(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = points[triangles[:, 0]]
    b = points[triangles[:, 1]]
    c = points[triangles[:, 2]]
    la = np.linalg.norm(b - c, axis=1)
    lb = np.linalg.norm(c - a, axis=1)
    lc = np.linalg.norm(a - b, axis=1)
    area2 = np.abs(
        (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    )
    radii = np.full(len(triangles), np.inf)
    ok = area2 > 0
    radii[ok] = la[ok] * lb[ok] * lc[ok] / (2.0 * area2[ok])
    return radii


def _edge_ids(triangles: np.ndarray, n_points: int) -> np.ndarray:
    """(T, 3) array of undirected edge keys encoded as min * n + max."""
    a, b, c = triangles[:, 0], triangles[:, 1], triangles[:, 2]
    e = np.stack([
        np.minimum(a, b) * n_points + np.maximum(a, b),
        np.minimum(b, c) * n_points + np.maximum(b, c),
        np.minimum(c, a) * n_points + np.maximum(c, a),
    ], axis=1)
    return e


def _critical_radius(points: np.ndarray, triangles: np.ndarray, radii: np.ndarray) -> float:
    """Smallest radius threshold covering every point with one edge-connected region."""
    order = np.argsort(radii, kind="stable")
    parent = np.arange(len(triangles))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return int(x)

    edge_keys = _edge_ids(triangles, len(points))
    sorted_radii = radii[order]
    covered = np.zeros(len(points), dtype=bool)
    n_covered = 0
    n_components = 0
    edge_owner: dict[int, int] = {}
    k = 0
    n_tri = len(order)
    while k < n_tri:
        r = sorted_radii[k]
        while k < n_tri and sorted_radii[k] <= r:
            t = int(order[k])
            k += 1
            n_components += 1
            for v in triangles[t]:
                if not covered[v]:
                    covered[v] = True
                    n_covered += 1
            for key in edge_keys[t]:
                other = edge_owner.get(int(key))
                if other is None:
                    edge_owner[int(key)] = t
                else:
                    ra, rb = find(other), find(t)
                    if ra != rb:
                        parent[ra] = rb
                        n_components -= 1
        if n_covered == len(points) and n_components == 1:
            return float(r)
    raise DegenerateGeometryError("alpha complex never covers all points")  # pragma: no cover


def _boundary_edges(triangles: np.ndarray, keep: np.ndarray, n_points: int) -> list[tuple[int, int]]:
    keys = _edge_ids(triangles[keep], n_points).ravel()
    uniq, counts = np.unique(keys, return_counts=True)
    single = uniq[counts == 1]
    return [(int(k // n_points), int(k % n_points)) for k in single]


def _chain_loops(edges: list[tuple[int, int]]) -> list[list[int]]:
    """Decompose boundary edges into closed loops (every vertex has even degree)."""
    incident: dict[int, list[int]] = {}
    for idx, (u, v) in enumerate(edges):
        incident.setdefault(u, []).append(idx)
        incident.setdefault(v, []).append(idx)
    used = [False] * len(edges)
    loops: list[list[int]] = []
    for start_idx in range(len(edges)):
        if used[start_idx]:
            continue
        u, v = edges[start_idx]
        used[start_idx] = True
        loop = [u, v]
        current = v
        while current != loop[0]:
            nxt = None
            for e in incident[current]:
                if not used[e]:
                    nxt = e
                    break
            if nxt is None:  # open chain; should not happen for alpha boundaries
                break
            used[nxt] = True
            a, b = edges[nxt]
            current = b if a == current else a
            loop.append(current)
        loops.append(loop)
    return loops


def alpha_boundary(points, shrink: float = DEFAULT_SHRINK) -> list[list[int]]:
    """Boundary loops of the alpha complex, as closed lists of point indices.

    The complex keeps Delaunay triangles with circumradius below a threshold
    interpolated by index over the sorted unique circumradii: shrink=0 keeps
    everything (convex hull) and shrink=1 stops at the critical radius, the
    smallest threshold covering every point with a single connected region.
    The last index of each loop equals the first.
    """
    if not 0.0 <= shrink <= 1.0:
        raise ValueError("shrink must lie in [0, 1]")
    tri = delaunay(points)
    if tri is None:
        raise DegenerateGeometryError("alpha boundary needs >= 3 non-collinear distinct points")
    radii = triangle_circumradii(tri.points, tri.triangles)
    crit = _critical_radius(tri.points, tri.triangles, radii)
    candidates = np.unique(radii)
    candidates = candidates[candidates >= crit][::-1]
    alpha = float(candidates[int(round(shrink * (len(candidates) - 1)))])
    keep = radii <= alpha
    return _chain_loops(_boundary_edges(tri.triangles, keep, tri.n_vertices))


@dataclass(frozen=True)
class BoundarySet:
    """Synthetic border vertices added around a keypoint cloud.

    ``points`` is an (N, 2) array; ``spacing`` is the fattening and edge
    splitting length s in pixels.
    """

    points: np.ndarray
    spacing: float

    def __post_init__(self):
        self.points.setflags(write=False)
        if not self.spacing > 0:
            raise ValueError("boundary spacing must be positive")


def _loops_to_edges(points: np.ndarray, loops: list[list[int]]) -> list[tuple[int, int]]:
    out = []
    for loop in loops:
        for k in range(len(loop) - 1):
            out.append((loop[k], loop[k + 1]))
    return out


def _hull_loop(points: np.ndarray) -> list[list[int]]:
    hull = convex_hull(points)
    return [list(hull) + [int(hull[0])]]


def build_dtm_boundary(points, width: float, height: float,
                       mode: str = "alpha", shrink: float = DEFAULT_SHRINK) -> BoundarySet:
    """Fattened, split border point set enclosing a keypoint cloud.

    Step 1 extracts the cloud boundary (alpha shape by default, convex hull as
    the simpler alternative) and, for each boundary edge, emits the four
    points at distance s from the edge on the perpendiculars through its two
    endpoints. Step 2 re-extracts the boundary of the enlarged cloud and
    splits each of its edges into length-s segments (final partial segment
    retained) whose endpoints form the border set. Border points are not
    clipped to the image canvas. ``mode='none'`` returns an empty set.
    """
    if mode not in BOUNDARY_MODES:
        raise ValueError(f"unknown boundary mode {mode!r}")
    pts = check_points(points, "points")
    s = min(width, height) / 10.0
    if mode == "none":
        return BoundarySet(np.empty((0, 2)), s)

    def boundary_loops(p: np.ndarray) -> list[list[int]]:
        if mode == "alpha":
            return alpha_boundary(p, shrink)
        return _hull_loop(p)

    fattened: list[np.ndarray] = []
    for u, v in _loops_to_edges(pts, boundary_loops(pts)):
        p, q = pts[u], pts[v]
        d = q - p
        length = float(np.hypot(d[0], d[1]))
        if length == 0:
            continue
        normal = np.array([-d[1], d[0]]) / length
        for endpoint in (p, q):
            fattened.append(endpoint + s * normal)
            fattened.append(endpoint - s * normal)
    enlarged = np.unique(np.vstack([pts] + fattened), axis=0)

    border: list[np.ndarray] = []
    for u, v in _loops_to_edges(enlarged, boundary_loops(enlarged)):
        p, q = enlarged[u], enlarged[v]
        d = q - p
        length = float(np.hypot(d[0], d[1]))
        if length == 0:
            continue
        direction = d / length
        n_whole = int(length // s)
        for k in range(n_whole + 1):
            border.append(p + (k * s) * direction)
        border.append(q)
    border_arr = np.unique(np.array(border), axis=0)
    # border points exactly coinciding with cloud points would collide in the
    # triangulation vertex set; the cloud keeps ownership
    cloud = set(map(tuple, pts))
    keep = [tuple(b) not in cloud for b in border_arr]
    return BoundarySet(border_arr[keep], s)

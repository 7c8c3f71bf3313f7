"""Independent reference implementations used as test oracles.

Everything here is written directly from first principles (exhaustive
enumeration, exact rational arithmetic, textbook formulas) and must stay
independent of the package code paths it checks.
"""

from fractions import Fraction

import numpy as np


# -- matching ------------------------------------------------------------------

def brute_mutual_nn(values: np.ndarray) -> set[tuple[int, int]]:
    """Pairs that are simultaneously the minimum of their row and column."""
    out = set()
    n, m = values.shape
    for i in range(n):
        for j in range(m):
            if values[i, j] == values[i].min() and values[i, j] == values[:, j].min():
                out.add((i, j))
    return out


def brute_greedy_one_to_one(values: np.ndarray) -> list[tuple[int, int]]:
    """Greedy one-to-one selection over the ascending linearized matrix."""
    n, m = values.shape
    cells = sorted(((values[i, j], i, j) for i in range(n) for j in range(m)))
    used_i, used_j, out = set(), set(), []
    for _, i, j in cells:
        if i not in used_i and j not in used_j:
            out.append((i, j))
            used_i.add(i)
            used_j.add(j)
    return out


# -- exact geometry --------------------------------------------------------------

def orient_exact(a, b, c) -> int:
    det = (Fraction(b[0]) - Fraction(a[0])) * (Fraction(c[1]) - Fraction(a[1])) - (
        Fraction(b[1]) - Fraction(a[1])
    ) * (Fraction(c[0]) - Fraction(a[0]))
    return (det > 0) - (det < 0)


def incircle_exact(a, b, c, d) -> int:
    """Sign of d against the circumcircle of CCW triangle abc, exactly."""
    rows = []
    for p in (a, b, c):
        dx = Fraction(p[0]) - Fraction(d[0])
        dy = Fraction(p[1]) - Fraction(d[1])
        rows.append((dx, dy, dx * dx + dy * dy))
    det = (
        rows[0][0] * (rows[1][1] * rows[2][2] - rows[1][2] * rows[2][1])
        - rows[0][1] * (rows[1][0] * rows[2][2] - rows[1][2] * rows[2][0])
        + rows[0][2] * (rows[1][0] * rows[2][1] - rows[1][1] * rows[2][0])
    )
    return (det > 0) - (det < 0)


def brute_delaunay(points: np.ndarray) -> set[tuple[int, int, int]]:
    """All triangles whose circumcircle strictly contains no other point."""
    n = len(points)
    out = set()
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                a, b, c = points[i], points[j], points[k]
                o = orient_exact(a, b, c)
                if o == 0:
                    continue
                if o < 0:
                    a, c = c, a
                empty = True
                for q in range(n):
                    if q in (i, j, k):
                        continue
                    if incircle_exact(a, b, c, points[q]) > 0:
                        empty = False
                        break
                if empty:
                    out.add((i, j, k))
    return out


def brute_hull(points: np.ndarray) -> set[int]:
    """Extreme points by the O(n^3) halfplane definition.

    A point is extreme iff some directed line through it and another point
    keeps all remaining points strictly on one side (with collinear interior
    points excluded via distance comparison along the line).
    """
    n = len(points)
    extreme = set()
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            left = right = 0
            on_line_beyond = False
            for k in range(n):
                if k in (i, j):
                    continue
                o = orient_exact(points[i], points[j], points[k])
                if o > 0:
                    left += 1
                elif o < 0:
                    right += 1
                else:
                    # collinear: i must be an endpoint of the collinear run
                    d_ij = np.dot(points[j] - points[i], points[j] - points[i])
                    d_ik = np.dot(points[k] - points[i], points[j] - points[i])
                    if d_ik < 0 or d_ik > d_ij:
                        on_line_beyond = True
            if (left == 0 or right == 0) and not on_line_beyond:
                extreme.add(i)
                break
    return extreme


def shoelace_area(loop: np.ndarray) -> float:
    """Absolute polygon area; loop given as an (N, 2) array, not closed."""
    x = loop[:, 0]
    y = loop[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def point_in_polygon(point, loop: np.ndarray) -> bool:
    """Strict interior test by ray casting (loop not closed)."""
    x, y = float(point[0]), float(point[1])
    inside = False
    n = len(loop)
    for k in range(n):
        x1, y1 = loop[k]
        x2, y2 = loop[(k + 1) % n]
        if (y1 > y) != (y2 > y):
            t = (y - y1) / (y2 - y1)
            xi = x1 + t * (x2 - x1)
            if xi > x:
                inside = not inside
    return inside


def triangle_angles(a, b, c) -> list[float]:
    pts = [np.asarray(a, float), np.asarray(b, float), np.asarray(c, float)]
    out = []
    for k in range(3):
        u = pts[(k + 1) % 3] - pts[k]
        v = pts[(k + 2) % 3] - pts[k]
        cosang = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
        out.append(float(np.arccos(np.clip(cosang, -1.0, 1.0))))
    return out


def min_angle(points: np.ndarray, triangles) -> float:
    return min(min(triangle_angles(points[a], points[b], points[c]))
               for a, b, c in triangles)


def _edges_of(tri) -> list[tuple[int, int]]:
    a, b, c = tri
    return [(min(a, b), max(a, b)), (min(b, c), max(b, c)), (min(c, a), max(c, a))]


def enumerate_triangulations(points: np.ndarray, seed_triangles) -> list[frozenset]:
    """All triangulations of the point set, explored by diagonal flips.

    The flip graph of planar point-set triangulations is connected, so a BFS
    from any valid triangulation visits all of them. A flip replaces the
    shared diagonal of two triangles forming a strictly convex quadrilateral.
    """
    start = frozenset(tuple(sorted(t)) for t in seed_triangles)
    seen = {start}
    queue = [start]
    while queue:
        current = queue.pop()
        by_edge: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
        for t in current:
            for e in _edges_of(t):
                by_edge.setdefault(e, []).append(t)
        for edge, tris in by_edge.items():
            if len(tris) != 2:
                continue
            t1, t2 = tris
            others = [v for v in t1 + t2 if v not in edge]
            p, q = edge
            r, s = others
            # flip legal iff the quad p r q s is strictly convex
            quad = [points[p], points[r], points[q], points[s]]
            orients = [orient_exact(quad[k], quad[(k + 1) % 4], quad[(k + 2) % 4])
                       for k in range(4)]
            if 0 in orients or len(set(orients)) != 1:
                continue
            new = (current - {t1, t2}) | {
                tuple(sorted((r, s, p))), tuple(sorted((r, s, q)))
            }
            new = frozenset(new)
            if new not in seen:
                seen.add(new)
                queue.append(new)
    return sorted(seen, key=sorted)


# -- models ---------------------------------------------------------------------

def apply_h(h: np.ndarray, p) -> np.ndarray:
    v = h @ np.array([p[0], p[1], 1.0])
    return v[:2] / v[2]


def epipolar_dist_oracle(f: np.ndarray, p1, p2) -> float:
    """Scalar recomputation of the symmetric epipolar distance."""
    x1 = np.array([p1[0], p1[1], 1.0])
    x2 = np.array([p2[0], p2[1], 1.0])
    l2 = f @ x1
    l1 = f.T @ x2
    d2 = abs(x2 @ l2) / np.hypot(l2[0], l2[1])
    d1 = abs(x1 @ l1) / np.hypot(l1[0], l1[1])
    return max(d1, d2)

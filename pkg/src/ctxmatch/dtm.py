"""Delaunay Triangulation Matching: a parameter-free local spatial filter.

Stage one alternates triangulation "pulses": matches are ranked by descriptor
score and neighborhood support, greedily kept while their incoherent
neighbors are dropped, and the survivor set is re-triangulated until it stops
changing. Stage two replays the pruning history in reverse and re-admits
discarded matches whose keypoints fall inside corresponding triangles of the
survivor triangulations. The only tunables are the boundary construction mode
and the stage switch; there is no neighborhood radius or threshold anywhere.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .base import ParamsMixin
from .core import MatchSet, PairContext
from .errors import DegenerateGeometryError
from .geometry import BoundarySet, build_dtm_boundary, delaunay, point_in_triangle


def round_half_up(values: np.ndarray) -> np.ndarray:
    """Nearest-integer rounding with halves going toward +infinity."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5)


def collapse(matches: MatchSet, ctx: PairContext):
    """Collapse match keypoints onto integer-rounded vertices per image.

    Returns (v1, v2, pairs): unique rounded coordinates of each image (sorted
    lexicographically) and an (N, 2) array giving each match's vertex index
    pair. Distinct matches may share a vertex pair.
    """
    i_idx, j_idx, _ = matches.arrays()
    r1 = round_half_up(ctx.coords(1)[i_idx])
    r2 = round_half_up(ctx.coords(2)[j_idx])
    v1, inv1 = np.unique(r1, axis=0, return_inverse=True)
    v2, inv2 = np.unique(r2, axis=0, return_inverse=True)
    pairs = np.stack([inv1.ravel(), inv2.ravel()], axis=1)
    return v1, v2, pairs


@dataclass(frozen=True)
class DtmState:
    """History of one stage-one run.

    ``iterations`` holds the surviving match indices (positions into
    ``matches``) per pulse, starting with the full input; the final entry
    equals the one before it unless the run degenerated. ``boundaries`` are
    the border sets of the first iteration (one per image), reused by stage
    two; ``vertex_maps`` are the first-iteration mappings from rounded
    coordinates to vertex index and from vertex index to collapsed matches.
    """

    matches: MatchSet
    iterations: tuple[tuple[int, ...], ...]
    boundaries: tuple[BoundarySet, BoundarySet] | None
    rounded1: np.ndarray
    rounded2: np.ndarray
    vertex_maps: tuple[dict, dict] | None = None
    boundaries_per_iteration: tuple = field(default=None, repr=False)

    @property
    def final(self) -> tuple[int, ...]:
        return self.iterations[-1]


def _neighbor_match_sets(tri, n_cloud_vertices: int, matches_at_vertex: list[list[int]]):
    """Per cloud vertex: matches collapsed into the vertex or its neighbors.

    Border vertices participate in adjacency but anchor no matches.
    """
    out = []
    for v in range(n_cloud_vertices):
        acc = list(matches_at_vertex[v])
        for u in tri.neighbors(v):
            if u < n_cloud_vertices:
                acc.extend(matches_at_vertex[int(u)])
        out.append(frozenset(acc))
    return out


def _empty_state(matches, iterations, boundaries, r1, r2, vmaps=None, per_iter=None) -> DtmState:
    return DtmState(matches, tuple(iterations) + ((),), boundaries, r1, r2, vmaps, per_iter)


def dtm1(matches: MatchSet, ctx: PairContext, boundary_mode: str = "alpha",
         per_iteration_boundaries: bool = False) -> DtmState:
    """Stage one: iterative contraction and expansion of the match set.

    Matches must carry scores (lower = better). If the keypoints are too
    degenerate to triangulate, the run terminates with an empty final set.
    """
    i_idx, j_idx, scores = matches.arrays()
    r1_all = round_half_up(ctx.coords(1)[i_idx]) if len(matches) else np.empty((0, 2))
    r2_all = round_half_up(ctx.coords(2)[j_idx]) if len(matches) else np.empty((0, 2))
    iterations: list[tuple[int, ...]] = [tuple(range(len(matches)))]
    if len(matches) == 0:
        return DtmState(matches, ((), ()), None, r1_all, r2_all)

    boundaries: tuple[BoundarySet, BoundarySet] | None = None
    per_iter_bounds: list[tuple[BoundarySet, BoundarySet]] = []
    vertex_maps = None
    survivors = list(range(len(matches)))
    while True:
        v1, inv1 = np.unique(r1_all[survivors], axis=0, return_inverse=True)
        v2, inv2 = np.unique(r2_all[survivors], axis=0, return_inverse=True)
        need_bounds = boundaries is None or per_iteration_boundaries
        if need_bounds:
            try:
                b1 = build_dtm_boundary(v1, ctx.width1, ctx.height1, boundary_mode)
                b2 = build_dtm_boundary(v2, ctx.width2, ctx.height2, boundary_mode)
            except (DegenerateGeometryError, ValueError):
                return _empty_state(matches, iterations, boundaries, r1_all, r2_all,
                                    vertex_maps, tuple(per_iter_bounds) or None)
            if boundaries is None:
                boundaries = (b1, b2)
            if per_iteration_boundaries:
                per_iter_bounds.append((b1, b2))
        else:
            b1, b2 = boundaries
        if per_iteration_boundaries:
            b1, b2 = per_iter_bounds[-1]
        t1 = delaunay(np.vstack([v1, b1.points]) if len(b1.points) else v1)
        t2 = delaunay(np.vstack([v2, b2.points]) if len(b2.points) else v2)
        if t1 is None or t2 is None:
            return _empty_state(matches, iterations, boundaries, r1_all, r2_all,
                                vertex_maps, tuple(per_iter_bounds) or None)

        at1: list[list[int]] = [[] for _ in range(len(v1))]
        at2: list[list[int]] = [[] for _ in range(len(v2))]
        for local, g in enumerate(survivors):
            at1[inv1[local]].append(g)
            at2[inv2[local]].append(g)
        if vertex_maps is None:
            vertex_maps = (
                {tuple(c): k for k, c in enumerate(map(tuple, v1))},
                {tuple(c): k for k, c in enumerate(map(tuple, v2))},
            )
        m_a1 = _neighbor_match_sets(t1, len(v1), at1)
        m_a2 = _neighbor_match_sets(t2, len(v2), at2)

        inter_cache: dict[tuple[int, int], frozenset] = {}
        union_cache: dict[tuple[int, int], frozenset] = {}
        inter_of: list[frozenset] = []
        for local in range(len(survivors)):
            key = (int(inv1[local]), int(inv2[local]))
            inter = inter_cache.get(key)
            if inter is None:
                inter = m_a1[key[0]] & m_a2[key[1]]
                inter_cache[key] = inter
                union_cache[key] = m_a1[key[0]] | m_a2[key[1]]
            inter_of.append(inter)

        ranked = sorted(
            range(len(survivors)),
            key=lambda k: (scores[survivors[k]], -len(inter_of[k]),
                           i_idx[survivors[k]], j_idx[survivors[k]]),
        )
        active = np.ones(len(survivors), dtype=bool)
        pos_of = {g: local for local, g in enumerate(survivors)}
        kept_union: set[int] = set()
        for k in ranked:
            if not active[k]:
                continue
            key = (int(inv1[k]), int(inv2[k]))
            inter = inter_cache[key]
            kept_union.update(inter)
            active[k] = False
            for g in union_cache[key] - inter:
                active[pos_of[g]] = False

        nxt = tuple(sorted(kept_union))
        iterations.append(nxt)
        if nxt == tuple(survivors):
            break
        survivors = list(nxt)
        if not survivors:
            break
    return DtmState(matches, tuple(iterations), boundaries, r1_all, r2_all,
                    vertex_maps, tuple(per_iter_bounds) or None)


class _SideIndex:
    """One image's triangulation over survivor vertices plus border points."""

    def __init__(self, rounded: np.ndarray, members: list[int], border: np.ndarray):
        self.vertices, inverse = np.unique(rounded[members], axis=0, return_inverse=True)
        self.n_cloud = len(self.vertices)
        pts = np.vstack([self.vertices, border]) if len(border) else self.vertices
        self.tri = delaunay(pts)
        self.coord_to_vertex = {tuple(c): k for k, c in enumerate(map(tuple, self.vertices))}
        self.correspondences: list[set[tuple[float, float]]] = [set() for _ in range(self.n_cloud)]
        self._members = (members, inverse)

    def add_correspondence(self, coord: tuple, opposite: tuple) -> None:
        v = self.coord_to_vertex.get(coord)
        if v is not None:
            self.correspondences[v].add(opposite)


def _nearest_border_map(b_from: BoundarySet, b_to: BoundarySet,
                        scale: tuple[float, float]) -> list[tuple[float, float]]:
    """Each border point of one image mapped to the closest border point of the
    other after scaling coordinates by the image size ratio; ties take the
    lowest index."""
    if len(b_from.points) == 0 or len(b_to.points) == 0:
        return []
    scaled = b_from.points * np.asarray(scale)
    d2 = ((scaled[:, None, :] - b_to.points[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argmin(d2, axis=1)
    return [tuple(b_to.points[k]) for k in nearest]


def dtm2(state: DtmState, ctx: PairContext) -> MatchSet:
    """Stage two: re-admit discarded matches consistent with survivor triangles.

    Walks the contraction history backwards; a candidate discarded at pulse j
    is re-added when, in both directions, its keypoint falls into a triangle
    whose vertices correspond to triangles containing the other keypoint.
    Scores are preserved from the input matching.
    """
    matches = state.matches
    final = list(state.final)
    if not final or state.boundaries is None:
        return MatchSet()
    b1, b2 = state.boundaries
    scale12 = (ctx.width2 / ctx.width1, ctx.height2 / ctx.height1)
    scale21 = (ctx.width1 / ctx.width2, ctx.height1 / ctx.height2)
    border_map_12 = _nearest_border_map(b1, b2, scale12)
    border_map_21 = _nearest_border_map(b2, b1, scale21)

    enhanced = set(final)
    n_pulses = len(state.iterations)
    for j in range(n_pulses - 1, 0, -1):
        if state.boundaries_per_iteration is not None:
            idx = min(j - 1, len(state.boundaries_per_iteration) - 1)
            b1, b2 = state.boundaries_per_iteration[idx]
            border_map_12 = _nearest_border_map(b1, b2, scale12)
            border_map_21 = _nearest_border_map(b2, b1, scale21)
        candidates = sorted(set(state.iterations[j - 1]) - set(state.iterations[j]))
        if not candidates:
            continue
        members = sorted(enhanced)
        side1 = _SideIndex(state.rounded1, members, b1.points)
        side2 = _SideIndex(state.rounded2, members, b2.points)
        if side1.tri is None or side2.tri is None:
            continue
        for g in members:
            side1.add_correspondence(tuple(state.rounded1[g]), tuple(state.rounded2[g]))
            side2.add_correspondence(tuple(state.rounded2[g]), tuple(state.rounded1[g]))

        loc1 = side1.tri.locate_many(state.rounded1[candidates])
        loc2 = side2.tri.locate_many(state.rounded2[candidates])

        def corresponding(side: _SideIndex, border_map, vertex: int):
            if vertex < side.n_cloud:
                return sorted(side.correspondences[vertex])
            return [border_map[vertex - side.n_cloud]] if border_map else []

        def admitted(side_a, loc, border_map, pa: np.ndarray, pb: np.ndarray) -> bool:
            if loc is None:
                return False
            tri_vertices = side_a.tri.triangles[loc]
            sets = [corresponding(side_a, border_map, int(v)) for v in tri_vertices]
            if any(not s for s in sets):
                return False
            px, py = float(pb[0]), float(pb[1])
            for a in sets[0]:
                for b in sets[1]:
                    for c in sets[2]:
                        if point_in_triangle(px, py, a[0], a[1], b[0], b[1], c[0], c[1]):
                            return True
            return False

        for k, g in enumerate(candidates):
            p1 = state.rounded1[g]
            p2 = state.rounded2[g]
            if admitted(side1, loc1[k], border_map_12, p1, p2) and admitted(
                side2, loc2[k], border_map_21, p2, p1
            ):
                enhanced.add(g)
                side1.add_correspondence(tuple(p1), tuple(p2))
                side2.add_correspondence(tuple(p2), tuple(p1))
    keep = sorted(enhanced)
    return MatchSet(matches[g] for g in keep)


def dtm(matches: MatchSet, ctx: PairContext, stage: str = "full",
        boundary_mode: str = "alpha", per_iteration_boundaries: bool = False) -> MatchSet:
    """Run DTM and return the filtered matches in input order.

    ``stage='dtm1_only'`` stops after the contraction stage; ``'full'`` also
    regrows coherent discarded matches.
    """
    if stage not in ("full", "dtm1_only"):
        raise ValueError(f"unknown stage {stage!r}")
    state = dtm1(matches, ctx, boundary_mode, per_iteration_boundaries)
    if stage == "dtm1_only":
        return MatchSet(matches[g] for g in state.final)
    return dtm2(state, ctx)


class DtmFilter(ParamsMixin):
    """Estimator-style wrapper around the DTM spatial filter."""

    def __init__(self, stage: str = "full", boundary_mode: str = "alpha",
                 per_iteration_boundaries: bool = False):
        self.stage = stage
        self.boundary_mode = boundary_mode
        self.per_iteration_boundaries = per_iteration_boundaries

    def filter_matches(self, matches: MatchSet, ctx: PairContext) -> MatchSet:
        return dtm(matches, ctx, self.stage, self.boundary_mode,
                   self.per_iteration_boundaries)

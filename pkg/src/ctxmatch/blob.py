"""Blob matching: rank pre-filtering, greedy many-to-many selection, NNR-style
scoring with geometric-inconsistency variants, and symmetric score combination.

The stages compose as prefilter -> greedy_select -> per-match scoring under
both reference images -> combine, producing a match multiset sorted ascending
by the combined score. Selection and score ORDER are invariant to rescaling
the distance matrix by any positive factor.
"""

from __future__ import annotations

import numpy as np

from .base import ParamsMixin
from .core import DistanceMatrix, Match, MatchSet, PairContext
from .model import ellipse_overlap_area

# rank sentinel that disables pre-filtering (keeps all n*m pairs)
OMEGA = "omega"

VARIANTS = ("nnr", "nnr_plus_ge", "nnr_plus")
FGINN_MODES = ("none", "pixels", "overlap")
COMBINERS = ("first", "second", "min", "max", "harmonic")

_FGINN_DEFAULTS = {"pixels": 10.0, "overlap": 0.75}


def _effective_rank(f, length: int) -> int:
    if f == OMEGA or f is None:
        return length
    return min(int(f), length)


def prefilter(dist: DistanceMatrix, f, mode: str = "union") -> np.ndarray:
    """Boolean mask of pairs ranked within the f best of their row and/or column.

    ``mode='intersection'`` requires both directions, ``'union'`` either.
    ``f=OMEGA`` (or None) keeps everything.
    """
    if mode not in ("intersection", "union"):
        raise ValueError(f"unknown prefilter mode {mode!r}")
    if f is not OMEGA and f is not None and int(f) < 1:
        raise ValueError("prefilter rank f must be >= 1")
    values = dist.values
    n, m = values.shape
    fr = _effective_rank(f, m)
    fc = _effective_rank(f, n)
    if fr >= m and fc >= n:
        return np.ones((n, m), dtype=bool)
    row_thresh = np.partition(values, fr - 1, axis=1)[:, fr - 1]
    col_thresh = np.partition(values, fc - 1, axis=0)[fc - 1, :]
    row_ok = values <= row_thresh[:, None]
    col_ok = values <= col_thresh[None, :]
    return (row_ok & col_ok) if mode == "intersection" else (row_ok | col_ok)


def greedy_select(dist: DistanceMatrix, mask: np.ndarray, f_prime: int = 1) -> MatchSet:
    """Greedy ascending-distance selection bounded by per-index multiplicity.

    Masked entries are visited in ascending value (ties by ascending row then
    column index); an entry is kept iff adding it leaves every row and column
    index used at most ``f_prime`` times. Scores of the result are the raw
    distances, so entries are ordered by insertion = ascending distance.
    """
    if f_prime < 1:
        raise ValueError("f_prime must be >= 1")
    values = dist.values
    if mask.shape != values.shape:
        raise ValueError("mask shape does not match distance matrix")
    ii, jj = np.nonzero(mask)
    if len(ii) == 0:
        return MatchSet()
    vals = values[ii, jj]
    order = np.lexsort((jj, ii, vals))
    n, m = values.shape
    row_used = np.zeros(n, dtype=np.int64)
    col_used = np.zeros(m, dtype=np.int64)
    rows_full = cols_full = 0
    picked = []
    for t in order:
        i = ii[t]
        j = jj[t]
        if row_used[i] < f_prime and col_used[j] < f_prime:
            picked.append(Match(int(i), int(j), float(vals[t])))
            row_used[i] += 1
            col_used[j] += 1
            if row_used[i] == f_prime:
                rows_full += 1
                if rows_full == n:
                    break
            if col_used[j] == f_prime:
                cols_full += 1
                if cols_full == m:
                    break
    return MatchSet(picked)


def combine(a: float, b: float, combiner: str = "harmonic") -> float:
    """Merge the two reference-image scores into one."""
    if combiner == "first":
        return a
    if combiner == "second":
        return b
    if combiner == "min":
        return min(a, b)
    if combiner == "max":
        return max(a, b)
    if combiner == "harmonic":
        s = a + b
        return 0.0 if s == 0 else 2.0 * a * b / s
    raise ValueError(f"unknown combiner {combiner!r}")


class _ReferenceScorer:
    """NNR-like scores of matches against one reference image.

    ``values`` has reference keypoints on rows and candidate keypoints on
    columns (pass the transposed matrix to swap the reference image, which
    keeps one code path and guarantees combiner symmetry).
    """

    def __init__(self, values: np.ndarray, variant: str, fginn: str, t_o: float | None,
                 cand_coords: np.ndarray | None, cand_ellipses: np.ndarray | None,
                 row_second: np.ndarray | None = None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown score variant {variant!r}")
        if fginn not in FGINN_MODES:
            raise ValueError(f"unknown fginn mode {fginn!r}")
        if fginn != "none":
            if t_o is None:
                t_o = _FGINN_DEFAULTS[fginn]
            if fginn == "pixels" and t_o < 0:
                raise ValueError("pixel fginn threshold must be >= 0")
            if fginn == "overlap" and not 0.0 <= t_o <= 1.0:
                raise ValueError("overlap fginn threshold must be in [0, 1]")
            if cand_coords is None:
                raise ValueError("fginn scoring needs candidate keypoint coordinates")
            if fginn == "overlap" and cand_ellipses is None:
                raise ValueError("overlap fginn needs ellipses on the candidate keypoints")
            if len(cand_coords) != values.shape[1]:
                raise ValueError("candidate keypoint count does not match the distance matrix")
        self.values = values
        self.variant = variant
        self.fginn = fginn
        self.t_o = t_o
        self.cand_coords = cand_coords
        self.cand_ellipses = cand_ellipses
        self.row_second = row_second  # optional per-row second-lowest, shared with prefilter
        self._sorted: dict[int, np.ndarray] = {}
        self._argsorted: dict[int, np.ndarray] = {}
        if fginn == "overlap":
            self._overlap_cache: dict[tuple[int, int], bool] = {}
            # conservative outer radii let far candidates skip grid sampling
            a = cand_ellipses[:, 0]
            b = cand_ellipses[:, 1]
            c = cand_ellipses[:, 2]
            lam_min = 0.5 * (a + b) - np.sqrt(0.25 * (a - b) ** 2 + c * c)
            self._outer_radius = 1.0 / np.sqrt(np.maximum(lam_min, 1e-300))

    # -- helpers -----------------------------------------------------------

    def _sorted_row(self, i: int) -> np.ndarray:
        sr = self._sorted.get(i)
        if sr is None:
            sr = np.sort(self.values[i])
            self._sorted[i] = sr
        return sr

    def _arg_row(self, i: int) -> np.ndarray:
        ar = self._argsorted.get(i)
        if ar is None:
            ar = np.argsort(self.values[i], kind="stable")
            self._argsorted[i] = ar
        return ar

    def _degenerate(self) -> float:
        # no admissible second value: worst in-range score, so the match ranks last
        return 1.0 if self.variant == "nnr" else 0.5

    def _is_far(self, k: int, j: int) -> bool:
        """Geometric admissibility of candidate k relative to candidate j."""
        if self.fginn == "pixels":
            d = self.cand_coords[k] - self.cand_coords[j]
            return float(d @ d) >= self.t_o * self.t_o
        key = (k, j) if k <= j else (j, k)
        cached = self._overlap_cache.get(key)
        if cached is not None:
            return cached
        d = self.cand_coords[k] - self.cand_coords[j]
        gap = np.hypot(d[0], d[1]) - self._outer_radius[k] - self._outer_radius[j]
        if gap >= 0:
            far = 1.0 >= self.t_o
        else:
            inter, union = ellipse_overlap_area(
                self.cand_coords[k], self.cand_ellipses[k],
                self.cand_coords[j], self.cand_ellipses[j],
            )
            err = 0.0 if union == 0 else 1.0 - inter / union
            far = err >= self.t_o
        self._overlap_cache[key] = far
        return far

    # -- variants ----------------------------------------------------------

    def _second_ge(self, i: int, j: int, dij: float) -> float | None:
        """Second lowest admissible value >= dij (the match itself counts first)."""
        if self.fginn == "none":
            sr = self._sorted_row(i)
            pos = int(np.searchsorted(sr, dij, side="left"))
            return float(sr[pos + 1]) if pos + 1 < len(sr) else None
        row = self.values[i]
        if self.fginn == "pixels":
            d = self.cand_coords - self.cand_coords[j]
            adm = (d * d).sum(axis=1) >= self.t_o * self.t_o
            adm &= row >= dij
            return float(row[adm].min()) if np.any(adm) else None
        # overlap: walk candidates in ascending value starting at dij
        sr = self._sorted_row(i)
        ar = self._arg_row(i)
        pos = int(np.searchsorted(sr, dij, side="left"))
        for t in range(pos, len(ar)):
            k = int(ar[t])
            if self._is_far(k, j):
                return float(sr[t])
        return None

    def _second_overall(self, i: int, j: int, dij: float) -> float | None:
        """Second lowest of {dij} union all admissible values (no >= restriction)."""
        if self.fginn == "none":
            sr = self._sorted_row(i)
            return float(sr[1]) if len(sr) >= 2 else None
        row = self.values[i]
        if self.fginn == "pixels":
            d = self.cand_coords - self.cand_coords[j]
            adm = (d * d).sum(axis=1) >= self.t_o * self.t_o
            vals = row[adm]
            if vals.size == 0:
                return None
            pool = np.concatenate(([dij], vals))
            return float(np.partition(pool, 1)[1])
        sr = self._sorted_row(i)
        ar = self._arg_row(i)
        found: list[float] = []
        for t in range(len(ar)):
            if self._is_far(int(ar[t]), j):
                found.append(float(sr[t]))
                if len(found) == 2:
                    break
        if not found:
            return None
        pool = sorted([dij] + found)
        return pool[1]

    def score(self, i: int, j: int) -> float:
        dij = float(self.values[i, j])
        if self.variant == "nnr":
            denom = self._second_ge(i, j, dij)
            if denom is None:
                return self._degenerate()
            return dij / denom if denom > 0 else 1.0
        if self.variant == "nnr_plus_ge":
            second = self._second_ge(i, j, dij)
        else:
            second = self._second_overall(i, j, dij)
        if second is None:
            return self._degenerate()
        denom = dij + second
        return dij / denom if denom > 0 else 0.5

    def score_many(self, ii: np.ndarray, jj: np.ndarray) -> np.ndarray:
        if self.variant == "nnr_plus" and self.fginn == "none":
            values = self.values
            if values.shape[1] < 2:
                return np.full(len(ii), 0.5)
            if self.row_second is not None:
                second = self.row_second[ii]
            else:
                # one partition pass covers every row of interest
                rows, inverse = np.unique(ii, return_inverse=True)
                second = np.partition(values[rows], 1, axis=1)[:, 1][inverse]
            dij = values[ii, jj]
            denom = dij + second
            out = np.divide(dij, denom, out=np.full(len(ii), 0.5), where=denom > 0)
            return out
        return np.array([self.score(int(i), int(j)) for i, j in zip(ii, jj)])


def nnr_score(dist: DistanceMatrix, match: Match, ctx: PairContext | None = None, *,
              variant: str = "nnr", fginn: str = "none", fginn_threshold: float | None = None,
              reference: str = "first_image") -> float:
    """NNR-like score of one match under the chosen reference image.

    ``variant='nnr'`` divides by the next admissible value >= the match
    distance; ``'nnr_plus_ge'`` divides by the match distance plus that value;
    ``'nnr_plus'`` divides by the match distance plus the second-lowest
    admissible value of the whole row. With ``fginn='pixels'`` admissible
    candidates lie at least ``fginn_threshold`` pixels from the matched
    keypoint; with ``'overlap'`` their patch overlap error must reach it.
    When no admissible second value exists the worst in-range score is
    returned (1.0 for 'nnr', 0.5 otherwise).
    """
    scorer = _make_scorers(dist, ctx, variant, fginn, fginn_threshold, [reference])[reference]
    if reference == "first_image":
        return float(scorer.score(match.i, match.j))
    return float(scorer.score(match.j, match.i))


def _make_scorers(dist: DistanceMatrix, ctx: PairContext | None, variant: str, fginn: str,
                  t_o: float | None, references, *, row_second=None,
                  col_second=None) -> dict[str, _ReferenceScorer]:
    coords1 = coords2 = ell1 = ell2 = None
    if fginn != "none":
        if ctx is None:
            raise ValueError("fginn scoring requires a PairContext")
        if len(ctx.keypoints1) != dist.n or len(ctx.keypoints2) != dist.m:
            raise ValueError("context keypoint counts do not match the distance matrix")
        coords1, coords2 = ctx.coords(1), ctx.coords(2)
        if fginn == "overlap":
            ell1, ell2 = ctx.ellipses(1), ctx.ellipses(2)
    scorers = {}
    for ref in references:
        if ref == "first_image":
            scorers[ref] = _ReferenceScorer(dist.values, variant, fginn, t_o,
                                            coords2, ell2, row_second)
        elif ref == "second_image":
            scorers[ref] = _ReferenceScorer(dist.values.T, variant, fginn, t_o,
                                            coords1, ell1, col_second)
        else:
            raise ValueError(f"unknown reference {ref!r}")
    return scorers


def _combine_arrays(a: np.ndarray, b: np.ndarray, combiner: str) -> np.ndarray:
    if combiner == "first":
        return a
    if combiner == "second":
        return b
    if combiner == "min":
        return np.minimum(a, b)
    if combiner == "max":
        return np.maximum(a, b)
    s = a + b
    return np.divide(2.0 * a * b, s, out=np.zeros_like(a), where=s > 0)


def blob_match(dist: DistanceMatrix, ctx: PairContext | None = None, *,
               f=OMEGA, f_mode: str = "union", f_prime: int = 1,
               variant: str = "nnr", fginn: str = "none",
               fginn_threshold: float | None = None,
               combiner: str = "first", ratio_threshold: float | None = None) -> MatchSet:
    """Full blob matching: prefilter, greedy selection, scoring, combination.

    Returns matches sorted ascending by the combined score (ties by index);
    if ``ratio_threshold`` is set, matches scoring above it are dropped.
    """
    if combiner not in COMBINERS:
        raise ValueError(f"unknown combiner {combiner!r}")
    if f_mode not in ("intersection", "union"):
        raise ValueError(f"unknown prefilter mode {f_mode!r}")
    if f is not OMEGA and f is not None and int(f) < 1:
        raise ValueError("prefilter rank f must be >= 1")
    values = dist.values
    n, m = values.shape
    fr = _effective_rank(f, m)
    fc = _effective_rank(f, n)
    need_second = variant == "nnr_plus" and fginn == "none"

    # fuse the prefilter rank thresholds and the second-lowest values used by
    # the plain sum-ratio scoring into one partition pass per axis
    row_second = col_second = row_thresh = col_thresh = None
    kth_rows = sorted({k for k in (1 if need_second and m >= 2 else None,
                                   fr - 1 if fr < m else None) if k is not None})
    if kth_rows:
        part = np.partition(values, kth_rows, axis=1)
        if need_second and m >= 2:
            row_second = part[:, 1]
        if fr < m:
            row_thresh = part[:, fr - 1]
    kth_cols = sorted({k for k in (1 if need_second and n >= 2 else None,
                                   fc - 1 if fc < n else None) if k is not None})
    if kth_cols:
        part = np.partition(values, kth_cols, axis=0)
        if need_second and n >= 2:
            col_second = part[1, :]
        if fc < n:
            col_thresh = part[fc - 1, :]

    if row_thresh is None and col_thresh is None:
        mask = np.ones((n, m), dtype=bool)
    else:
        row_ok = values <= row_thresh[:, None] if row_thresh is not None \
            else np.ones((n, m), dtype=bool)
        col_ok = values <= col_thresh[None, :] if col_thresh is not None \
            else np.ones((n, m), dtype=bool)
        mask = (row_ok & col_ok) if f_mode == "intersection" else (row_ok | col_ok)

    selected = greedy_select(dist, mask, f_prime)
    if len(selected) == 0:
        return selected
    scorers = _make_scorers(dist, ctx, variant, fginn, fginn_threshold,
                            ["first_image", "second_image"],
                            row_second=row_second, col_second=col_second)
    ii, jj, _ = selected.arrays()
    a = scorers["first_image"].score_many(ii, jj)
    b = scorers["second_image"].score_many(jj, ii)
    final = _combine_arrays(a, b, combiner)
    order = np.lexsort((jj, ii, final))
    out = []
    for t in order:
        s = float(final[t])
        if ratio_threshold is not None and s > ratio_threshold:
            continue
        out.append(Match(int(ii[t]), int(jj[t]), s))
    return MatchSet(out)


class BlobMatcher(ParamsMixin):
    """Configurable blob matcher with scikit-learn-style parameter handling.

    Defaults give the classic one-to-one greedy NNR matcher; the strongest
    configuration found in practice is ``BlobMatcher(f=10, f_mode='union',
    f_prime=5, variant='nnr_plus', fginn='overlap', fginn_threshold=0.75,
    combiner='harmonic')``.
    """

    def __init__(self, f=OMEGA, f_mode: str = "union", f_prime: int = 1,
                 variant: str = "nnr", fginn: str = "none",
                 fginn_threshold: float | None = None,
                 combiner: str = "first", ratio_threshold: float | None = None):
        self.f = f
        self.f_mode = f_mode
        self.f_prime = f_prime
        self.variant = variant
        self.fginn = fginn
        self.fginn_threshold = fginn_threshold
        self.combiner = combiner
        self.ratio_threshold = ratio_threshold

    def match(self, dist: DistanceMatrix, ctx: PairContext | None = None) -> MatchSet:
        return blob_match(
            dist, ctx,
            f=self.f, f_mode=self.f_mode, f_prime=self.f_prime,
            variant=self.variant, fginn=self.fginn,
            fginn_threshold=self.fginn_threshold,
            combiner=self.combiner, ratio_threshold=self.ratio_threshold,
        )

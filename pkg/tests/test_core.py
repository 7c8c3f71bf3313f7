import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from ctxmatch import (
    DistanceMatrix,
    Keypoint,
    Match,
    MatchSet,
    PairContext,
    compute_distance_matrix,
    kth_best,
)

# L1-normalize -> sqrt -> euclidean applied by hand to ((4,0), (1,1)):
# (1,0) and (0.5,0.5) -> (1,0) and (1/sqrt2, 1/sqrt2) -> sqrt(2 - sqrt2)
HELLINGER_4_0_VS_1_1 = 0.7653668647301795


class TestDistanceMatrix:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            DistanceMatrix([[1.0, -0.1]])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            DistanceMatrix([[np.inf, 1.0]])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            DistanceMatrix(np.empty((0, 3)))

    def test_immutable(self):
        d = DistanceMatrix([[1.0]])
        with pytest.raises((AttributeError, ValueError)):
            d.values[0, 0] = 2.0

    def test_shape(self):
        d = DistanceMatrix(np.ones((3, 5)))
        assert (d.n, d.m) == (3, 5)
        assert d.transposed().shape == (5, 3)


class TestComputeDistanceMatrix:
    def test_identity(self):
        d = compute_distance_matrix([(1.0, 0.0)], [(1.0, 0.0)], "euclidean")
        assert d.values[0, 0] == 0.0

    def test_orthogonal_unit_vectors(self):
        d = compute_distance_matrix([(1.0, 0.0)], [(0.0, 1.0)], "euclidean")
        assert d.values[0, 0] == pytest.approx(np.sqrt(2.0), abs=1e-12)

    def test_hellinger_scalar_oracle(self):
        d = compute_distance_matrix([(4.0, 0.0)], [(1.0, 1.0)], "hellinger")
        assert d.values[0, 0] == pytest.approx(HELLINGER_4_0_VS_1_1, abs=1e-12)

    def test_hellinger_rejects_negative(self):
        with pytest.raises(ValueError):
            compute_distance_matrix([(1.0, -1.0)], [(1.0, 1.0)], "hellinger")

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            compute_distance_matrix([(1.0, 0.0)], [(1.0, 0.0, 0.0)])

    def test_matches_pairwise_norms(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(4, 6))
        b = rng.normal(size=(5, 6))
        d = compute_distance_matrix(a, b)
        for i in range(4):
            for j in range(5):
                assert d.values[i, j] == pytest.approx(np.linalg.norm(a[i] - b[j]), abs=1e-9)


class TestKthBest:
    def test_row_minimum_matches_printed_example(self, fig_dist):
        assert kth_best(fig_dist, "row", 0, 1) == 1.0

    def test_column_second_best(self, fig_dist):
        # sort {2.5, 0.5, 3.5, 0.6, 3.4, 5.5, 6.0} by hand: 0.5, 0.6, ...
        assert kth_best(fig_dist, "column", 1, 2) == 0.6

    def test_extremal_rank_is_maximum(self, fig_dist):
        for i in range(fig_dist.n):
            assert kth_best(fig_dist, "row", i, fig_dist.m) == fig_dist.values[i].max()

    def test_out_of_range(self, fig_dist):
        with pytest.raises(ValueError):
            kth_best(fig_dist, "row", 0, 6)
        with pytest.raises(ValueError):
            kth_best(fig_dist, "row", 0, 0)

    @given(arrays(np.float64, array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=8),
                  elements=st.floats(0, 100)))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_k(self, values):
        d = DistanceMatrix(values)
        for i in range(d.n):
            row = [kth_best(d, "row", i, k) for k in range(1, d.m + 1)]
            assert row == sorted(row)
        for j in range(d.m):
            col = [kth_best(d, "column", j, k) for k in range(1, d.n + 1)]
            assert col == sorted(col)


class TestMatchSet:
    def test_insertion_order_preserved(self):
        ms = MatchSet([Match(0, 1, 0.5), Match(2, 3, 0.5), Match(1, 1, 0.5)])
        assert ms.pairs() == [(0, 1), (2, 3), (1, 1)]

    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), max_size=40))
    @settings(max_examples=60, deadline=None)
    def test_multiplicity_matches_exhaustive_recount(self, pairs):
        ms = MatchSet(Match(i, j, 0.0) for i, j in pairs)
        for idx in range(6):
            assert ms.row_count(idx) == sum(1 for i, _ in pairs if i == idx)
            assert ms.col_count(idx) == sum(1 for _, j in pairs if j == idx)

    def test_arrays_roundtrip(self):
        ms = MatchSet.from_arrays([3, 1], [0, 2], [0.2, 0.1])
        i, j, s = ms.arrays()
        assert list(i) == [3, 1] and list(j) == [0, 2]
        assert list(s) == [0.2, 0.1]


class TestKeypointAndContext:
    def test_ellipse_validation(self):
        with pytest.raises(ValueError):
            Keypoint(0, 0, ellipse=(1.0, 1.0, 1.5))
        Keypoint(0, 0, ellipse=(1.0, 2.0, 0.5))

    def test_non_finite_coordinates(self):
        with pytest.raises(ValueError):
            Keypoint(np.nan, 0.0)

    def test_context_dimension_validation(self):
        with pytest.raises(ValueError):
            PairContext((), (), 0, 10, 10, 10)

    def test_coords_cache(self):
        ctx = PairContext((Keypoint(1, 2),), (Keypoint(3, 4), Keypoint(5, 6)), 10, 10, 10, 10)
        assert ctx.coords(1).tolist() == [[1, 2]]
        assert ctx.coords(2).tolist() == [[3, 4], [5, 6]]
        assert ctx.ellipses(1) is None

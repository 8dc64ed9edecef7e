import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scvolterra.complex import (
    MaskPair,
    PairwiseKernel,
    Sc2,
    TupleKernel,
    check_sc_feasibility,
    default_masks,
    enumerate_triplet_groups,
    extract_sc2,
    group_index,
    kernels_from_sc2,
    tuple_col,
)


def triangle_h1(n=3, edges=((0, 1), (0, 2), (1, 2)), w=1.0):
    h1 = np.zeros((n, n))
    for i, j in edges:
        h1[i, j] = h1[j, i] = w
    return h1


class TestTupleCol:
    @pytest.mark.parametrize("i,j,n,expected", [(0, 0, 5, 0), (1, 3, 5, 8), (4, 4, 5, 24)])
    def test_examples(self, i, j, n, expected):
        assert tuple_col(i, j, n) == expected

    def test_bijective(self):
        n = 6
        cols = {tuple_col(i, j, n) for i in range(n) for j in range(n)}
        assert cols == set(range(n * n))

    @pytest.mark.parametrize("i,j", [(-1, 0), (0, 5), (5, 5)])
    def test_out_of_range(self, i, j):
        with pytest.raises(ValueError):
            tuple_col(i, j, 5)


class TestDefaultMasks:
    @staticmethod
    def brute_zero_count(n):
        # count ordered (k, i, j) with all three distinct
        return sum(
            1 for k, i, j in itertools.product(range(n), repeat=3) if len({k, i, j}) == 3
        )

    def test_n3_b2_zeros(self):
        m = default_masks(3)
        assert int((m.b2 == 0).sum()) == self.brute_zero_count(3) == 6

    def test_n3_b1_zeros(self):
        assert int((default_masks(3).b1 == 0).sum()) == 6

    def test_n4_b2_zeros(self):
        assert int((default_masks(4).b2 == 0).sum()) == self.brute_zero_count(4) == 24

    def test_pattern(self):
        n = 5
        m = default_masks(n)
        assert np.array_equal(m.b1, np.eye(n))
        for k, i, j in itertools.product(range(n), repeat=3):
            assert m.b2[k, tuple_col(i, j, n)] == int(i == j or i == k or j == k)

    @pytest.mark.parametrize("n", [0, 1, 2])
    def test_too_small(self, n):
        with pytest.raises(ValueError):
            default_masks(n)

    def test_read_only(self):
        m = default_masks(4)
        with pytest.raises(ValueError):
            m.b1[0, 1] = 1


class TestKernels:
    def test_pairwise_rejects_bad(self):
        with pytest.raises(ValueError):
            PairwiseKernel(-np.ones((3, 3)) + np.eye(3))
        with pytest.raises(ValueError):
            PairwiseKernel(np.eye(3))
        with pytest.raises(ValueError):
            PairwiseKernel(np.ones((3, 4)))
        a = np.zeros((3, 3))
        a[0, 1] = 1.0
        with pytest.raises(ValueError):
            PairwiseKernel(a, symmetric=True)
        PairwiseKernel(a)

    def test_tuple_rejects_degenerate(self):
        h2 = np.zeros((3, 9))
        h2[0, tuple_col(0, 1, 3)] = 1.0
        with pytest.raises(ValueError):
            TupleKernel(h2)

    def test_tuple_symmetry_flag(self):
        h2 = np.zeros((3, 9))
        h2[0, tuple_col(1, 2, 3)] = 1.0
        TupleKernel(h2)
        with pytest.raises(ValueError):
            TupleKernel(h2, tuple_symmetric=True)
        h2[0, tuple_col(2, 1, 3)] = 1.0
        TupleKernel(h2, tuple_symmetric=True)

    def test_immutable(self):
        k = PairwiseKernel(triangle_h1())
        with pytest.raises(ValueError):
            k.values[0, 1] = 3.0

    def test_mask_pair_validation(self):
        with pytest.raises(ValueError):
            MaskPair(np.eye(3), np.zeros((3, 8)))
        with pytest.raises(ValueError):
            MaskPair(2 * np.eye(3), np.zeros((3, 9)))


class TestGroups:
    def test_single_triple(self):
        (g,) = enumerate_triplet_groups(3)
        assert g.triplet == (0, 1, 2)
        assert len(g.h1_coords) == 6 and len(g.h2_coords) == 6

    @pytest.mark.parametrize("n", [5, 20])
    def test_count(self, n):
        assert len(enumerate_triplet_groups(n)) == comb(n, 3)

    def test_contents_and_order(self):
        n = 5
        groups = enumerate_triplet_groups(n)
        assert [g.triplet for g in groups] == list(itertools.combinations(range(n), 3))
        for g in groups:
            i, j, k = g.triplet
            assert set(g.h1_coords) == {(i, j), (j, i), (i, k), (k, i), (j, k), (k, j)}
            c = lambda a, b: tuple_col(a, b, n)  # noqa: E731
            assert set(g.h2_coords) == {
                (i, c(j, k)), (i, c(k, j)), (j, c(i, k)), (j, c(k, i)), (k, c(i, j)), (k, c(j, i)),
            }

    @settings(max_examples=15, deadline=None)
    @given(st.integers(3, 9))
    def test_coverage_counts(self, n):
        masks = default_masks(n)
        groups = enumerate_triplet_groups(n, masks)
        h1_count = np.zeros((n, n), dtype=int)
        h2_count = np.zeros((n, n * n), dtype=int)
        for g in groups:
            for rc in g.h1_coords:
                assert masks.b1[rc] == 0
                h1_count[rc] += 1
            for rc in g.h2_coords:
                assert masks.b2[rc] == 0
                h2_count[rc] += 1
        off = ~np.eye(n, dtype=bool)
        assert np.all(h1_count[off] == n - 2)
        assert np.all(h2_count[masks.b2 == 0] == 1)
        assert np.all(h2_count[masks.b2 == 1] == 0)

    def test_custom_mask_drops_coords(self):
        n = 4
        base = default_masks(n)
        b1 = base.b1.copy()
        b1[0, 1] = 1
        groups = enumerate_triplet_groups(n, MaskPair(b1, base.b2))
        assert all((0, 1) not in g.h1_coords for g in groups)
        gi = group_index(n, MaskPair(b1, base.b2))
        assert gi.flat.shape == (4, 12)
        assert (~gi.valid).sum() == 2  # (0,1) sat in groups 012 and 013

    def test_group_index_flat(self):
        n = 4
        gi = group_index(n)
        width = n + n * n
        g0 = enumerate_triplet_groups(n)[0]
        expected = [r * width + c for r, c in g0.h1_coords] + [r * width + n + c for r, c in g0.h2_coords]
        assert gi.flat[0].tolist() == expected

    def test_n_mismatch(self):
        with pytest.raises(ValueError):
            enumerate_triplet_groups(4, default_masks(5))


class TestSc2:
    def test_closure_enforced(self):
        with pytest.raises(ValueError):
            Sc2(3, {(0, 1): 1.0, (0, 2): 1.0}, {(0, 1, 2): 1.0})

    def test_keys_normalised(self):
        sc = Sc2(3, {(1, 0): 0.5, (2, 0): 1.0, (2, 1): 1.0}, {(2, 0, 1): 0.3})
        assert set(sc.edges) == {(0, 1), (0, 2), (1, 2)}
        assert set(sc.triangles) == {(0, 1, 2)}

    def test_rejects_bad_edges(self):
        with pytest.raises(ValueError):
            Sc2(3, {(0, 0): 1.0})
        with pytest.raises(ValueError):
            Sc2(3, {(0, 3): 1.0})

    def test_immutable(self):
        sc = Sc2(3, {(0, 1): 1.0})
        with pytest.raises(TypeError):
            sc.edges[(0, 2)] = 1.0


class TestFeasibility:
    def test_zero_h2(self):
        assert check_sc_feasibility(triangle_h1(), np.zeros((3, 9)), 1.0) == []
        assert check_sc_feasibility(np.zeros((3, 3)), np.zeros((3, 9)), 1.0) == []

    def test_triangle_present(self):
        h2 = np.zeros((3, 9))
        h2[0, tuple_col(1, 2, 3)] = 0.5
        assert check_sc_feasibility(triangle_h1(), h2, 1.0) == []

    def test_triangle_missing(self):
        h2 = np.zeros((3, 9))
        h2[0, tuple_col(1, 2, 3)] = 0.5
        h1 = triangle_h1(edges=((0, 1), (0, 2)))
        assert check_sc_feasibility(h1, h2, 1.0) == [(0, 1, 2)]

    def test_above_theta(self):
        h2 = np.zeros((3, 9))
        h2[0, tuple_col(1, 2, 3)] = 2.0
        assert check_sc_feasibility(triangle_h1(), h2, 1.0) == [(0, 1, 2)]

    def test_errors(self):
        with pytest.raises(ValueError):
            check_sc_feasibility(triangle_h1(), np.zeros((3, 8)), 1.0)
        with pytest.raises(ValueError):
            check_sc_feasibility(triangle_h1(), np.zeros((3, 9)), 0.0)


class TestExtract:
    def test_all_zero(self):
        sc = extract_sc2(np.zeros((4, 4)), np.zeros((4, 16)))
        assert not sc.edges and not sc.triangles

    def test_full_triangle(self):
        h2 = np.zeros((3, 9))
        h2[0, tuple_col(1, 2, 3)] = 0.9
        sc = extract_sc2(triangle_h1(), h2, 0.1, 0.1)
        assert set(sc.edges) == {(0, 1), (0, 2), (1, 2)}
        assert dict(sc.triangles) == {(0, 1, 2): 0.9}

    def test_closure_blocks_triangle(self):
        h2 = np.zeros((3, 9))
        h2[0, tuple_col(1, 2, 3)] = 0.9
        sc = extract_sc2(triangle_h1(edges=((0, 1), (0, 2))), h2, 0.1, 0.1)
        assert len(sc.edges) == 2 and not sc.triangles

    def test_max_weight(self):
        h1 = np.zeros((3, 3))
        h1[0, 1], h1[1, 0] = 0.2, 0.7
        assert extract_sc2(h1, np.zeros((3, 9))).edges[(0, 1)] == 0.7

    @settings(max_examples=60, deadline=None)
    @given(
        st.integers(3, 6).flatmap(
            lambda n: st.tuples(
                arrays(np.float64, (n, n), elements=st.floats(-1, 1)),
                arrays(np.float64, (n, n * n), elements=st.floats(-1, 1)),
                st.floats(0, 0.5),
                st.floats(0, 0.5),
            )
        )
    )
    def test_closure_on_arbitrary_input(self, args):
        h1, h2, te, tt = args
        sc = extract_sc2(h1, h2, te, tt)  # Sc2 validates closure on construction
        for i, j, k in sc.triangles:
            assert {(i, j), (i, k), (j, k)} <= set(sc.edges)

    def test_roundtrip_with_kernels(self):
        sc = Sc2(4, {(0, 1): 0.5, (0, 2): 0.4, (1, 2): 0.3, (2, 3): 0.6}, {(0, 1, 2): 0.2})
        h1, h2 = kernels_from_sc2(sc)
        back = extract_sc2(h1, h2)
        assert dict(back.edges) == dict(sc.edges)
        assert dict(back.triangles) == dict(sc.triangles)

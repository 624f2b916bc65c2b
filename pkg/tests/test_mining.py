import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dfmetric.losses import triplet_single
from dfmetric.mining import (
    EASY,
    HARD,
    SEMI_HARD,
    TripletIndex,
    categorize_from_distances,
    categorize_triplet,
    count_categories,
    pairwise_distances,
    select_all_extremes,
    select_anchor_extremes,
    valid_triplets,
)
from oracles import enumerate_triplets, naive_distances


def random_batch(seed, max_b=16, max_d=8, max_c=6):
    r = np.random.default_rng(seed)
    B = int(r.integers(2, max_b + 1))
    D = int(r.integers(1, max_d + 1))
    C = int(r.integers(2, max_c + 1))
    return r.normal(size=(B, D)), r.integers(0, C, size=B)


class TestPairwiseDistances:
    def test_identical_rows(self):
        assert np.all(pairwise_distances(np.ones((4, 3))) == 0)

    def test_1d(self):
        np.testing.assert_array_equal(pairwise_distances([0.0, 1.0, 3.0]), [[0, 1, 3], [1, 0, 2], [3, 2, 0]])

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_double_loop(self, seed):
        x, _ = random_batch(seed)
        np.testing.assert_allclose(pairwise_distances(x), naive_distances(x), rtol=0, atol=1e-12)

    @settings(max_examples=50)
    @given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 6)), elements=st.floats(-50, 50)))
    def test_metric_properties(self, x):
        d = pairwise_distances(x)
        assert np.array_equal(d, d.T)
        assert np.all(np.diag(d) == 0) and np.all(d >= 0)
        tri = d[:, None, :] <= d[:, :, None] + d[None, :, :] + 1e-9
        assert tri.all()


class TestValidTriplets:
    def test_examples(self):
        assert valid_triplets([0, 1]) == []
        assert valid_triplets([0, 0, 1]) == [(0, 1, 2), (1, 0, 2)]
        assert len(valid_triplets([0, 0, 1, 1])) == 8

    def test_single_class(self):
        assert valid_triplets([2, 2, 2]) == []

    @given(st.lists(st.integers(0, 4), min_size=1, max_size=14))
    def test_count_formula(self, labels):
        counts = np.bincount(labels)
        B = len(labels)
        expected = sum(int(n) * (int(n) - 1) * (B - int(n)) for n in counts)
        got = valid_triplets(labels)
        assert len(got) == expected
        assert got == sorted(got)
        assert [tuple(t) for t in got] == enumerate_triplets(labels)


class TestCategorize:
    D = np.array([[0.0, 1.0, 3.0, 1.2, 0.5], [1, 0, 0, 0, 0], [3, 0, 0, 0, 0], [1.2, 0, 0, 0, 0], [0.5, 0, 0, 0, 0]])

    def test_examples(self):
        assert categorize_triplet(self.D, TripletIndex(0, 1, 2), 0.5) == EASY
        assert categorize_triplet(self.D, TripletIndex(0, 1, 3), 0.5) == SEMI_HARD
        assert categorize_triplet(self.D, TripletIndex(0, 1, 4), 0.5) == HARD

    def test_equality_boundary_is_semi_hard(self):
        assert categorize_from_distances(1.0, 1.0, 0.5) == SEMI_HARD
        assert categorize_from_distances(1.0, 1.0, 0.0) == EASY

    @given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 3))
    def test_partition_and_loss(self, d_ap, d_an, m):
        cat = categorize_from_distances(d_ap, d_an, m)
        assert cat in (EASY, SEMI_HARD, HARD)
        assert (triplet_single(d_ap, d_an, m) == 0) == (cat == EASY)

    @pytest.mark.parametrize("seed", range(10))
    def test_counts_match_enumeration(self, seed):
        x, y = random_batch(seed)
        d = pairwise_distances(x)
        tally = {EASY: 0, SEMI_HARD: 0, HARD: 0}
        for t in valid_triplets(y):
            tally[categorize_triplet(d, t, 0.3)] += 1
        assert count_categories(d, y, 0.3) == tally


class TestAnchorExtremes:
    def test_example(self):
        d = pairwise_distances([0.0, 1.0, 3.0, 4.0, 5.0])
        sel = select_anchor_extremes(d, [0, 0, 0, 1, 1], 1)
        assert (sel.hard_positive, sel.easy_positive, sel.hard_negative) == (2, 0, 3)

    def test_single_positive(self):
        d = pairwise_distances([0.0, 1.0, 3.0])
        sel = select_anchor_extremes(d, [0, 0, 1], 0)
        assert sel.hard_positive == sel.easy_positive == 1

    def test_tie_lowest_index(self):
        d = pairwise_distances([0.0, 1.0, -2.0, 2.0])
        sel = select_anchor_extremes(d, [0, 0, 1, 1], 0)
        assert sel.hard_negative == 2

    def test_no_peers(self):
        d = pairwise_distances([0.0, 1.0])
        sel = select_anchor_extremes(d, [0, 1], 0)
        assert sel.hard_positive is None and sel.easy_positive is None and sel.hard_negative == 1

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_enumeration(self, seed):
        r = np.random.default_rng(seed)
        # integer coordinates force ties
        x = r.integers(0, 4, size=(12, 1)).astype(float)
        y = r.integers(0, 3, size=12)
        d = naive_distances(x)
        hp, ep, hn, ok = select_all_extremes(pairwise_distances(x), y)
        for a in range(12):
            pos = [j for j in range(12) if j != a and y[j] == y[a]]
            neg = [k for k in range(12) if y[k] != y[a]]
            sel = select_anchor_extremes(pairwise_distances(x), y, a)
            exp_hp = min(pos, key=lambda j: (-d[a][j], j)) if pos else None
            exp_ep = min(pos, key=lambda j: (d[a][j], j)) if pos else None
            exp_hn = min(neg, key=lambda k: (d[a][k], k)) if neg else None
            assert (sel.hard_positive, sel.easy_positive, sel.hard_negative) == (exp_hp, exp_ep, exp_hn)
            assert ok[a] == bool(pos and neg)
            if ok[a]:
                assert (hp[a], ep[a], hn[a]) == (exp_hp, exp_ep, exp_hn)

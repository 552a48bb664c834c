from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvlab.combinatorics import inclusion_probability, pmf_unseen_count
from cvlab.core import DivisibilityError, DomainError
from cvlab.resampling import (
    BootstrapReplicate,
    SamplingModel,
    bootstrap_counts_matrix,
    bootstrap_replicate,
    bootstrap_replicates,
    decode_stars_and_bars,
    derive_rng,
    derive_seed,
    enumerate_multiset_counts,
    make_partition,
    pair_oob_indicators,
    repeated_partitions,
)


class TestMakePartition:
    def test_contiguous_blocks(self):
        assert list(make_partition(6, 3).assign) == [1, 1, 2, 2, 3, 3]

    def test_loo_special_case(self):
        assert list(make_partition(4, 4).assign) == [1, 2, 3, 4]

    def test_with_permutation(self):
        # assign(i) is the canonical fold of perm(i), computed by hand
        assert list(make_partition(4, 2, [3, 1, 4, 2]).assign) == [2, 1, 2, 1]

    def test_divisibility_enforced(self):
        with pytest.raises(DivisibilityError):
            make_partition(7, 3)

    def test_bad_permutation(self):
        with pytest.raises(DomainError):
            make_partition(4, 2, [1, 1, 2, 3])
        with pytest.raises(DomainError):
            make_partition(4, 2, [1, 2, 3])

    @given(st.integers(min_value=1, max_value=10), st.integers(min_value=1, max_value=6))
    def test_preimages_are_equal_blocks(self, folds, size):
        n = folds * size
        rng = np.random.default_rng(n)
        perm = list(rng.permutation(n) + 1)
        pm = make_partition(n, folds, perm)
        seen = []
        for k in range(1, folds + 1):
            members = pm.fold_members(k)
            assert members.size == size
            seen.extend(members.tolist())
        assert sorted(seen) == list(range(n))


class TestRepeatedPartitions:
    def test_fold_sizes(self):
        rp = repeated_partitions(6, 3, 1, seed=11)
        assert all(rp.maps[0].fold_members(k).size == 2 for k in (1, 2, 3))

    def test_deterministic(self):
        a = repeated_partitions(6, 3, 50, seed=5)
        b = repeated_partitions(6, 3, 50, seed=5)
        for ma, mb in zip(a.maps, b.maps):
            np.testing.assert_array_equal(ma.assign, mb.assign)

    def test_seed_changes_maps(self):
        a = repeated_partitions(8, 2, 4, seed=1)
        b = repeated_partitions(8, 2, 4, seed=2)
        assert any(
            not np.array_equal(ma.assign, mb.assign) for ma, mb in zip(a.maps, b.maps)
        )

    def test_loo_shuffles_are_relabeled_singletons(self):
        rp = repeated_partitions(6, 6, 3, seed=3)
        for pm in rp.maps:
            for k in range(1, 7):
                assert pm.fold_members(k).size == 1


class TestStarsAndBars:
    def test_decode_is_bijective_for_small_n(self):
        for n in (2, 3, 4, 5):
            seen = Counter(tuple(c) for c in enumerate_multiset_counts(n))
            import math

            assert len(seen) == math.comb(2 * n - 1, n)
            assert set(seen.values()) == {1}
            for counts in seen:
                assert sum(counts) == n

    def test_decode_example(self):
        # subset {0,1,2} of {0..4} is the multiset {0,0,0}
        assert list(decode_stars_and_bars([0, 1, 2], 3)) == [3, 0, 0]
        # subset {0,2,4} decodes to one copy of each index
        assert list(decode_stars_and_bars([0, 2, 4], 3)) == [1, 1, 1]


class TestBootstrapSampling:
    def test_counts_shape_and_sum(self):
        counts = bootstrap_counts_matrix(7, 25, SamplingModel.ORDERED, seed=1)
        assert counts.shape == (25, 7)
        assert (counts.sum(axis=1) == 7).all()

    def test_single_draw_matches_first_batch_row(self):
        for model in SamplingModel:
            single = bootstrap_replicate(9, model, seed=42)
            batch = bootstrap_counts_matrix(9, 5, model, seed=42)
            np.testing.assert_array_equal(single.counts, batch[0])

    def test_replicate_invariants(self):
        reps = bootstrap_replicates(6, 200, SamplingModel.UNORDERED_MULTISET, seed=3)
        for rep in reps:
            assert rep.counts.sum() == 6
            assert 0 <= rep.unseen_count <= 5
            np.testing.assert_array_equal(rep.oob, rep.counts == 0)

    def test_small_n_rejected(self):
        with pytest.raises(DomainError):
            bootstrap_replicate(1, SamplingModel.ORDERED, seed=0)

    def test_bad_counts_rejected(self):
        with pytest.raises(DomainError):
            BootstrapReplicate(np.array([2, 2]))  # sums to 4, n = 2

    def test_multiset_unseen_pmf_concordance(self):
        # Pr[a_b = 1] for n = 3 is exactly 6/10 under the multiset model
        counts = bootstrap_counts_matrix(3, 100_000, SamplingModel.UNORDERED_MULTISET, seed=7)
        unseen = (counts == 0).sum(axis=1)
        p = float(pmf_unseen_count(3, 3, 1))
        se = (p * (1 - p) / 100_000) ** 0.5
        assert abs((unseen == 1).mean() - p) < 3 * se

    def test_ordered_all_seen_probability(self):
        # Pr[a_b = 0] for n = 3 ordered draws is 3!/3^3 = 6/27
        counts = bootstrap_counts_matrix(3, 100_000, SamplingModel.ORDERED, seed=8)
        p = 6 / 27
        se = (p * (1 - p) / 100_000) ** 0.5
        assert abs(((counts == 0).sum(axis=1) == 0).mean() - p) < 3 * se

    def test_ordered_oob_rate(self):
        # Pr[observation 0 unseen] -> (1 - 1/n)^n
        n = 10
        counts = bootstrap_counts_matrix(n, 100_000, SamplingModel.ORDERED, seed=9)
        p = (1 - 1 / n) ** n
        se = (p * (1 - p) / 100_000) ** 0.5
        assert abs((counts[:, 0] == 0).mean() - p) < 3 * se

    def test_multiset_inclusion_probability(self):
        # Pr[observation 0 appears] = n/(2n-1)
        n = 10
        counts = bootstrap_counts_matrix(n, 100_000, SamplingModel.UNORDERED_MULTISET, seed=10)
        p = float(inclusion_probability(n))
        se = (p * (1 - p) / 100_000) ** 0.5
        assert abs((counts[:, 0] > 0).mean() - p) < 3 * se


class TestPairOob:
    def test_outer_product(self):
        rep1 = BootstrapReplicate(np.array([0, 2]))
        rep2 = BootstrapReplicate(np.array([2, 0]))
        np.testing.assert_array_equal(
            pair_oob_indicators(rep1, rep2), np.array([[0, 1], [0, 0]])
        )

    def test_all_in_bag_gives_zero_matrix(self):
        rep1 = BootstrapReplicate(np.array([1, 1]))
        rep2 = BootstrapReplicate(np.array([1, 1]))
        assert pair_oob_indicators(rep1, rep2).sum() == 0

    def test_degenerate_single_observation_pair(self):
        # n = 2 replicates with one oob index each give a 2x2 one-hot matrix
        rep1 = BootstrapReplicate(np.array([2, 0]))
        rep2 = BootstrapReplicate(np.array([0, 2]))
        np.testing.assert_array_equal(
            pair_oob_indicators(rep1, rep2), np.array([[0, 0], [1, 0]])
        )


class TestSeedDerivation:
    def test_streams_are_stable(self):
        a = derive_rng(1, "stream", 0).integers(0, 1 << 30, 4)
        b = derive_rng(1, "stream", 0).integers(0, 1 << 30, 4)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ_by_tag_and_counter(self):
        base = derive_rng(1, "stream", 0).integers(0, 1 << 30, 4)
        other_tag = derive_rng(1, "maerts", 0).integers(0, 1 << 30, 4)
        other_counter = derive_rng(1, "stream", 1).integers(0, 1 << 30, 4)
        assert not np.array_equal(base, other_tag)
        assert not np.array_equal(base, other_counter)

    def test_derive_seed_is_deterministic(self):
        assert derive_seed(9, "x", 2) == derive_seed(9, "x", 2)
        assert derive_seed(9, "x", 2) != derive_seed(9, "x", 3)

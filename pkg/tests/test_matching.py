"""Deferred acceptance, swap search, and the exhaustive oracle."""
import numpy as np
import pytest

from fogcoop.harness import random_cluster_instance
from fogcoop.matching import (ClusterProblem, Matching, build_cluster_problem,
                              deferred_acceptance, exhaustive_rb_search,
                              find_improving_swap, preference_lists,
                              rb_utility, swap_matching, vue_utility,
                              OracleTooLargeError)


def toy_problem(rates, bits=None, fronthaul=None, node=1):
    rates = np.asarray(rates, dtype=float)
    m = rates.shape[0]
    bits = np.full(m, 1000.0) if bits is None else np.asarray(bits, dtype=float)
    fh = np.zeros(m) if fronthaul is None else np.asarray(fronthaul, dtype=float)
    return ClusterProblem(node=node, uploaders=list(range(m)), bits=bits,
                          fronthaul=fh, free_rates=rates.copy(), rates=rates.copy())


class TestUtilities:
    def test_vue_utility_ranks_by_rate(self):
        prob = toy_problem([[3.0, 1.0, 2.0]])
        utils = [vue_utility(0, s, prob) for s in range(3)]
        assert np.argsort(utils)[::-1].tolist() == [0, 2, 1]

    def test_identical_rates_equal_utilities(self):
        prob = toy_problem([[2.0, 2.0, 2.0]])
        assert len({vue_utility(0, s, prob) for s in range(3)}) == 1

    def test_utility_ratio_from_sinrs(self):
        # SINRs 3 and 1 with unit bandwidth: rates log2(4) and log2(2).
        prob = toy_problem([[np.log2(4.0), np.log2(2.0)]])
        assert vue_utility(0, 0, prob) / vue_utility(0, 1, prob) == pytest.approx(2.0)

    def test_rb_utility_latency_contribution(self):
        # 10 blocks x 6400 bits at 10 Mb/s -> 6.4 ms
        prob = toy_problem([[10e6]], bits=[64000.0])
        assert rb_utility(0, 0, prob) == pytest.approx(0.0064)

    def test_cloud_mode_adds_fronthaul(self):
        prob = toy_problem([[10e6]], bits=[64000.0], fronthaul=[0.012], node=0)
        assert rb_utility(0, 0, prob) == pytest.approx(0.0184)


class TestDeferredAcceptance:
    def test_single_pair(self):
        m = deferred_acceptance({5: [0]}, {0: {5: 0}})
        assert m.rb_of == {5: 0}
        assert m.unmatched == []

    def test_contested_rb_goes_to_preferred_vue(self):
        # Both VUEs want RB 0; RB 0 prefers VUE 2, so VUE 1 settles for RB 1.
        prefs = {1: [0, 1], 2: [0, 1]}
        ranks = {0: {1: 1, 2: 0}, 1: {1: 0, 2: 1}}
        m = deferred_acceptance(prefs, ranks)
        assert m.rb_of == {2: 0, 1: 1}

    def test_disjoint_top_choices(self):
        prefs = {0: [2, 0, 1], 1: [1, 0, 2], 2: [0, 1, 2]}
        ranks = {s: {k: k for k in range(3)} for s in range(3)}
        m = deferred_acceptance(prefs, ranks)
        assert m.rb_of == {0: 2, 1: 1, 2: 0}

    def test_surplus_vues_stay_unmatched(self):
        prefs = {k: [0] for k in range(3)}
        ranks = {0: {0: 2, 1: 0, 2: 1}}
        m = deferred_acceptance(prefs, ranks)
        assert m.rb_of == {1: 0}
        assert m.unmatched == [0, 2]

    def test_displacement_keeps_best_seen(self):
        # VUE 3 holds RB 0 after round one, but RB 0 prefers VUE 7, who
        # proposes later after being rejected at RB 1: 7 displaces 3.
        prefs = {3: [0, 1], 9: [1], 7: [1, 0]}
        ranks = {0: {3: 1, 7: 0, 9: 2}, 1: {3: 2, 7: 1, 9: 0}}
        m = deferred_acceptance(prefs, ranks)
        assert m.rb_of == {9: 1, 7: 0}
        assert m.unmatched == [3]


class TestFindImprovingSwap:
    def test_single_vue_no_pair(self):
        prob = toy_problem([[1.0, 2.0]])
        m = Matching()
        m.match(0, 0)
        assert find_improving_swap(m, prob) is None

    def test_improving_pair_found(self):
        # VUE 0 slow on RB 0 but fast on RB 1, VUE 1 fine on both:
        # swapping strictly lowers the bottleneck.
        prob = toy_problem([[1e3, 1e6], [1e6, 1e6]])
        m = Matching()
        m.match(0, 0)
        m.match(1, 1)
        assert find_improving_swap(m, prob) == (0, 1)
        m.swap(0, 1)
        assert find_improving_swap(m, prob) is None

    def test_tie_is_not_improvement(self):
        prob = toy_problem([[1e6, 1e6], [1e6, 1e6]])
        m = Matching()
        m.match(0, 0)
        m.match(1, 1)
        assert find_improving_swap(m, prob) is None


class TestSwapMatching:
    def test_empty_cluster(self):
        world, rcfg, alloc, channels, node = random_cluster_instance(2, 3, seed=0)
        alloc.blocks[:2, :] = 0  # nobody uploads
        matching, iters = swap_matching(node, alloc, channels, world, rcfg)
        assert matching.rb_of == {} and iters == 0
        assert alloc.rbs[:2].sum() == 0

    def test_matching_invariants_and_rb_rows(self):
        for seed in range(10):
            world, rcfg, alloc, channels, node = random_cluster_instance(
                5, 6, seed=seed, external=2)
            matching, _ = swap_matching(node, alloc, channels, world, rcfg)
            matching.validate()
            assert sorted(matching.rb_of) == list(range(5))
            for k, s in matching.rb_of.items():
                assert alloc.rbs[k, s] == 1 and alloc.rbs[k].sum() == 1

    def test_no_improving_swap_remains(self):
        for seed in range(10):
            world, rcfg, alloc, channels, node = random_cluster_instance(
                6, 6, seed=100 + seed, external=3)
            matching, _ = swap_matching(node, alloc, channels, world, rcfg)
            problem = build_cluster_problem(node, alloc, channels, world, rcfg)
            assert find_improving_swap(matching, problem) is None

    def test_never_beats_exhaustive_and_usually_matches(self):
        gaps = []
        for seed in range(30):
            world, rcfg, alloc, channels, node = random_cluster_instance(
                4, 4, seed=200 + seed, external=2)
            matching, _ = swap_matching(node, alloc, channels, world, rcfg)
            problem = build_cluster_problem(node, alloc, channels, world, rcfg)
            achieved = problem.bottleneck(matching)
            _, best = exhaustive_rb_search(problem)
            assert achieved >= best - 1e-15
            gaps.append(achieved / best - 1.0)
        assert np.median(gaps) <= 0.10

    def test_k12_converges_quickly(self):
        world, rcfg, alloc, channels, node = random_cluster_instance(12, 12, seed=77)
        _, iters = swap_matching(node, alloc, channels, world, rcfg)
        assert iters <= 10

    def test_bottleneck_non_increasing_over_swaps(self):
        world, rcfg, alloc, channels, node = random_cluster_instance(
            6, 6, seed=31, external=2)
        problem = build_cluster_problem(node, alloc, channels, world, rcfg)
        vue_prefs, rb_rank = preference_lists(problem)
        matching = deferred_acceptance(vue_prefs, rb_rank)
        values = [problem.bottleneck(matching)]
        while (pair := find_improving_swap(matching, problem)) is not None:
            matching.swap(*pair)
            values.append(problem.bottleneck(matching))
            assert len(values) < 500
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_sum_rate_criterion_differs_only_in_swaps(self):
        import copy
        world, rcfg, alloc, channels, node = random_cluster_instance(
            5, 5, seed=55, external=3)
        alloc_b = copy.deepcopy(alloc)
        m1, _ = swap_matching(node, alloc, channels, world, rcfg, "bottleneck")
        m2, _ = swap_matching(node, alloc_b, channels, world, rcfg, "sum-rate")
        problem = build_cluster_problem(node, alloc, channels, world, rcfg)
        sum1 = sum(problem.rates[problem.index[k], s] for k, s in m1.rb_of.items())
        sum2 = sum(problem.rates[problem.index[k], s] for k, s in m2.rb_of.items())
        assert sum2 >= sum1 - 1e-9
        assert problem.bottleneck(m1) <= problem.bottleneck(m2) + 1e-15


class TestExhaustive:
    def test_single_vue_picks_best_rb(self):
        prob = toy_problem([[1e5, 2e5]])
        matching, value = exhaustive_rb_search(prob)
        assert matching.rb_of == {0: 1}
        assert value == pytest.approx(1000.0 / 2e5)

    def test_enumeration_count_three_by_three(self):
        # 3 VUEs on 3 RBs enumerate 3! = 6 assignments; brute-force the
        # minimum bottleneck independently.
        rng = np.random.default_rng(4)
        rates = rng.uniform(1e5, 1e6, (3, 3))
        prob = toy_problem(rates)
        _, value = exhaustive_rb_search(prob)
        from itertools import permutations
        best = min(max(prob.terms[i, p[i]] for i in range(3))
                   for p in permutations(range(3)))
        assert value == pytest.approx(best)

    def test_refuses_above_cap(self):
        prob = toy_problem(np.ones((9, 9)))
        with pytest.raises(OracleTooLargeError):
            exhaustive_rb_search(prob)

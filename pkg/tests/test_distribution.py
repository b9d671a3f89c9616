import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rootedtrees import (
    AbsoluteContinuityError,
    NodeParam,
    RecursionStats,
    RootedSubtree,
    TreeDistribution,
    TreeShape,
    TreeStructureError,
    UniformRule,
    ZeroConditionError,
    enumerate_subtrees,
    generic_sum,
    normalization_sum,
)
from rootedtrees import oracle
from rootedtrees.verify import random_distribution, random_node_function

SHAPE22 = TreeShape(2, 2)


def point_mass(k_max, pattern):
    probs = np.zeros(1 << k_max)
    probs[pattern] = 1.0
    return NodeParam.from_probs(probs)


def deterministic_dist():
    # support = the single tree {root: "10", (0,): "00"}
    return TreeDistribution(
        SHAPE22,
        UniformRule(),
        {(): point_mass(2, 1), (0,): point_mass(2, 0)},
    )


class TestNodeParam:
    def test_renormalizes_within_tolerance(self):
        param = NodeParam.from_probs([0.25, 0.25, 0.25, 0.25 + 5e-10])
        assert param.probs.sum() == 1.0

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError, match="sum"):
            NodeParam.from_probs([0.5, 0.5, 0.1, 0.0])

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            NodeParam.from_probs([1.1, -0.1, 0.0, 0.0])

    def test_rejects_bad_length(self):
        with pytest.raises(ValueError):
            NodeParam.from_probs([0.5, 0.3, 0.2])

    def test_leaf_override_must_be_delta(self):
        with pytest.raises(ValueError, match="zero pattern"):
            TreeDistribution(
                SHAPE22, UniformRule(), {(0, 0): point_mass(2, 1)}
            )


class TestLogProb:
    def test_root_only_single_factor(self):
        dist = TreeDistribution(
            SHAPE22,
            UniformRule(),
            {(): NodeParam.from_probs([0.6, 0.2, 0.1, 0.1])},
        )
        tree = RootedSubtree({(): 0})
        assert dist.log_prob(tree) == pytest.approx(math.log(0.6), abs=1e-15)

    def test_full_tree_rule_closed_form(self):
        # per-node spreading probabilities alpha; a subtree's probability is
        # the product of alpha over its branching nodes and (1 - alpha) over
        # its stopped nodes above the maximum depth
        alphas = {(): 0.7, (0,): 0.6, (1,): 0.55}
        overrides = {
            addr: NodeParam.from_probs(
                [1 - a] + [0.0] * 2 + [a]
            )
            for addr, a in alphas.items()
        }
        dist = TreeDistribution(SHAPE22, None, overrides)
        full = RootedSubtree(
            {(): 3, (0,): 3, (1,): 3, (0, 0): 0, (0, 1): 0, (1, 0): 0, (1, 1): 0}
        )
        assert dist.log_prob(full) == pytest.approx(
            math.log(0.7 * 0.6 * 0.55), abs=1e-12
        )
        stopped = RootedSubtree({(): 3, (0,): 0, (1,): 0})
        assert dist.log_prob(stopped) == pytest.approx(
            math.log(0.7 * 0.4 * 0.45), abs=1e-12
        )

    def test_total_mass_by_enumeration(self, rng, trees_2_2):
        for _ in range(10):
            dist = random_distribution(SHAPE22, rng)
            total = sum(math.exp(dist.log_prob(t)) for t in trees_2_2)
            assert total == pytest.approx(1.0, abs=1e-10)

    def test_zero_factor_gives_minus_inf(self):
        dist = deterministic_dist()
        assert dist.log_prob(RootedSubtree({(): 0})) == -math.inf

    def test_invalid_tree_raises(self):
        dist = TreeDistribution(SHAPE22, UniformRule())
        with pytest.raises(TreeStructureError):
            dist.log_prob(RootedSubtree({(): 1}))


class TestGenericSum:
    def test_counts_subtrees(self):
        assert generic_sum(SHAPE22, lambda a, z: 1.0) == pytest.approx(25.0)
        assert generic_sum(TreeShape(3, 2), lambda a, z: 1.0) == pytest.approx(729.0)

    def test_theta_sums_to_one(self, rng):
        for shape in [SHAPE22, TreeShape(3, 2), TreeShape(1, 3)]:
            dist = random_distribution(shape, rng)
            assert normalization_sum(dist) == pytest.approx(1.0, abs=1e-12)

    def test_scaled_theta_against_enumeration(self, rng, trees_2_2):
        dist = random_distribution(SHAPE22, rng)
        c = 1.7
        got = generic_sum(SHAPE22, lambda a, z: dist.param_at(a).probs[z] * c)
        want = sum(
            math.exp(dist.log_prob(t)) * c ** len(t.nodes) for t in trees_2_2
        )
        assert got == pytest.approx(want, abs=1e-10)


class TestMarginals:
    def test_root_pattern_event_is_theta(self, rng):
        dist = random_distribution(SHAPE22, rng)
        for z in range(4):
            assert dist.pattern_event_prob((), z) == pytest.approx(
                float(dist.param_at(()).probs[z]), abs=1e-15
            )

    def test_pattern_event_against_enumeration(self, rng):
        dist = random_distribution(SHAPE22, rng)
        for addr in SHAPE22.addresses():
            for z in range(4):
                want = oracle.pattern_event_probability(dist, addr, z)
                assert dist.pattern_event_prob(addr, z) == pytest.approx(
                    want, abs=1e-10
                )

    def test_leaf_depth_set_bit_is_zero(self, rng):
        dist = random_distribution(SHAPE22, rng)
        assert dist.pattern_event_prob((0, 0), 1) == 0.0

    def test_node_prob_root_is_one(self, rng):
        dist = random_distribution(SHAPE22, rng)
        assert dist.node_prob(()) == 1.0

    def test_leaf_plus_inner_equals_node(self, rng):
        dist = random_distribution(SHAPE22, rng)
        for addr in SHAPE22.addresses():
            assert dist.leaf_prob(addr) + dist.inner_prob(addr) == pytest.approx(
                dist.node_prob(addr), abs=1e-12
            )

    def test_all_event_probs_against_enumeration(self, rng, trees_2_2):
        for _ in range(5):
            dist = random_distribution(SHAPE22, rng)
            for addr in SHAPE22.addresses():
                assert dist.node_prob(addr) == pytest.approx(
                    oracle.event_probability(dist, lambda t: addr in t, trees_2_2),
                    abs=1e-10,
                )
                assert dist.leaf_prob(addr) == pytest.approx(
                    oracle.event_probability(
                        dist,
                        lambda t: addr in t and t.pattern_at(addr) == 0,
                        trees_2_2,
                    ),
                    abs=1e-10,
                )
                assert dist.inner_prob(addr) == pytest.approx(
                    oracle.event_probability(
                        dist,
                        lambda t: addr in t and t.pattern_at(addr) != 0,
                        trees_2_2,
                    ),
                    abs=1e-10,
                )
                if addr:
                    # the edge into a node is present exactly when the node is
                    assert dist.edge_prob(addr) == pytest.approx(
                        dist.node_prob(addr), abs=1e-15
                    )
                    assert dist.conditional_edge_prob(addr) == pytest.approx(
                        oracle.event_probability(
                            dist, lambda t: addr in t, trees_2_2
                        )
                        / oracle.event_probability(
                            dist, lambda t: addr[:-1] in t, trees_2_2
                        ),
                        abs=1e-10,
                    )

    def test_conditional_pattern_prob_is_theta(self, rng):
        dist = random_distribution(SHAPE22, rng)
        assert dist.conditional_pattern_prob((0,), 2) == pytest.approx(
            float(dist.param_at((0,)).probs[2]), abs=1e-15
        )

    def test_conditional_on_zero_probability_event(self):
        dist = deterministic_dist()
        # root pattern "10" never reaches child (1,)
        with pytest.raises(ZeroConditionError, match="probability zero"):
            dist.conditional_pattern_prob((1,), 0)
        with pytest.raises(ZeroConditionError):
            dist.conditional_edge_prob((1, 0))

    def test_edge_prob_of_root_raises(self, rng):
        dist = random_distribution(SHAPE22, rng)
        with pytest.raises(TreeStructureError, match="root has no parent"):
            dist.edge_prob(())
        with pytest.raises(TreeStructureError, match="root has no parent"):
            dist.conditional_edge_prob(())


class TestMode:
    def test_heavy_root_gives_root_only(self):
        dist = TreeDistribution(
            SHAPE22,
            UniformRule(),
            {(): NodeParam.from_probs([0.6, 0.2, 0.1, 0.1])},
        )
        tree, prob = dist.mode()
        assert tree == RootedSubtree({(): 0})
        assert prob == pytest.approx(0.6, abs=1e-15)

    def test_deterministic_dist_prob_one(self):
        dist = deterministic_dist()
        tree, prob = dist.mode()
        assert tree == RootedSubtree({(): 1, (0,): 0})
        assert prob == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("k,d", [(2, 2), (3, 2), (1, 3)])
    def test_matches_enumeration(self, k, d, rng):
        shape = TreeShape(k, d)
        trees = list(enumerate_subtrees(shape))
        for _ in range(30):
            dist = random_distribution(shape, rng)
            tree, value = dist.mode()
            _, best = oracle.max_probability(dist, trees)
            assert value == pytest.approx(best, rel=1e-12)
            assert math.exp(dist.log_prob(tree)) == pytest.approx(best, rel=1e-12)

    def test_tie_break_prefers_lexicographic_bits(self):
        # depth 1: children are leaves, so the root scores equal its own
        # probabilities; tie between "10" (index 1) and "01" (index 2) goes
        # to "01", the bit-vector-lexicographic smaller pattern
        dist = TreeDistribution(
            TreeShape(2, 1),
            UniformRule(),
            {(): NodeParam.from_probs([0.1, 0.4, 0.4, 0.1])},
        )
        tree, _ = dist.mode()
        assert tree.pattern_at(()) == 2

    def test_visit_count_is_node_count(self):
        stats = RecursionStats()
        dist = TreeDistribution(SHAPE22, UniformRule())
        dist.mode(instrument=stats)
        assert stats.node_visits == SHAPE22.node_count()


class TestExpectations:
    def test_product_of_ones(self, rng):
        dist = random_distribution(SHAPE22, rng)
        assert dist.expect_product(lambda a, z: 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_product_indicator_recovers_pattern_event(self, rng):
        # the joint node-and-pattern event as a product-form expectation
        dist = random_distribution(SHAPE22, rng)
        for target, pattern in [((), 2), ((1,), 0), ((0, 1), 0)]:
            on_path = {target[:i]: target[i] for i in range(len(target))}

            def g(addr, z):
                if addr == target:
                    return 1.0 if z == pattern else 0.0
                j = on_path.get(addr)
                if j is not None and len(addr) < len(target):
                    return float((z >> j) & 1)
                return 1.0

            assert dist.expect_product(g) == pytest.approx(
                dist.pattern_event_prob(target, pattern), abs=1e-12
            )

    def test_product_against_enumeration(self, rng, trees_2_2):
        for _ in range(10):
            dist = random_distribution(SHAPE22, rng)
            g = random_node_function(SHAPE22, rng)
            want = oracle.expectation(
                dist,
                lambda t: math.prod(g(a, p) for a, p in t.nodes.items()),
                trees_2_2,
            )
            assert dist.expect_product(g) == pytest.approx(want, abs=1e-10)

    def test_sum_of_ones_is_expected_size(self):
        dist = TreeDistribution(
            SHAPE22, UniformRule(), {(): point_mass(2, 0)}
        )
        assert dist.expect_sum(lambda a, z: 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_sum_against_enumeration(self, rng, trees_2_2):
        for _ in range(10):
            dist = random_distribution(SHAPE22, rng)
            g = random_node_function(SHAPE22, rng, low=-1.0, high=1.0)
            want = oracle.expectation(
                dist, lambda t: sum(g(a, p) for a, p in t.nodes.items()), trees_2_2
            )
            assert dist.expect_sum(g) == pytest.approx(want, abs=1e-10)

    def test_sum_with_neg_log_theta_is_entropy(self, rng):
        dist = random_distribution(SHAPE22, rng)

        def g(addr, z):
            p = dist.param_at(addr).probs[z]
            return -math.log(p) if p > 0 else math.inf

        assert dist.expect_sum(g) == pytest.approx(dist.entropy(), abs=1e-12)


class TestEntropy:
    def test_deterministic_is_zero(self):
        assert deterministic_dist().entropy() == pytest.approx(0.0, abs=1e-15)

    def test_uniform_depth_one(self):
        # four equiprobable trees at depth 1
        dist = TreeDistribution(TreeShape(2, 1), UniformRule())
        assert dist.entropy() == pytest.approx(math.log(4.0), abs=1e-12)

    def test_against_enumeration(self, rng):
        for _ in range(10):
            dist = random_distribution(SHAPE22, rng)
            assert dist.entropy() == pytest.approx(oracle.entropy(dist), abs=1e-10)

    def test_bounds(self, rng):
        for shape in [SHAPE22, TreeShape(3, 2)]:
            for _ in range(5):
                dist = random_distribution(shape, rng)
                h = dist.entropy()
                assert -1e-12 <= h <= math.log(shape.subtree_count()) + 1e-9


class TestKL:
    def test_identical_is_zero(self, rng):
        dist = random_distribution(SHAPE22, rng)
        assert dist.kl_divergence(dist) == pytest.approx(0.0, abs=1e-12)

    def test_against_enumeration(self, rng):
        for _ in range(10):
            p = random_distribution(SHAPE22, rng)
            q = random_distribution(SHAPE22, rng)
            want = oracle.kl_divergence(p, q)
            got = p.kl_divergence(q)
            assert got == pytest.approx(want, abs=1e-10)
            assert got >= -1e-12

    def test_support_violation_raises(self, rng):
        p = random_distribution(SHAPE22, rng)
        q = deterministic_dist()
        with pytest.raises(AbsoluteContinuityError) as err:
            p.kl_divergence(q)
        assert err.value.address is not None

    def test_shape_mismatch(self, rng):
        p = random_distribution(SHAPE22, rng)
        q = TreeDistribution(TreeShape(2, 3), UniformRule())
        with pytest.raises(ValueError, match="shape"):
            p.kl_divergence(q)


class TestComplexity:
    @pytest.mark.parametrize("k,d", [(2, 2), (3, 2), (1, 3), (2, 3)])
    def test_pattern_evaluations_exact(self, k, d, rng):
        shape = TreeShape(k, d)
        dist = random_distribution(shape, rng)
        expected = shape.inner_count() * (1 << k) + shape.leaf_count()
        for run in [
            lambda s: generic_sum(shape, lambda a, z: 1.0, instrument=s),
            lambda s: dist.mode(instrument=s),
            lambda s: dist.expect_product(lambda a, z: 1.0, instrument=s),
            lambda s: dist.expect_sum(lambda a, z: 1.0, instrument=s),
        ]:
            stats = RecursionStats()
            run(stats)
            assert stats.pattern_evals == expected
            assert stats.node_visits == shape.node_count()


class TestSampling:
    def test_fixed_seed_replays(self, trees_2_2):
        dist = TreeDistribution(SHAPE22, UniformRule())
        a = dist.sample(np.random.default_rng(123))
        b = dist.sample(np.random.default_rng(123))
        assert a == b

    def test_deterministic_dist_always_same_tree(self):
        dist = TreeDistribution(
            SHAPE22, UniformRule(), {(): point_mass(2, 0)}
        )
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert dist.sample(rng) == RootedSubtree({(): 0})

    def test_samples_are_valid(self, rng):
        dist = random_distribution(TreeShape(3, 2), rng)
        from rootedtrees import validate_subtree

        for _ in range(50):
            assert validate_subtree(dist.shape, dist.sample(rng)) is None

    def test_empirical_frequencies(self, rng, trees_2_2):
        # coarse check; the acceptance suite runs the full chi-square test
        dist = random_distribution(SHAPE22, rng)
        counts = {t: 0 for t in trees_2_2}
        n = 20000
        for _ in range(n):
            counts[dist.sample(rng)] += 1
        for t in trees_2_2:
            p = math.exp(dist.log_prob(t))
            if p > 0.01:
                assert counts[t] / n == pytest.approx(p, abs=4 * math.sqrt(p / n))


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    shape_idx=st.integers(0, 2),
)
def test_normalization_property(seed, shape_idx):
    shape = [TreeShape(2, 2), TreeShape(3, 2), TreeShape(1, 3)][shape_idx]
    dist = random_distribution(shape, np.random.default_rng(seed))
    assert abs(normalization_sum(dist) - 1.0) <= 1e-12

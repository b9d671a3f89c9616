"""Enumeration-oracle verification suites.

Each suite draws random distributions on small shapes, computes a quantity
both through the bottom-up recursions and by direct summation over every
subtree, and compares at the stated tolerance.  Failures carry the
serialized distribution so a case can be replayed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .base_tree import TreeShape, enumerate_subtrees, format_address
from .codec import CodecConfig, ideal_codelength
from .conjugacy import (
    PathLikelihood,
    tree_posterior_general,
    tree_posterior_path,
)
from .context_tree import ContextTreeModel
from .distribution import (
    NodeParam,
    TreeDistribution,
    UniformRule,
    normalization_sum,
)
from .serialization import format_distribution

DEFAULT_SHAPES = (
    TreeShape(2, 1),
    TreeShape(2, 2),
    TreeShape(1, 3),
    TreeShape(3, 2),
)

ORACLE_TOL = 1e-10
NORMALIZATION_TOL = 1e-12
EVIDENCE_TOL = 1e-9

SCOPES = (
    "normalization",
    "marginals",
    "mode",
    "expectation",
    "entropy",
    "kl",
    "posterior",
    "sequential",
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    replay: str = ""


@dataclass
class VerifyReport:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def add(self, result: CheckResult) -> None:
        self.results.append(result)


def random_distribution(
    shape: TreeShape, rng: np.random.Generator, concentration: float = 1.0
) -> TreeDistribution:
    """Independent Dirichlet pattern vector at every inner-depth node."""
    overrides = {}
    for depth in range(shape.d_max):
        for addr in shape.addresses_at_depth(depth):
            probs = rng.dirichlet(np.full(shape.num_patterns, concentration))
            overrides[addr] = NodeParam.from_probs(probs)
    return TreeDistribution(shape, None, overrides)


def random_node_function(shape: TreeShape, rng: np.random.Generator, low=0.0, high=2.0):
    table = {
        addr: rng.uniform(low, high, shape.num_patterns)
        for addr in shape.addresses()
    }
    return lambda addr, z: float(table[addr][z])


def _replay(dist: TreeDistribution, note: str = "") -> str:
    text = format_distribution(dist)
    return f"# {note}\n{text}" if note else text


def check_normalization(dist: TreeDistribution) -> CheckResult:
    """Recursion total mass must be 1; on failure, name the offending node."""
    total = normalization_sum(dist)
    brute = oracle.total_probability(dist)
    if abs(total - 1.0) <= NORMALIZATION_TOL and abs(total - brute) <= ORACLE_TOL:
        return CheckResult("normalization", True)
    culprit = ""
    for depth in range(dist.shape.d_max):
        for addr in dist.shape.addresses_at_depth(depth):
            s = dist.param_at(addr).probs.sum()
            if abs(s - 1.0) > 1e-12:
                culprit = f" (node {format_address(addr)} mass {s!r})"
                break
        if culprit:
            break
    return CheckResult(
        "normalization",
        False,
        f"total {total!r}, brute force {brute!r}{culprit}",
        _replay(dist, f"normalization failure{culprit}"),
    )


def _suite_normalization(report, shapes, rng, dists_per_shape):
    for shape in shapes:
        for _ in range(dists_per_shape):
            dist = random_distribution(shape, rng)
            result = check_normalization(dist)
            result.name = f"normalization {shape.k_max}-ary depth {shape.d_max}"
            report.add(result)
            if not result.passed:
                return


def _suite_marginals(report, shapes, rng, dists_per_shape):
    for shape in shapes:
        trees = list(enumerate_subtrees(shape))
        for _ in range(dists_per_shape):
            dist = random_distribution(shape, rng)
            worst = 0.0
            bad = ""
            for addr in shape.addresses():
                for z in range(shape.num_patterns):
                    got = dist.pattern_event_prob(addr, z)
                    want = oracle.event_probability(
                        dist,
                        lambda t, a=addr, p=z: a in t and t.pattern_at(a) == p,
                        trees,
                    )
                    err = abs(got - want)
                    if err > worst:
                        worst, bad = err, f"pattern event at {format_address(addr)}/{z}"
                node_got = dist.node_prob(addr)
                node_want = oracle.event_probability(
                    dist, lambda t, a=addr: a in t, trees
                )
                pairs = [
                    (node_got, node_want, "node"),
                    (
                        dist.leaf_prob(addr),
                        oracle.event_probability(
                            dist,
                            lambda t, a=addr: a in t and t.pattern_at(a) == 0,
                            trees,
                        ),
                        "leaf",
                    ),
                    (
                        dist.inner_prob(addr),
                        oracle.event_probability(
                            dist,
                            lambda t, a=addr: a in t and t.pattern_at(a) != 0,
                            trees,
                        ),
                        "inner",
                    ),
                ]
                if addr:
                    pairs.append(
                        (
                            dist.edge_prob(addr),
                            oracle.event_probability(
                                dist, lambda t, a=addr: a in t, trees
                            ),
                            "edge",
                        )
                    )
                for got, want, label in pairs:
                    err = abs(got - want)
                    if err > worst:
                        worst, bad = err, f"{label} at {format_address(addr)}"
            passed = worst <= ORACLE_TOL
            report.add(
                CheckResult(
                    f"marginals {shape.k_max}-ary depth {shape.d_max}",
                    passed,
                    "" if passed else f"worst error {worst!r} for {bad}",
                    "" if passed else _replay(dist, f"marginal mismatch: {bad}"),
                )
            )
            if not passed:
                return


def _suite_mode(report, shapes, rng, dists_per_shape):
    for shape in shapes:
        trees = list(enumerate_subtrees(shape))
        for _ in range(dists_per_shape):
            dist = random_distribution(shape, rng)
            tree, value = dist.mode()
            _, best = oracle.max_probability(dist, trees)
            ok = (
                abs(value - best) <= 1e-12 * max(1.0, abs(best))
                and abs(math.exp(dist.log_prob(tree)) - best)
                <= 1e-12 * max(1.0, abs(best))
            )
            report.add(
                CheckResult(
                    f"mode {shape.k_max}-ary depth {shape.d_max}",
                    ok,
                    "" if ok else f"mode value {value!r}, enumerated max {best!r}",
                    "" if ok else _replay(dist, "mode mismatch"),
                )
            )
            if not ok:
                return


def _suite_expectation(report, shapes, rng, dists_per_shape):
    for shape in shapes:
        trees = list(enumerate_subtrees(shape))
        for _ in range(dists_per_shape):
            dist = random_distribution(shape, rng)
            g = random_node_function(shape, rng)
            got_prod = dist.expect_product(g)
            want_prod = oracle.expectation(
                dist,
                lambda t: math.prod(g(a, p) for a, p in t.nodes.items()),
                trees,
            )
            got_sum = dist.expect_sum(g)
            want_sum = oracle.expectation(
                dist, lambda t: sum(g(a, p) for a, p in t.nodes.items()), trees
            )
            err = max(abs(got_prod - want_prod), abs(got_sum - want_sum))
            ok = err <= ORACLE_TOL
            report.add(
                CheckResult(
                    f"expectation {shape.k_max}-ary depth {shape.d_max}",
                    ok,
                    "" if ok else f"worst error {err!r}",
                    "" if ok else _replay(dist, "expectation mismatch"),
                )
            )
            if not ok:
                return


def _suite_entropy(report, shapes, rng, dists_per_shape):
    for shape in shapes:
        for _ in range(dists_per_shape):
            dist = random_distribution(shape, rng)
            got = dist.entropy()
            want = oracle.entropy(dist)
            bound = math.log(shape.subtree_count())
            ok = abs(got - want) <= ORACLE_TOL and -1e-12 <= got <= bound + 1e-9
            report.add(
                CheckResult(
                    f"entropy {shape.k_max}-ary depth {shape.d_max}",
                    ok,
                    "" if ok else f"entropy {got!r}, brute force {want!r}",
                    "" if ok else _replay(dist, "entropy mismatch"),
                )
            )
            if not ok:
                return


def _suite_kl(report, shapes, rng, dists_per_shape):
    for shape in shapes:
        for _ in range(dists_per_shape):
            p = random_distribution(shape, rng)
            q = random_distribution(shape, rng)
            got = p.kl_divergence(q)
            want = oracle.kl_divergence(p, q)
            ok = abs(got - want) <= ORACLE_TOL and got >= -1e-12
            report.add(
                CheckResult(
                    f"kl {shape.k_max}-ary depth {shape.d_max}",
                    ok,
                    "" if ok else f"kl {got!r}, brute force {want!r}",
                    "" if ok else _replay(p, "kl mismatch (p side)"),
                )
            )
            if not ok:
                return


def _suite_posterior(report, shapes, rng, dists_per_shape):
    for shape in shapes:
        trees = list(enumerate_subtrees(shape))
        for _ in range(dists_per_shape):
            prior = random_distribution(shape, rng)
            g = random_node_function(shape, rng, low=0.05, high=1.0)
            post, evidence = tree_posterior_general(prior, g)
            _, brute_post, brute_ev = oracle.bayes_posterior(
                prior, oracle.product_likelihood(shape, g), trees
            )
            _, post_probs = oracle.tree_probabilities(post, trees)
            err = max(
                float(np.max(np.abs(post_probs - brute_post))),
                abs(evidence - brute_ev),
            )
            target = tuple(
                int(rng.integers(shape.k_max)) for _ in range(shape.d_max)
            )
            values = {
                target[:d]: float(rng.uniform(0.05, 1.0))
                for d in range(shape.d_max + 1)
            }
            lik = PathLikelihood(target, values)
            path_post, path_ev = tree_posterior_path(prior, lik)
            gen_post, gen_ev = tree_posterior_general(
                prior, lik.as_observation_function(shape)
            )
            _, path_probs = oracle.tree_probabilities(path_post, trees)
            _, gen_probs = oracle.tree_probabilities(gen_post, trees)
            err = max(
                err,
                float(np.max(np.abs(path_probs - gen_probs))),
                abs(path_ev - gen_ev),
            )
            ok = err <= ORACLE_TOL
            report.add(
                CheckResult(
                    f"posterior {shape.k_max}-ary depth {shape.d_max}",
                    ok,
                    "" if ok else f"worst error {err!r}",
                    "" if ok else _replay(prior, "posterior mismatch"),
                )
            )
            if not ok:
                return


def _suite_sequential(report, shapes, rng, dists_per_shape):
    for shape in shapes:
        if shape.subtree_count() > 2000:
            continue
        for _ in range(max(1, dists_per_shape // 4)):
            n = 6
            symbols = [int(rng.integers(shape.k_max)) for _ in range(n)]
            model = ContextTreeModel.fresh(shape, UniformRule())
            history: list[int] = []
            log_ev = 0.0
            for i, sym in enumerate(symbols, start=1):
                model, ev = model.update(history, i, sym)
                log_ev += math.log(ev)
                history.append(sym)
            prior = TreeDistribution(shape, UniformRule())
            brute = oracle.sequential_joint_marginal(prior, symbols)
            rel = abs(math.exp(log_ev) - brute) / brute
            bits = ideal_codelength(CodecConfig(shape, UniformRule()), symbols)
            rel_bits = abs(bits - (-math.log2(brute))) / max(1.0, abs(math.log2(brute)))
            ok = rel <= EVIDENCE_TOL and rel_bits <= EVIDENCE_TOL
            report.add(
                CheckResult(
                    f"sequential {shape.k_max}-ary depth {shape.d_max}",
                    ok,
                    ""
                    if ok
                    else f"evidence product off by {rel!r}, codelength by {rel_bits!r}",
                    "" if ok else f"# symbols {symbols!r}\n",
                )
            )
            if not ok:
                return


_SUITES = {
    "normalization": _suite_normalization,
    "marginals": _suite_marginals,
    "mode": _suite_mode,
    "expectation": _suite_expectation,
    "entropy": _suite_entropy,
    "kl": _suite_kl,
    "posterior": _suite_posterior,
    "sequential": _suite_sequential,
}


def run_verify(
    scopes: tuple[str, ...] | None = None,
    seed: int = 20260809,
    shapes=DEFAULT_SHAPES,
    dists_per_shape: int = 8,
) -> VerifyReport:
    scopes = tuple(SCOPES) if not scopes else scopes
    unknown = [s for s in scopes if s not in _SUITES]
    if unknown:
        raise ValueError(f"unknown verify scope(s) {unknown!r}")
    report = VerifyReport()
    rng = np.random.default_rng(seed)
    for scope in SCOPES:
        if scope in scopes:
            _SUITES[scope](report, shapes, rng, dists_per_shape)
    return report

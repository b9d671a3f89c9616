"""Exhaustive-enumeration reference implementations.

Everything here iterates over the full subtree set of a small base tree and
sums directly, never calling the bottom-up recursions it is used to check.
Desk scale only; the enumeration cap applies.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .base_tree import (
    Address,
    RootedSubtree,
    TreeShape,
    enumerate_subtrees,
)
from .context_tree import SymbolHistory
from .distribution import TreeDistribution


def tree_probabilities(
    dist: TreeDistribution, trees: Sequence[RootedSubtree] | None = None
) -> tuple[list[RootedSubtree], np.ndarray]:
    """Every subtree with its probability, computed by direct products."""
    if trees is None:
        trees = list(enumerate_subtrees(dist.shape))
    probs = np.empty(len(trees))
    for idx, tree in enumerate(trees):
        p = 1.0
        for addr, pat in tree.nodes.items():
            p *= dist.param_at(addr).probs[pat]
        probs[idx] = p
    return list(trees), probs


def total_probability(dist: TreeDistribution) -> float:
    _, probs = tree_probabilities(dist)
    return float(probs.sum())


def event_probability(
    dist: TreeDistribution,
    predicate: Callable[[RootedSubtree], bool],
    trees: Sequence[RootedSubtree] | None = None,
) -> float:
    trees, probs = tree_probabilities(dist, trees)
    return float(sum(p for tree, p in zip(trees, probs) if predicate(tree)))


def pattern_event_probability(dist: TreeDistribution, addr: Address, pattern: int) -> float:
    return event_probability(
        dist, lambda t: addr in t and t.pattern_at(addr) == pattern
    )


def node_probability(dist: TreeDistribution, addr: Address) -> float:
    return event_probability(dist, lambda t: addr in t)


def expectation(
    dist: TreeDistribution,
    f: Callable[[RootedSubtree], float],
    trees: Sequence[RootedSubtree] | None = None,
) -> float:
    trees, probs = tree_probabilities(dist, trees)
    return float(sum(f(tree) * p for tree, p in zip(trees, probs)))


def entropy(dist: TreeDistribution) -> float:
    _, probs = tree_probabilities(dist)
    positive = probs[probs > 0]
    return float(-(positive * np.log(positive)).sum())


def kl_divergence(p: TreeDistribution, q: TreeDistribution) -> float:
    trees, p_probs = tree_probabilities(p)
    _, q_probs = tree_probabilities(q, trees)
    total = 0.0
    for pp, qq in zip(p_probs, q_probs):
        if pp == 0.0:
            continue
        if qq == 0.0:
            return math.inf
        total += pp * math.log(pp / qq)
    return float(total)


def max_probability(
    dist: TreeDistribution, trees: Sequence[RootedSubtree] | None = None
) -> tuple[RootedSubtree, float]:
    trees, probs = tree_probabilities(dist, trees)
    idx = int(np.argmax(probs))
    return trees[idx], float(probs[idx])


def bayes_posterior(
    prior: TreeDistribution,
    likelihood: Callable[[RootedSubtree], float],
    trees: Sequence[RootedSubtree] | None = None,
) -> tuple[list[RootedSubtree], np.ndarray, float]:
    """Posterior over every subtree and the evidence, by direct Bayes."""
    trees, probs = tree_probabilities(prior, trees)
    joint = np.array([likelihood(t) * p for t, p in zip(trees, probs)])
    evidence = float(joint.sum())
    if evidence == 0.0:
        raise ZeroDivisionError("zero evidence in brute-force Bayes")
    return trees, joint / evidence, evidence


def product_likelihood(
    shape: TreeShape, g: Callable[[Address, int], float]
) -> Callable[[RootedSubtree], float]:
    """Product-form likelihood as a whole-tree function."""

    def lik(tree: RootedSubtree) -> float:
        value = 1.0
        for addr, pat in tree.nodes.items():
            value *= g(addr, pat)
        return value

    return lik


def _kt_prob(counts: np.ndarray, sym: int, k: int) -> float:
    return (counts[sym] + 0.5) / (counts.sum() + 0.5 * k)


def tree_sequence_log_likelihood(
    tree: RootedSubtree,
    shape: TreeShape,
    symbols: Sequence[int],
    padding: int = 0,
) -> float:
    """Log marginal likelihood of a sequence for one fixed tree.

    Straight from the generative definition: each position emits from the
    deepest tree node on its context path, and that node's smoothed
    predictive sees exactly the symbols previously emitted there.
    """
    counts: dict[Address, np.ndarray] = {}
    history: list[int] = []
    total = 0.0
    for i, sym in enumerate(symbols, start=1):
        sym = int(sym)
        ctx = SymbolHistory.of(history, padding).context_at(i, shape.d_max)
        node = tree.deepest_on_path(ctx)
        c = counts.setdefault(node, np.zeros(shape.k_max))
        total += math.log(_kt_prob(c, sym, shape.k_max))
        c[sym] += 1
        history.append(sym)
    return total


def sequential_joint_marginal(
    prior: TreeDistribution,
    symbols: Sequence[int],
    padding: int = 0,
) -> float:
    """Joint marginal of a symbol sequence under the context-tree mixture:
    prior-weighted sum of per-tree marginal likelihoods."""
    shape = prior.shape
    trees, probs = tree_probabilities(prior)
    total = 0.0
    for tree, p in zip(trees, probs):
        if p == 0.0:
            continue
        total += p * math.exp(
            tree_sequence_log_likelihood(tree, shape, symbols, padding)
        )
    return float(total)


def mixture_predictive(
    prior: TreeDistribution,
    symbols: Sequence[int],
    i: int,
    padding: int = 0,
) -> np.ndarray:
    """Next-symbol mixture at position i by direct posterior reweighting.

    Each tree carries its own emitted-symbol counts through positions
    1..i-1; its weight is the prior times its running likelihood.
    """
    shape = prior.shape
    k = shape.k_max
    trees, probs = tree_probabilities(prior)
    weights = np.array(probs)
    per_tree_counts: list[dict[Address, np.ndarray]] = [{} for _ in trees]
    history: list[int] = []
    for pos in range(1, i):
        sym = int(symbols[pos - 1])
        ctx = SymbolHistory.of(history, padding).context_at(pos, shape.d_max)
        for idx, tree in enumerate(trees):
            node = tree.deepest_on_path(ctx)
            c = per_tree_counts[idx].setdefault(node, np.zeros(k))
            weights[idx] *= _kt_prob(c, sym, k)
            c[sym] += 1
        history.append(sym)
    ctx = SymbolHistory.of(history, padding).context_at(i, shape.d_max)
    out = np.zeros(k)
    for idx, tree in enumerate(trees):
        node = tree.deepest_on_path(ctx)
        c = per_tree_counts[idx].get(node, np.zeros(k))
        for a in range(k):
            out[a] += weights[idx] * _kt_prob(c, a, k)
    return out / weights.sum()


def full_tree_mixture_predictive(
    prior: TreeDistribution,
    symbols: Sequence[int],
    i: int,
    padding: int = 0,
) -> np.ndarray:
    """Next-symbol mixture over full trees only, computed the classical way.

    Assumes the prior puts mass only on full trees (all-or-nothing
    patterns); used to cross-check the generalized recursion against an
    independently structured computation.
    """
    shape = prior.shape
    k = shape.k_max
    full_pattern = (1 << k) - 1
    trees, probs = tree_probabilities(prior)
    keep = [
        idx
        for idx, t in enumerate(trees)
        if all(pat in (0, full_pattern) for pat in t.nodes.values())
    ]
    counts: dict[Address, np.ndarray] = {}
    weights = {idx: probs[idx] for idx in keep}
    history: list[int] = []
    for pos in range(1, i):
        sym = int(symbols[pos - 1])
        ctx = SymbolHistory.of(history, padding).context_at(pos, shape.d_max)
        for idx in keep:
            node = trees[idx].deepest_on_path(ctx)
            c = counts.get(node, np.zeros(k))
            weights[idx] *= _kt_prob(c, sym, k)
        for d in range(shape.d_max + 1):
            addr = ctx[:d]
            c = counts.setdefault(addr, np.zeros(k))
            c[sym] += 1
        history.append(sym)
    ctx = SymbolHistory.of(history, padding).context_at(i, shape.d_max)
    out = np.zeros(k)
    norm = sum(weights.values())
    for idx in keep:
        node = trees[idx].deepest_on_path(ctx)
        c = counts.get(node, np.zeros(k))
        for a in range(k):
            out[a] += weights[idx] * _kt_prob(c, a, k)
    return out / norm

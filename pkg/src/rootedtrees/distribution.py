"""Probability distributions on rooted subtrees and their exact recursions.

A distribution assigns each base-tree node ``v`` a probability vector over
edge patterns; the probability of a subtree is the product of the pattern
probabilities of its nodes.  Every quantity exposed here (normalizing sum,
event probabilities, mode, product- and sum-form expectations, entropy, KL
divergence) is computed exactly by a bottom-up pass over the base tree that
touches each inner node once per pattern and each leaf-depth node once, so
the cost is O(2**k_max * k_max**(d_max+1)) instead of a sum over the
(doubly exponential) set of subtrees.

Recursions run in the linear domain over an explicit per-depth worklist;
tree log probabilities accumulate in the log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Protocol, Union

import numpy as np

from .base_tree import (
    ROOT,
    Address,
    RootedSubtree,
    TreeShape,
    lexicographic_patterns,
    parent,
    pattern_children,
    require_subtree,
)
from .errors import (
    AbsoluteContinuityError,
    TreeStructureError,
    ZeroConditionError,
)

#: A per-node pattern function: (address, pattern) -> value.
NodeFunction = Callable[[Address, int], float]

PARAM_SUM_TOLERANCE = 1e-9


@dataclass
class RecursionStats:
    """Instrumentation counters for the bottom-up recursions."""

    node_visits: int = 0
    pattern_evals: int = 0


@dataclass(frozen=True, eq=False)
class NodeParam:
    """Probability vector over the 2**k_max edge patterns of one node."""

    probs: np.ndarray

    @staticmethod
    def from_probs(values) -> "NodeParam":
        probs = np.asarray(values, dtype=np.float64)
        if probs.ndim != 1 or probs.size < 2 or probs.size & (probs.size - 1):
            raise ValueError(
                f"pattern vector must have length 2**k_max, got {probs.shape}"
            )
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValueError("pattern probabilities must be finite and nonnegative")
        total = probs.sum()
        if abs(total - 1.0) > PARAM_SUM_TOLERANCE:
            raise ValueError(
                f"pattern probabilities sum to {total!r}, outside tolerance "
                f"{PARAM_SUM_TOLERANCE} of 1"
            )
        probs = probs / total
        probs.flags.writeable = False
        return NodeParam(probs)

    @property
    def k_max(self) -> int:
        return self.probs.size.bit_length() - 1

    def is_leaf_param(self) -> bool:
        return self.probs[0] == 1.0 and not np.any(self.probs[1:])

    def cumulative(self) -> np.ndarray:
        cum = getattr(self, "_cum", None)
        if cum is None:
            cum = np.cumsum(self.probs)
            cum.flags.writeable = False
            object.__setattr__(self, "_cum", cum)
        return cum


@lru_cache(maxsize=None)
def leaf_param(k_max: int) -> NodeParam:
    """The forced depth-d_max parameter: all mass on the zero pattern."""
    probs = np.zeros(1 << k_max)
    probs[0] = 1.0
    probs.flags.writeable = False
    return NodeParam(probs)


@lru_cache(maxsize=None)
def _uniform_param(k_max: int) -> NodeParam:
    return NodeParam.from_probs(np.full(1 << k_max, 1.0 / (1 << k_max)))


@lru_cache(maxsize=None)
def _full_tree_param(k_max: int, alpha: float) -> NodeParam:
    probs = np.zeros(1 << k_max)
    probs[-1] = alpha
    probs[0] = 1.0 - alpha
    return NodeParam.from_probs(probs)


class ParamRule(Protocol):
    def param_for(self, shape: TreeShape, addr: Address) -> NodeParam: ...


@dataclass(frozen=True)
class UniformRule:
    """Every inner-depth node spreads mass 2**-k_max on each pattern."""

    name = "uniform"

    def param_for(self, shape: TreeShape, addr: Address) -> NodeParam:
        return _uniform_param(shape.k_max)


@dataclass(frozen=True)
class FullTreeRule:
    """Mass ``alpha`` on the all-ones pattern and ``1 - alpha`` on zero.

    Restricts support to subtrees whose inner nodes have all k_max children,
    the prior class used by classical context-tree weighting.
    """

    alpha: float
    name = "full_tree"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")

    def param_for(self, shape: TreeShape, addr: Address) -> NodeParam:
        return _full_tree_param(shape.k_max, self.alpha)


@dataclass(frozen=True)
class CallableRule:
    """Adapter turning a plain ``addr -> NodeParam`` function into a rule."""

    fn: Callable[[Address], NodeParam]
    name = "callable"

    def param_for(self, shape: TreeShape, addr: Address) -> NodeParam:
        return self.fn(addr)


PriorRule = Union[UniformRule, FullTreeRule, CallableRule]


@lru_cache(maxsize=None)
def _bit_masks(k_max: int) -> tuple[np.ndarray, ...]:
    """For each child j, the indices of patterns with bit j set."""
    patterns = np.arange(1 << k_max)
    return tuple(np.nonzero((patterns >> j) & 1)[0] for j in range(k_max))


@lru_cache(maxsize=None)
def _cleared_masks(k_max: int) -> tuple[np.ndarray, ...]:
    """For each child j, the indices of patterns with bit j clear."""
    patterns = np.arange(1 << k_max)
    return tuple(
        np.nonzero(((patterns >> j) & 1) == 0)[0] for j in range(k_max)
    )


def _subset_products(child_values: np.ndarray, k_max: int) -> np.ndarray:
    """prod over set bits of child value, for every pattern."""
    prods = np.ones(1 << k_max)
    for j, idx in enumerate(_bit_masks(k_max)):
        prods[idx] *= child_values[j]
    return prods


def branch_masses(param: NodeParam, k_max: int) -> np.ndarray:
    """For each child j, the total mass of patterns with bit j set."""
    return np.array([param.probs[idx].sum() for idx in _bit_masks(k_max)])


@dataclass(frozen=True, eq=False)
class TreeDistribution:
    """Per-node edge-pattern probabilities defining a law on rooted subtrees.

    Parameters are stored as a default rule plus sparse overrides so large
    shapes stay cheap; depth-``d_max`` nodes are pinned to the zero pattern
    regardless of rule.  Instances are immutable: posterior constructors
    return new values that share untouched parameter vectors.
    """

    shape: TreeShape
    default: PriorRule | None = None
    overrides: Mapping[Address, NodeParam] = field(default_factory=dict)

    def __post_init__(self):
        for addr, param in self.overrides.items():
            self.shape.require_address(addr)
            if param.probs.size != self.shape.num_patterns:
                raise ValueError(
                    f"override at {addr!r} has length {param.probs.size}, "
                    f"expected {self.shape.num_patterns}"
                )
            if len(addr) == self.shape.d_max and not param.is_leaf_param():
                raise ValueError(
                    f"depth-{self.shape.d_max} override at {addr!r} must put "
                    "all mass on the zero pattern"
                )

    def param_at(self, addr: Address) -> NodeParam:
        if len(addr) == self.shape.d_max:
            override = self.overrides.get(addr)
            return override if override is not None else leaf_param(self.shape.k_max)
        override = self.overrides.get(addr)
        if override is not None:
            return override
        if self.default is None:
            raise KeyError(f"no parameter for node {addr!r} (explicit distribution)")
        return self.default.param_for(self.shape, addr)

    # ------------------------------------------------------------------
    # evaluation and sampling

    def log_prob(self, tree: RootedSubtree) -> float:
        require_subtree(self.shape, tree)
        total = 0.0
        for addr, pat in tree.nodes.items():
            p = self.param_at(addr).probs[pat]
            if p == 0.0:
                return -math.inf
            total += math.log(p)
        return total

    def prob(self, tree: RootedSubtree) -> float:
        return math.exp(self.log_prob(tree))

    def sample(self, rng) -> RootedSubtree:
        """Ancestral sampling: draw each included node's pattern, recurse
        into the set bits.  Children are expanded in increasing index order."""
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        return self._sample_impl(rng, {})

    # ------------------------------------------------------------------
    # marginal event probabilities (closed forms over the root-to-v path)

    def pattern_event_prob(self, addr: Address, pattern: int) -> float:
        """Probability that v is in the tree with exactly this pattern."""
        self.shape.require_address(addr)
        if not 0 <= pattern < self.shape.num_patterns:
            raise ValueError(f"pattern {pattern} out of range")
        return float(self.param_at(addr).probs[pattern] * self._path_mass(addr))

    def node_prob(self, addr: Address) -> float:
        self.shape.require_address(addr)
        return float(self._path_mass(addr))

    def edge_prob(self, addr: Address) -> float:
        """Probability that the edge from the parent into v is in the tree."""
        if not addr:
            raise TreeStructureError("root has no parent")
        return self.node_prob(addr)

    def leaf_prob(self, addr: Address) -> float:
        self.shape.require_address(addr)
        return float(self.param_at(addr).probs[0] * self._path_mass(addr))

    def inner_prob(self, addr: Address) -> float:
        self.shape.require_address(addr)
        return float((1.0 - self.param_at(addr).probs[0]) * self._path_mass(addr))

    def conditional_pattern_prob(self, addr: Address, pattern: int) -> float:
        """P(pattern at v | v in tree) = the stored parameter."""
        self.shape.require_address(addr)
        if not 0 <= pattern < self.shape.num_patterns:
            raise ValueError(f"pattern {pattern} out of range")
        if self.node_prob(addr) == 0.0:
            raise ZeroConditionError("conditioning event has probability zero")
        return float(self.param_at(addr).probs[pattern])

    def conditional_edge_prob(self, addr: Address) -> float:
        """P(edge parent->v present | parent in tree)."""
        if not addr:
            raise TreeStructureError("root has no parent")
        parent_addr = parent(addr)
        if self.node_prob(parent_addr) == 0.0:
            raise ZeroConditionError("conditioning event has probability zero")
        masses = branch_masses(self.param_at(parent_addr), self.shape.k_max)
        return float(masses[addr[-1]])

    def _path_mass(self, addr: Address) -> float:
        """Product over path edges of the mass of patterns keeping the edge."""
        total = 1.0
        for ancestor, j in ((addr[:i], addr[i]) for i in range(len(addr))):
            idx = _bit_masks(self.shape.k_max)[j]
            total *= self.param_at(ancestor).probs[idx].sum()
        return total

    # ------------------------------------------------------------------
    # whole-tree recursions

    def mode(self, instrument: RecursionStats | None = None) -> tuple[RootedSubtree, float]:
        """Maximum-probability subtree via max-product flags plus backtracking.

        Ties at a node resolve to the lexicographically smallest bit vector.
        """
        shape = self.shape
        k = shape.k_max
        lex = lexicographic_patterns(k)
        flags: dict[Address, int] = {}
        prev: dict[Address, float] = {}
        for depth in range(shape.d_max, -1, -1):
            current: dict[Address, float] = {}
            for addr in shape.addresses_at_depth(depth):
                if instrument is not None:
                    instrument.node_visits += 1
                if depth == shape.d_max:
                    flags[addr] = 0
                    current[addr] = self.param_at(addr).probs[0]
                    if instrument is not None:
                        instrument.pattern_evals += 1
                    continue
                probs = self.param_at(addr).probs
                child_vals = np.array([prev[addr + (j,)] for j in range(k)])
                scores = probs * _subset_products(child_vals, k)
                if instrument is not None:
                    instrument.pattern_evals += scores.size
                best_pat, best_score = 0, -math.inf
                for z in lex:
                    if scores[z] > best_score:
                        best_pat, best_score = z, scores[z]
                flags[addr] = best_pat
                current[addr] = best_score
            prev = current
        nodes: dict[Address, int] = {}
        stack: list[Address] = [ROOT]
        while stack:
            addr = stack.pop()
            pat = flags[addr]
            nodes[addr] = pat
            for j in reversed(pattern_children(pat, k)):
                stack.append(addr + (j,))
        return RootedSubtree(nodes), float(prev[ROOT])

    def expect_product(
        self, g: NodeFunction, instrument: RecursionStats | None = None
    ) -> float:
        """E[prod over tree nodes of g(v, pattern)]."""

        def weighted(addr: Address, pattern: int) -> float:
            return self.param_at(addr).probs[pattern] * g(addr, pattern)

        return generic_sum(self.shape, weighted, instrument=instrument)

    def expect_sum(
        self, g: NodeFunction, instrument: RecursionStats | None = None
    ) -> float:
        """E[sum over tree nodes of g(v, pattern)].

        g may be +inf only at patterns of zero probability; those terms
        contribute 0 (the 0 * inf convention used for entropy-like sums).
        """
        shape = self.shape
        k = shape.k_max
        prev: dict[Address, float] = {}
        for depth in range(shape.d_max, -1, -1):
            current: dict[Address, float] = {}
            for addr in shape.addresses_at_depth(depth):
                if instrument is not None:
                    instrument.node_visits += 1
                if depth == shape.d_max:
                    current[addr] = g(addr, 0)
                    if instrument is not None:
                        instrument.pattern_evals += 1
                    continue
                probs = self.param_at(addr).probs
                gvals = np.array([g(addr, z) for z in range(probs.size)])
                if instrument is not None:
                    instrument.pattern_evals += probs.size
                with np.errstate(invalid="ignore"):
                    own = np.where(probs > 0.0, probs * gvals, 0.0).sum()
                child_vals = np.array([prev[addr + (j,)] for j in range(k)])
                masses = branch_masses(self.param_at(addr), k)
                current[addr] = float(own + masses @ child_vals)
            prev = current
        return float(prev[ROOT])

    def entropy(self, instrument: RecursionStats | None = None) -> float:
        """Shannon entropy in nats: E[-log p(T)]."""

        def neg_log_theta(addr: Address, pattern: int) -> float:
            p = self.param_at(addr).probs[pattern]
            return -math.log(p) if p > 0.0 else math.inf

        return self.expect_sum(neg_log_theta, instrument=instrument)

    def kl_divergence(self, other: "TreeDistribution") -> float:
        """KL divergence to ``other``; requires per-node absolute continuity."""
        if other.shape != self.shape:
            raise ValueError("KL divergence requires identical shapes")

        def log_ratio(addr: Address, pattern: int) -> float:
            p = self.param_at(addr).probs[pattern]
            q = other.param_at(addr).probs[pattern]
            if q == 0.0 and p > 0.0:
                raise AbsoluteContinuityError(addr, pattern)
            if p == 0.0:
                return 0.0
            return math.log(p / q)

        return self.expect_sum(log_ratio)

    # ------------------------------------------------------------------

    def _sample_impl(self, rng: np.random.Generator, nodes: dict[Address, int]) -> RootedSubtree:
        stack: list[Address] = [ROOT]
        while stack:
            addr = stack.pop()
            if len(addr) == self.shape.d_max:
                nodes[addr] = 0
                continue
            param = self.param_at(addr)
            u = rng.random()
            pat = int(np.searchsorted(param.cumulative(), u, side="right"))
            pat = min(pat, param.probs.size - 1)
            nodes[addr] = pat
            for j in reversed(pattern_children(pat, self.shape.k_max)):
                stack.append(addr + (j,))
        return RootedSubtree(nodes)


def generic_sum(
    shape: TreeShape,
    g: NodeFunction,
    instrument: RecursionStats | None = None,
) -> float:
    """Sum over all rooted subtrees of the product of g(v, pattern).

    Bottom-up: a leaf-depth node contributes g(v, 0); an inner node sums
    g(v, z) times the product of its set-bit children's values.  Exactly one
    g evaluation per leaf node and 2**k_max per inner node.
    """
    k = shape.k_max
    prev: dict[Address, float] = {}
    for depth in range(shape.d_max, -1, -1):
        current: dict[Address, float] = {}
        for addr in shape.addresses_at_depth(depth):
            if instrument is not None:
                instrument.node_visits += 1
            if depth == shape.d_max:
                current[addr] = g(addr, 0)
                if instrument is not None:
                    instrument.pattern_evals += 1
                continue
            gvals = np.array([g(addr, z) for z in range(1 << k)])
            if instrument is not None:
                instrument.pattern_evals += gvals.size
            child_vals = np.array([prev[addr + (j,)] for j in range(k)])
            current[addr] = float(gvals @ _subset_products(child_vals, k))
        prev = current
    return float(prev[ROOT])


def normalization_sum(dist: TreeDistribution) -> float:
    """Total probability mass; 1 for every valid distribution."""
    return generic_sum(dist.shape, lambda addr, z: dist.param_at(addr).probs[z])

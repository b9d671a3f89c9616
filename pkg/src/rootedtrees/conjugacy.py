"""Bayesian updating in both directions.

Two conjugacies coexist: a product of per-node Dirichlet densities over the
pattern probabilities is conjugate to observing whole trees, and the tree
distribution itself is conjugate to likelihoods that factor as a product of
per-node pattern terms.  For likelihoods that depend only on the deepest
selected node along one root-to-leaf path, the posterior update touches just
the d_max + 1 nodes on that path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol

import numpy as np

from .base_tree import ROOT, Address, RootedSubtree, TreeShape, require_subtree
from .distribution import (
    NodeParam,
    RecursionStats,
    TreeDistribution,
    _bit_masks,
    _cleared_masks,
    _subset_products,
)
from .errors import ZeroEvidenceError

#: Likelihood factor for a bound observation: (address, pattern) -> value >= 0.
ObservationFunction = Callable[[Address, int], float]


class AlphaRule(Protocol):
    def alphas_for(self, shape: TreeShape, addr: Address) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantAlphaRule:
    """Every node starts with the same concentration on every pattern."""

    value: float = 1.0
    name = "constant"

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"concentration must be > 0, got {self.value}")

    def alphas_for(self, shape: TreeShape, addr: Address) -> np.ndarray:
        alphas = np.full(shape.num_patterns, self.value)
        alphas.flags.writeable = False
        return alphas


@dataclass(frozen=True, eq=False)
class DirichletHyper:
    """Per-node Dirichlet concentrations over edge-pattern probabilities."""

    shape: TreeShape
    default: AlphaRule | None = None
    overrides: Mapping[Address, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for addr, vec in self.overrides.items():
            self.shape.require_address(addr)
            if vec.size != self.shape.num_patterns:
                raise ValueError(
                    f"alpha vector at {addr!r} has length {vec.size}, "
                    f"expected {self.shape.num_patterns}"
                )
            if not np.all(vec > 0):
                raise ValueError(f"alpha entries at {addr!r} must be > 0")

    def alphas_at(self, addr: Address) -> np.ndarray:
        vec = self.overrides.get(addr)
        if vec is not None:
            return vec
        if self.default is None:
            raise KeyError(f"no alpha vector for node {addr!r}")
        return self.default.alphas_for(self.shape, addr)

    def posterior_mean(self, addr: Address) -> np.ndarray:
        alphas = self.alphas_at(addr)
        return alphas / alphas.sum()


def dirichlet_posterior(prior: DirichletHyper, tree: RootedSubtree) -> DirichletHyper:
    """Observe one tree: add 1 to alpha at each tree node's realized pattern."""
    require_subtree(prior.shape, tree)
    overrides = dict(prior.overrides)
    for addr, pat in tree.nodes.items():
        current = overrides.get(addr)
        vec = np.array(current if current is not None else prior.alphas_at(addr))
        vec[pat] += 1.0
        vec.flags.writeable = False
        overrides[addr] = vec
    return DirichletHyper(prior.shape, prior.default, overrides)


@dataclass(frozen=True)
class PathLikelihood:
    """Likelihood determined by the deepest selected node on one path.

    ``target`` is a depth-d_max address; ``node_values`` gives, for each node
    on the root-to-target path, the likelihood contributed when that node is
    the deepest tree node on the path.  Off-path nodes contribute factor 1.
    """

    target: Address
    node_values: Mapping[Address, float]

    def validate(self, shape: TreeShape) -> None:
        shape.require_address(self.target)
        if len(self.target) != shape.d_max:
            raise ValueError(
                f"target must have depth {shape.d_max}, got depth {len(self.target)}"
            )
        path = [self.target[:i] for i in range(shape.d_max + 1)]
        missing = [a for a in path if a not in self.node_values]
        if missing:
            raise ValueError(f"node_values missing path nodes {missing!r}")
        for addr in path:
            v = self.node_values[addr]
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"node value at {addr!r} must be finite and >= 0")

    def as_observation_function(self, shape: TreeShape) -> ObservationFunction:
        """The equivalent product-form likelihood factor."""
        on_path = {self.target[:i]: i for i in range(shape.d_max + 1)}

        def g(addr: Address, pattern: int) -> float:
            depth = on_path.get(addr)
            if depth is None or depth != len(addr):
                return 1.0
            if depth == shape.d_max:
                return float(self.node_values[addr]) if pattern == 0 else 1.0
            next_child = self.target[depth]
            if (pattern >> next_child) & 1:
                return 1.0
            return float(self.node_values[addr])

        return g

    def as_patterned(self, shape: TreeShape) -> "PathPatternLikelihood":
        values = {}
        for depth in range(shape.d_max + 1):
            addr = self.target[:depth]
            vec = np.full(shape.num_patterns, float(self.node_values[addr]))
            vec.flags.writeable = False
            values[addr] = vec
        return PathPatternLikelihood(self.target, values)


@dataclass(frozen=True)
class PathPatternLikelihood:
    """Path likelihood whose stop factor may differ per edge pattern.

    Like `PathLikelihood`, the likelihood is 1 everywhere off the root-to-
    ``target`` path, and a path node contributes its factor only when it is
    the deepest selected node.  Here that factor may depend on the node's own
    pattern: ``pattern_values[v][z]`` is the contribution when the tree stops
    at ``v`` with pattern ``z`` (consulted only for patterns whose bit toward
    the next path node is clear; the target node uses index 0).
    """

    target: Address
    pattern_values: Mapping[Address, np.ndarray]

    def validate(self, shape: TreeShape) -> None:
        shape.require_address(self.target)
        if len(self.target) != shape.d_max:
            raise ValueError(
                f"target must have depth {shape.d_max}, got depth {len(self.target)}"
            )
        for depth in range(shape.d_max + 1):
            addr = self.target[:depth]
            vec = self.pattern_values.get(addr)
            if vec is None:
                raise ValueError(f"pattern_values missing path node {addr!r}")
            if vec.shape != (shape.num_patterns,):
                raise ValueError(
                    f"pattern values at {addr!r} must have length {shape.num_patterns}"
                )
            if not (np.all(np.isfinite(vec)) and np.all(vec >= 0)):
                raise ValueError(f"pattern values at {addr!r} must be finite and >= 0")

    def as_observation_function(self, shape: TreeShape) -> ObservationFunction:
        on_path = {self.target[:i]: i for i in range(shape.d_max + 1)}

        def g(addr: Address, pattern: int) -> float:
            depth = on_path.get(addr)
            if depth is None or depth != len(addr):
                return 1.0
            if depth == shape.d_max:
                return float(self.pattern_values[addr][0]) if pattern == 0 else 1.0
            next_child = self.target[depth]
            if (pattern >> next_child) & 1:
                return 1.0
            return float(self.pattern_values[addr][pattern])

        return g


def tree_posterior_general(
    prior: TreeDistribution,
    g: ObservationFunction,
    instrument: RecursionStats | None = None,
) -> tuple[TreeDistribution, float]:
    """Exact posterior for a product-form likelihood, with the evidence.

    Bottom-up pass computing the per-node marginal likelihood q(v), then the
    reweighted pattern probabilities; the root q is the evidence.
    """
    shape = prior.shape
    k = shape.k_max
    q: dict[Address, float] = {}
    for depth in range(shape.d_max, -1, -1):
        for addr in shape.addresses_at_depth(depth):
            if instrument is not None:
                instrument.node_visits += 1
            if depth == shape.d_max:
                val = g(addr, 0)
                if not (np.isfinite(val) and val >= 0):
                    raise ValueError(
                        f"likelihood factor at {addr!r} must be finite and >= 0"
                    )
                q[addr] = val
                if instrument is not None:
                    instrument.pattern_evals += 1
                continue
            probs = prior.param_at(addr).probs
            gvals = np.array([g(addr, z) for z in range(1 << k)])
            if instrument is not None:
                instrument.pattern_evals += gvals.size
            if np.any(gvals < 0) or not np.all(np.isfinite(gvals)):
                raise ValueError(f"likelihood factors at {addr!r} must be finite and >= 0")
            child_q = np.array([q[addr + (j,)] for j in range(k)])
            q[addr] = float((probs * gvals) @ _subset_products(child_q, k))
    evidence = q[ROOT]
    if evidence == 0.0:
        raise ZeroEvidenceError()

    overrides = dict(prior.overrides)
    for depth in range(shape.d_max):
        for addr in shape.addresses_at_depth(depth):
            probs = prior.param_at(addr).probs
            if q[addr] == 0.0:
                # Unreachable under the posterior; parent branch mass is zero.
                overrides[addr] = prior.param_at(addr)
                continue
            gvals = np.array([g(addr, z) for z in range(1 << k)])
            child_q = np.array([q[addr + (j,)] for j in range(k)])
            weighted = probs * gvals * _subset_products(child_q, k)
            overrides[addr] = NodeParam.from_probs(weighted / q[addr])
    return TreeDistribution(shape, prior.default, overrides), float(evidence)


def tree_posterior_path_patterned(
    prior: TreeDistribution,
    lik: PathPatternLikelihood,
    instrument: RecursionStats | None = None,
) -> tuple[TreeDistribution, float]:
    """Posterior for a patterned path likelihood; touches the d_max + 1 path
    nodes only.

    Equal to `tree_posterior_general` on the equivalent product-form
    likelihood, at O(2**k_max * (d_max + 1)) cost.  The returned distribution
    shares every off-path parameter vector with the prior.
    """
    shape = prior.shape
    k = shape.k_max
    lik.validate(shape)
    path = [lik.target[:depth] for depth in range(shape.d_max + 1)]

    q_below = float(lik.pattern_values[lik.target][0])
    if instrument is not None:
        instrument.node_visits += 1
        instrument.pattern_evals += 1
    q_on_path: dict[Address, float] = {lik.target: q_below}
    for depth in range(shape.d_max - 1, -1, -1):
        addr = path[depth]
        probs = prior.param_at(addr).probs
        set_idx = _bit_masks(k)[lik.target[depth]]
        clear_idx = _cleared_masks(k)[lik.target[depth]]
        stop = float(np.dot(probs[clear_idx], lik.pattern_values[addr][clear_idx]))
        mass1 = probs[set_idx].sum()
        q_on_path[addr] = stop + float(mass1 * q_below)
        q_below = q_on_path[addr]
        if instrument is not None:
            instrument.node_visits += 1
            instrument.pattern_evals += probs.size
    evidence = q_on_path[ROOT]
    if evidence == 0.0:
        raise ZeroEvidenceError()

    overrides = dict(prior.overrides)
    for depth in range(shape.d_max):
        addr = path[depth]
        qv = q_on_path[addr]
        if qv == 0.0:
            continue
        probs = prior.param_at(addr).probs
        set_idx = _bit_masks(k)[lik.target[depth]]
        factors = np.array(lik.pattern_values[addr])
        factors[set_idx] = q_on_path[path[depth + 1]]
        overrides[addr] = NodeParam.from_probs(probs * factors / qv)
    return TreeDistribution(shape, prior.default, overrides), float(evidence)


def tree_posterior_path(
    prior: TreeDistribution,
    lik: PathLikelihood,
    instrument: RecursionStats | None = None,
) -> tuple[TreeDistribution, float]:
    """Posterior for a constant-stop-factor path likelihood."""
    lik.validate(prior.shape)
    return tree_posterior_path_patterned(
        prior, lik.as_patterned(prior.shape), instrument
    )

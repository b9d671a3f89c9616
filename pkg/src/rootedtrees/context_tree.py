"""Generalized context-tree source model with exact sequential prediction.

Contexts are base-tree nodes: the depth-d_max address for position i spells
the most recent symbol first.  Given a tree, each position emits from the
deepest tree node on its context path, so under a pattern ``z`` a node
collects exactly the positions whose continuation child ``z`` cuts off.
Counts are therefore kept per (continuation child, symbol): an inner node
holds a k_max-by-k_max matrix, a depth-d_max node a plain vector.  The stop
predictive of a node under pattern ``z`` is the Dirichlet(1/2, ..., 1/2)
posterior predictive of the counts aggregated over the children ``z`` cuts,
which makes every tree's sequential score its true marginal likelihood and
the mixture the exact Bayes predictive.

The next-symbol law is maintained through the patterned path-local posterior
update, at O(2**k_max * k_max * (d_max+1)) per symbol.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

import numpy as np

from .base_tree import Address, RootedSubtree, TreeShape
from .conjugacy import PathPatternLikelihood, tree_posterior_path_patterned
from .distribution import TreeDistribution, UniformRule, _bit_masks, _cleared_masks


@dataclass(frozen=True)
class Alphabet:
    """Source alphabet; its size equals the branching factor k_max."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"alphabet size must be >= 1, got {self.size}")

    def require_symbol(self, symbol: int, position: int | None = None) -> None:
        if not 0 <= symbol < self.size:
            where = "" if position is None else f" at position {position}"
            raise ValueError(
                f"symbol {symbol}{where} outside alphabet of size {self.size}"
            )


@dataclass(frozen=True)
class SymbolHistory:
    """Past symbols plus the padding symbol used before the sequence starts."""

    symbols: tuple[int, ...]
    padding: int = 0

    @staticmethod
    def of(symbols: Sequence[int], padding: int = 0) -> "SymbolHistory":
        return SymbolHistory(tuple(int(s) for s in symbols), padding)

    def context_at(self, i: int, d_max: int) -> Address:
        """Depth-d_max context address for position i (1-based).

        Index j of the address (from the root) is the symbol at position
        i - 1 - j, most recent first; positions before the start read the
        padding symbol.
        """
        if i < 1:
            raise ValueError(f"position must be >= 1, got {i}")
        return tuple(
            self.symbols[i - 1 - j - 1] if i - 1 - j >= 1 else self.padding
            for j in range(d_max)
        )


def _sequence_context(
    symbols: Sequence[int], i: int, d_max: int, padding: int
) -> Address:
    """context_at without materializing the whole history."""
    if i < 1:
        raise ValueError(f"position must be >= 1, got {i}")
    return tuple(
        int(symbols[i - 2 - j]) if i - 2 - j >= 0 else padding for j in range(d_max)
    )


def context_of(history: SymbolHistory | Sequence[int], i: int, shape: TreeShape) -> Address:
    if isinstance(history, SymbolHistory):
        return history.context_at(i, shape.d_max)
    return _sequence_context(history, i, shape.d_max, 0)


@lru_cache(maxsize=None)
def _cut_matrix(k_max: int) -> np.ndarray:
    """CUT[z, c] = 1 when pattern z cuts child c (bit c clear)."""
    bits = (np.arange(1 << k_max)[:, None] >> np.arange(k_max)[None, :]) & 1
    return (1 - bits).astype(np.float64)


def _kt_vector(counts: np.ndarray | None, k_max: int) -> np.ndarray:
    if counts is None:
        return np.full(k_max, 1.0 / k_max)
    return (counts + 0.5) / (counts.sum() + 0.5 * k_max)


@dataclass(frozen=True, eq=False)
class ContextTreeModel:
    """Posterior over context trees plus per-node refined symbol counts.

    ``counts`` maps an inner address to a (k_max, k_max) matrix whose row c
    counts symbols emitted at positions that passed the node heading toward
    child c, and a depth-d_max address to a plain length-k_max vector.
    Instances are immutable; `update` returns a new model sharing all
    untouched state.  A model reflects exactly the positions observed
    through it.
    """

    shape: TreeShape
    tree_dist: TreeDistribution
    counts: Mapping[Address, np.ndarray] = field(default_factory=dict)
    padding: int = 0

    def __post_init__(self):
        if not 0 <= self.padding < self.shape.k_max:
            raise ValueError(
                f"padding symbol {self.padding} outside alphabet of size {self.shape.k_max}"
            )

    @classmethod
    def fresh(
        cls,
        shape: TreeShape,
        rule=None,
        padding: int = 0,
    ) -> "ContextTreeModel":
        rule = UniformRule() if rule is None else rule
        return cls(shape, TreeDistribution(shape, rule), {}, padding)

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.shape.k_max)

    def node_counts(self, addr: Address) -> np.ndarray:
        """Symbol counts over every position whose context passes the node."""
        stored = self.counts.get(addr)
        if stored is None:
            return np.zeros(self.shape.k_max)
        return stored if stored.ndim == 1 else stored.sum(axis=0)

    def node_predictive_vector(self, addr: Address) -> np.ndarray:
        return _kt_vector(self.node_counts(addr), self.shape.k_max)

    def node_predictive(self, addr: Address, symbol: int) -> float:
        """Smoothed estimate from all data reaching the node (the stop
        predictive when every child is cut)."""
        self.alphabet.require_symbol(symbol)
        return float(self.node_predictive_vector(addr)[symbol])

    def stop_predictive_matrix(self, addr: Address) -> np.ndarray:
        """Per-pattern stop predictives of an inner node: row z is the
        smoothed symbol law from the counts of the children z cuts."""
        k = self.shape.k_max
        stored = self.counts.get(addr)
        if stored is None:
            return np.full((1 << k, k), 1.0 / k)
        agg = _cut_matrix(k) @ stored
        return (agg + 0.5) / (agg.sum(axis=1, keepdims=True) + 0.5 * k)

    def _context(self, history, i: int) -> Address:
        if isinstance(history, SymbolHistory):
            return history.context_at(i, self.shape.d_max)
        return _sequence_context(history, i, self.shape.d_max, self.padding)

    def context_path(self, history, i: int) -> list[Address]:
        ctx = self._context(history, i)
        return [ctx[:d] for d in range(self.shape.d_max + 1)]

    def predictive_distribution(self, history, i: int) -> np.ndarray:
        """Bayes-mixture next-symbol probabilities, one entry per symbol.

        Bottom-up along the context path: a node's mixture weight splits
        between the stop patterns (each with its own refined predictive) and
        continuing to the deeper node.
        """
        path = self.context_path(history, i)
        ctx = path[-1]
        k = self.shape.k_max
        q = _kt_vector(self.counts.get(ctx), k)
        for depth in range(self.shape.d_max - 1, -1, -1):
            addr = path[depth]
            probs = self.tree_dist.param_at(addr).probs
            set_idx = _bit_masks(k)[ctx[depth]]
            clear_idx = _cleared_masks(k)[ctx[depth]]
            kt = self.stop_predictive_matrix(addr)
            stop = np.array(
                [float(np.dot(probs[clear_idx], kt[clear_idx, a])) for a in range(k)]
            )
            mass1 = probs[set_idx].sum()
            q = stop + mass1 * q
        return q

    def update(self, history, i: int, observed: int) -> tuple["ContextTreeModel", float]:
        """Absorb one symbol: patterned path posterior plus count bumps.

        Returns the new model and the evidence, which equals the predictive
        probability of the observed symbol.
        """
        self.alphabet.require_symbol(observed, position=i)
        path = self.context_path(history, i)
        ctx = path[-1]
        k = self.shape.k_max
        pattern_values: dict[Address, np.ndarray] = {}
        leaf_vec = np.full(
            1 << k, float(_kt_vector(self.counts.get(ctx), k)[observed])
        )
        leaf_vec.flags.writeable = False
        pattern_values[ctx] = leaf_vec
        for depth in range(self.shape.d_max):
            addr = path[depth]
            column = np.ascontiguousarray(
                self.stop_predictive_matrix(addr)[:, observed]
            )
            column.flags.writeable = False
            pattern_values[addr] = column
        lik = PathPatternLikelihood(ctx, pattern_values)
        posterior, evidence = tree_posterior_path_patterned(self.tree_dist, lik)
        new_counts = dict(self.counts)
        for depth, addr in enumerate(path):
            if depth == self.shape.d_max:
                vec = np.array(self.counts.get(addr, np.zeros(k)))
                vec[observed] += 1
                vec.flags.writeable = False
                new_counts[addr] = vec
            else:
                mat = np.array(self.counts.get(addr, np.zeros((k, k))))
                mat[ctx[depth], observed] += 1
                mat.flags.writeable = False
                new_counts[addr] = mat
        return (
            ContextTreeModel(self.shape, posterior, new_counts, self.padding),
            evidence,
        )


class SyntheticSource:
    """Sampled data-generating process: a tree, per-node symbol laws, and an
    iterator emitting symbols from the deepest tree node on the context path."""

    def __init__(
        self,
        shape: TreeShape,
        tree: RootedSubtree,
        node_distributions: dict[Address, np.ndarray],
        rng: np.random.Generator,
        padding: int = 0,
    ):
        self.shape = shape
        self.tree = tree
        self.node_distributions = node_distributions
        self.padding = padding
        self._rng = rng
        self._window: list[int] = [padding] * shape.d_max  # most recent first
        self._cums = {a: np.cumsum(p) for a, p in node_distributions.items()}

    def __iter__(self) -> Iterator[int]:
        return self

    def __next__(self) -> int:
        ctx = tuple(self._window)
        node = self.tree.deepest_on_path(ctx)
        cum = self._cums[node]
        sym = int(np.searchsorted(cum, self._rng.random(), side="right"))
        sym = min(sym, self.shape.k_max - 1)
        if self.shape.d_max:
            self._window = [sym] + self._window[:-1]
        return sym

    def take(self, n: int) -> np.ndarray:
        return np.array([next(self) for _ in range(n)], dtype=np.int64)


def sample_source(
    shape: TreeShape,
    rng,
    rule=None,
    padding: int = 0,
) -> SyntheticSource:
    """Draw a tree from the prior and a Dirichlet(1/2,...) symbol law for
    every base-tree node; the returned source generates from them."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    rule = UniformRule() if rule is None else rule
    dist = TreeDistribution(shape, rule)
    tree = dist.sample(rng)
    half = np.full(shape.k_max, 0.5)
    eta = {}
    for addr in shape.addresses():
        if shape.k_max == 1:
            eta[addr] = np.ones(1)
        else:
            eta[addr] = rng.dirichlet(half)
    return SyntheticSource(shape, tree, eta, rng, padding)

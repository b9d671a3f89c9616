"""Geometry and addressing of perfect k-ary base trees.

The base tree of shape ``(k_max, d_max)`` is the perfect ``k_max``-ary rooted
tree of depth ``d_max``.  It is never materialized: a node is identified by
its address, the tuple of child indices on the path from the root (the root
is the empty tuple).

An edge pattern is an integer in ``[0, 2**k_max)`` whose bit ``j`` records
whether child ``j`` is present; bit 0 (the least significant bit) is child 0.
The text form of a pattern is the bit string written child 0 first, so with
``k_max = 2`` the pattern 1 prints as ``"10"``.  This bit order is normative
for every serialized format in the package.

A rooted subtree is a map from addresses to edge patterns that contains the
root, is closed under the pattern bits (child ``a + (j,)`` is present exactly
when bit ``j`` of the pattern at ``a`` is set), and assigns the zero pattern
to every depth-``d_max`` node.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Mapping

from .errors import EnumerationCapError, TreeStructureError

Address = tuple[int, ...]

ROOT: Address = ()

DEFAULT_ENUMERATION_CAP = 10**6


@dataclass(frozen=True)
class TreeShape:
    """Maximum branching factor and maximum depth of the base tree."""

    k_max: int
    d_max: int

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")
        if self.d_max < 1:
            raise ValueError(f"d_max must be >= 1, got {self.d_max}")

    @property
    def num_patterns(self) -> int:
        return 1 << self.k_max

    def node_count(self) -> int:
        if self.k_max == 1:
            return self.d_max + 1
        return (self.k_max ** (self.d_max + 1) - 1) // (self.k_max - 1)

    def leaf_count(self) -> int:
        return self.k_max**self.d_max

    def inner_count(self) -> int:
        return self.node_count() - self.leaf_count()

    def subtree_count(self) -> int:
        """Number of rooted subtrees: N(d) = (1 + N(d-1))**k_max, N(0) = 1."""
        n = 1
        for _ in range(self.d_max):
            n = (1 + n) ** self.k_max
        return n

    def is_valid_address(self, addr: Address) -> bool:
        return len(addr) <= self.d_max and all(
            0 <= j < self.k_max for j in addr
        )

    def require_address(self, addr: Address) -> None:
        if not self.is_valid_address(addr):
            raise TreeStructureError(f"invalid address {addr!r} for shape {self}")

    def addresses_at_depth(self, depth: int) -> Iterator[Address]:
        return itertools.product(range(self.k_max), repeat=depth)

    def addresses(self) -> Iterator[Address]:
        """All base-tree addresses, shallowest first."""
        for depth in range(self.d_max + 1):
            yield from self.addresses_at_depth(depth)


def parent(addr: Address) -> Address:
    if not addr:
        raise TreeStructureError("root has no parent")
    return addr[:-1]


def child(addr: Address, j: int) -> Address:
    return addr + (j,)


def path_edges(addr: Address) -> list[tuple[Address, int]]:
    """Edges from the root to ``addr`` as (ancestor, child index) pairs."""
    return [(addr[:i], addr[i]) for i in range(len(addr))]


def pattern_bit(pattern: int, j: int) -> int:
    return (pattern >> j) & 1


def pattern_children(pattern: int, k_max: int) -> list[int]:
    return [j for j in range(k_max) if (pattern >> j) & 1]


def pattern_to_bits(pattern: int, k_max: int) -> str:
    return "".join("1" if (pattern >> j) & 1 else "0" for j in range(k_max))


def bits_to_pattern(bits: str) -> int:
    if not bits or any(c not in "01" for c in bits):
        raise ValueError(f"invalid pattern bit string {bits!r}")
    return sum(1 << j for j, c in enumerate(bits) if c == "1")


@lru_cache(maxsize=None)
def lexicographic_patterns(k_max: int) -> tuple[int, ...]:
    """All patterns ordered lexicographically by bit vector (child 0 first)."""
    return tuple(
        sorted(range(1 << k_max), key=lambda z: tuple((z >> j) & 1 for j in range(k_max)))
    )


class RootedSubtree:
    """Immutable rooted subtree: a closed address -> edge-pattern map."""

    __slots__ = ("_nodes", "_hash")

    def __init__(self, nodes: Mapping[Address, int]):
        self._nodes = dict(nodes)
        self._hash = None

    @property
    def nodes(self) -> dict[Address, int]:
        return self._nodes

    def pattern_at(self, addr: Address) -> int:
        return self._nodes[addr]

    def __contains__(self, addr: Address) -> bool:
        return addr in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RootedSubtree):
            return NotImplemented
        return self._nodes == other._nodes

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._nodes.items()))
        return self._hash

    def __repr__(self) -> str:
        return f"RootedSubtree({self._nodes!r})"

    def addresses(self) -> list[Address]:
        return sorted(self._nodes, key=lambda a: (len(a), a))

    def leaf_addresses(self) -> list[Address]:
        return [a for a in self.addresses() if self._nodes[a] == 0]

    def inner_addresses(self) -> list[Address]:
        return [a for a in self.addresses() if self._nodes[a] != 0]

    def deepest_on_path(self, path: Address) -> Address:
        """Deepest subtree node on the root-to-``path`` walk."""
        addr = ROOT
        for j in path:
            if not pattern_bit(self._nodes[addr], j):
                break
            addr = addr + (j,)
        return addr


def validate_subtree(shape: TreeShape, tree: RootedSubtree) -> str | None:
    """Return None when valid, else a message naming the first violation."""
    nodes = tree.nodes
    if ROOT not in nodes:
        return "root address missing"
    for addr in sorted(nodes, key=lambda a: (len(a), a)):
        pat = nodes[addr]
        if not shape.is_valid_address(addr):
            return f"invalid address {format_address(addr)}"
        if not 0 <= pat < shape.num_patterns:
            return f"pattern out of range at {format_address(addr)}"
        if len(addr) == shape.d_max and pat != 0:
            return f"nonzero pattern at depth-{shape.d_max} node {format_address(addr)}"
        for j in range(shape.k_max):
            present = addr + (j,) in nodes
            if pattern_bit(pat, j) and not present:
                return f"closure violation: child {j} of {format_address(addr)} missing"
            if present and not pattern_bit(pat, j):
                return f"closure violation: child {j} of {format_address(addr)} not in pattern"
        if addr != ROOT and addr[:-1] not in nodes:
            return f"closure violation: parent of {format_address(addr)} missing"
    return None


def require_subtree(shape: TreeShape, tree: RootedSubtree) -> None:
    violation = validate_subtree(shape, tree)
    if violation is not None:
        raise TreeStructureError(violation)


def enumerate_subtrees(
    shape: TreeShape, cap: int = DEFAULT_ENUMERATION_CAP
) -> Iterator[RootedSubtree]:
    """Yield every rooted subtree exactly once.

    Order is deterministic: the pattern at each node runs through
    `lexicographic_patterns`, and for a fixed pattern the child subtrees vary
    with the highest-index child fastest.  Intended as the ground-truth
    oracle for small shapes, hence the cap.
    """
    count = shape.subtree_count()
    if count > cap:
        raise EnumerationCapError(count, cap)

    def branch(addr: Address) -> Iterator[dict[Address, int]]:
        if len(addr) == shape.d_max:
            yield {addr: 0}
            return
        for pat in lexicographic_patterns(shape.k_max):
            children = pattern_children(pat, shape.k_max)
            for combo in itertools.product(
                *(list(branch(addr + (j,))) for j in children)
            ):
                nodes = {addr: pat}
                for sub in combo:
                    nodes.update(sub)
                yield nodes

    for nodes in branch(ROOT):
        yield RootedSubtree(nodes)


def format_address(addr: Address) -> str:
    return "-" if not addr else ".".join(str(j) for j in addr)


def parse_address(text: str) -> Address:
    text = text.strip()
    if text == "-":
        return ROOT
    try:
        return tuple(int(part) for part in text.split("."))
    except ValueError:
        raise ValueError(f"invalid address {text!r}") from None


def format_subtree(tree: RootedSubtree, k_max: int) -> str:
    """One line per node, 'address:bitstring', shallowest address first."""
    lines = [
        f"{format_address(addr)}:{pattern_to_bits(tree.nodes[addr], k_max)}"
        for addr in tree.addresses()
    ]
    return "\n".join(lines)


def parse_subtree(text: str, shape: TreeShape) -> RootedSubtree:
    nodes: dict[Address, int] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        addr_part, sep, bits = line.partition(":")
        if not sep:
            raise ValueError(f"missing ':' in subtree line {line!r}")
        addr = parse_address(addr_part)
        if len(bits) != shape.k_max:
            raise ValueError(
                f"pattern {bits!r} has {len(bits)} bits, expected {shape.k_max}"
            )
        nodes[addr] = bits_to_pattern(bits)
    tree = RootedSubtree(nodes)
    require_subtree(shape, tree)
    return tree

"""Structured-text formats: distributions, concentrations, checkpoints, configs.

All formats are line oriented.  Blank lines and lines starting with ``#``
are ignored.  Addresses use the dot form from `base_tree` (root is ``-``);
pattern vectors are listed in pattern-index order, where the pattern index
is the integer value of the bit vector with child 0 as the least significant
bit.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .base_tree import Address, TreeShape, format_address, parse_address
from .conjugacy import ConstantAlphaRule, DirichletHyper
from .context_tree import ContextTreeModel
from .distribution import (
    FullTreeRule,
    NodeParam,
    TreeDistribution,
    UniformRule,
)
from .errors import FormatError


def _content_lines(text: str) -> Iterator[tuple[int, list[str]]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line.split()


def _float_list(tokens: list[str], lineno: int, expected: int) -> np.ndarray:
    if len(tokens) != expected:
        raise FormatError(lineno, f"expected {expected} values, got {len(tokens)}")
    try:
        return np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise FormatError(lineno, f"bad number: {exc}") from None


class _HeaderReader:
    """Shared k_max / d_max / rule parsing."""

    def __init__(self):
        self.k_max: int | None = None
        self.d_max: int | None = None
        self.rule_tokens: list[str] | None = None

    def try_consume(self, lineno: int, tokens: list[str]) -> bool:
        key = tokens[0]
        if key in ("k_max", "d_max"):
            if len(tokens) != 2:
                raise FormatError(lineno, f"{key} takes one integer")
            try:
                value = int(tokens[1])
            except ValueError:
                raise FormatError(lineno, f"{key} must be an integer") from None
            setattr(self, key, value)
            return True
        if key == "rule":
            if len(tokens) < 2:
                raise FormatError(lineno, "rule needs a name")
            self.rule_tokens = tokens[1:]
            return True
        return False

    def shape(self, lineno: int) -> TreeShape:
        if self.k_max is None or self.d_max is None:
            raise FormatError(lineno, "k_max and d_max must appear before node lines")
        try:
            return TreeShape(self.k_max, self.d_max)
        except ValueError as exc:
            raise FormatError(lineno, str(exc)) from None


def _parse_rule_tokens(tokens: list[str], lineno: int):
    name = tokens[0]
    params = {}
    for tok in tokens[1:]:
        key, sep, value = tok.partition("=")
        if not sep:
            raise FormatError(lineno, f"rule parameter {tok!r} must be key=value")
        try:
            params[key] = float(value)
        except ValueError:
            raise FormatError(lineno, f"bad rule parameter value {value!r}") from None
    try:
        if name == "uniform":
            if params:
                raise ValueError("uniform takes no parameters")
            return UniformRule()
        if name == "full_tree":
            if set(params) != {"alpha"}:
                raise ValueError("full_tree takes exactly alpha=<value>")
            return FullTreeRule(params["alpha"])
        if name == "constant":
            if set(params) != {"value"}:
                raise ValueError("constant takes exactly value=<concentration>")
            return ConstantAlphaRule(params["value"])
        if name == "explicit":
            if params:
                raise ValueError("explicit takes no parameters")
            return None
    except ValueError as exc:
        raise FormatError(lineno, str(exc)) from None
    raise FormatError(lineno, f"unknown rule {name!r}")


def format_rule(rule) -> str:
    if rule is None:
        return "explicit"
    if isinstance(rule, UniformRule):
        return "uniform"
    if isinstance(rule, FullTreeRule):
        return f"full_tree alpha={rule.alpha!r}"
    if isinstance(rule, ConstantAlphaRule):
        return f"constant value={rule.value!r}"
    raise ValueError(f"rule {rule!r} has no text form")


def _parse_addr(token: str, lineno: int) -> Address:
    try:
        return parse_address(token)
    except ValueError as exc:
        raise FormatError(lineno, str(exc)) from None


def format_distribution(dist: TreeDistribution) -> str:
    lines = [
        f"k_max {dist.shape.k_max}",
        f"d_max {dist.shape.d_max}",
        f"rule {format_rule(dist.default)}",
    ]
    for addr in sorted(dist.overrides, key=lambda a: (len(a), a)):
        values = " ".join(repr(float(v)) for v in dist.overrides[addr].probs)
        lines.append(f"override {format_address(addr)} {values}")
    return "\n".join(lines) + "\n"


def parse_distribution(text: str) -> TreeDistribution:
    header = _HeaderReader()
    overrides: dict[Address, NodeParam] = {}
    shape: TreeShape | None = None
    rule_seen = False
    rule = None
    for lineno, tokens in _content_lines(text):
        if header.try_consume(lineno, tokens):
            if header.rule_tokens is not None and not rule_seen:
                rule = _parse_rule_tokens(header.rule_tokens, lineno)
                rule_seen = True
                if isinstance(rule, ConstantAlphaRule):
                    raise FormatError(lineno, "constant is a concentration rule")
            continue
        if tokens[0] == "override":
            if shape is None:
                shape = header.shape(lineno)
            if len(tokens) < 2:
                raise FormatError(lineno, "override needs an address")
            addr = _parse_addr(tokens[1], lineno)
            values = _float_list(tokens[2:], lineno, shape.num_patterns)
            try:
                if not shape.is_valid_address(addr):
                    raise ValueError(f"address {format_address(addr)} out of shape")
                overrides[addr] = NodeParam.from_probs(values)
            except ValueError as exc:
                raise FormatError(lineno, str(exc)) from None
            continue
        raise FormatError(lineno, f"unknown directive {tokens[0]!r}")
    if not rule_seen:
        raise FormatError(0, "missing rule line")
    if shape is None:
        shape = header.shape(0)
    try:
        dist = TreeDistribution(shape, rule, overrides)
    except ValueError as exc:
        raise FormatError(0, str(exc)) from None
    if rule is None:
        for depth in range(shape.d_max):
            for addr in shape.addresses_at_depth(depth):
                if addr not in overrides:
                    raise FormatError(
                        0,
                        f"explicit distribution missing node {format_address(addr)}",
                    )
    return dist


def format_hyper(hyper: DirichletHyper) -> str:
    lines = [
        f"k_max {hyper.shape.k_max}",
        f"d_max {hyper.shape.d_max}",
        f"rule {format_rule(hyper.default)}",
    ]
    for addr in sorted(hyper.overrides, key=lambda a: (len(a), a)):
        values = " ".join(repr(float(v)) for v in hyper.overrides[addr])
        lines.append(f"alpha {format_address(addr)} {values}")
    return "\n".join(lines) + "\n"


def parse_hyper(text: str) -> DirichletHyper:
    header = _HeaderReader()
    overrides: dict[Address, np.ndarray] = {}
    shape: TreeShape | None = None
    rule_seen = False
    rule = None
    for lineno, tokens in _content_lines(text):
        if header.try_consume(lineno, tokens):
            if header.rule_tokens is not None and not rule_seen:
                rule = _parse_rule_tokens(header.rule_tokens, lineno)
                rule_seen = True
                if rule is not None and not isinstance(rule, ConstantAlphaRule):
                    raise FormatError(lineno, "concentrations need a constant rule")
            continue
        if tokens[0] == "alpha":
            if shape is None:
                shape = header.shape(lineno)
            addr = _parse_addr(tokens[1], lineno)
            values = _float_list(tokens[2:], lineno, shape.num_patterns)
            if not np.all(values > 0):
                raise FormatError(lineno, "alpha entries must be > 0")
            values.flags.writeable = False
            overrides[addr] = values
            continue
        raise FormatError(lineno, f"unknown directive {tokens[0]!r}")
    if not rule_seen:
        raise FormatError(0, "missing rule line")
    if shape is None:
        shape = header.shape(0)
    try:
        return DirichletHyper(shape, rule, overrides)
    except ValueError as exc:
        raise FormatError(0, str(exc)) from None


def format_model(model: ContextTreeModel) -> str:
    """Checkpoint: shape and rule, sparse overrides, then per-node counts."""
    lines = [
        f"k_max {model.shape.k_max}",
        f"d_max {model.shape.d_max}",
        f"padding {model.padding}",
        f"rule {format_rule(model.tree_dist.default)}",
    ]
    for addr in sorted(model.tree_dist.overrides, key=lambda a: (len(a), a)):
        values = " ".join(
            repr(float(v)) for v in model.tree_dist.overrides[addr].probs
        )
        lines.append(f"override {format_address(addr)} {values}")
    for addr in sorted(model.counts, key=lambda a: (len(a), a)):
        values = " ".join(str(int(v)) for v in np.ravel(model.counts[addr]))
        lines.append(f"counts {format_address(addr)} {values}")
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> ContextTreeModel:
    header = _HeaderReader()
    overrides: dict[Address, NodeParam] = {}
    counts: dict[Address, np.ndarray] = {}
    padding = 0
    shape: TreeShape | None = None
    rule_seen = False
    rule = None
    for lineno, tokens in _content_lines(text):
        if header.try_consume(lineno, tokens):
            if header.rule_tokens is not None and not rule_seen:
                rule = _parse_rule_tokens(header.rule_tokens, lineno)
                rule_seen = True
            continue
        if tokens[0] == "padding":
            if len(tokens) != 2:
                raise FormatError(lineno, "padding takes one integer")
            padding = int(tokens[1])
            continue
        if shape is None:
            shape = header.shape(lineno)
        if tokens[0] == "override":
            addr = _parse_addr(tokens[1], lineno)
            values = _float_list(tokens[2:], lineno, shape.num_patterns)
            try:
                overrides[addr] = NodeParam.from_probs(values)
            except ValueError as exc:
                raise FormatError(lineno, str(exc)) from None
            continue
        if tokens[0] == "counts":
            addr = _parse_addr(tokens[1], lineno)
            k = shape.k_max
            # leaf-depth nodes store k counts; inner nodes k*k (one row per
            # continuation child, row-major)
            expected = k if len(addr) == shape.d_max else k * k
            if len(tokens[2:]) != expected:
                raise FormatError(lineno, f"expected {expected} counts")
            try:
                vec = np.array([int(t) for t in tokens[2:]], dtype=np.float64)
            except ValueError:
                raise FormatError(lineno, "counts must be integers") from None
            if np.any(vec < 0):
                raise FormatError(lineno, "counts must be nonnegative")
            if len(addr) != shape.d_max:
                vec = vec.reshape(k, k)
            vec.flags.writeable = False
            counts[addr] = vec
            continue
        raise FormatError(lineno, f"unknown directive {tokens[0]!r}")
    if not rule_seen:
        raise FormatError(0, "missing rule line")
    if shape is None:
        shape = header.shape(0)
    try:
        dist = TreeDistribution(shape, rule, overrides)
        return ContextTreeModel(shape, dist, counts, padding)
    except ValueError as exc:
        raise FormatError(0, str(exc)) from None

"""Synthetic compression experiment: sample sources, code under several
priors, report mean bits per symbol over a prefix grid.

Sources are drawn from the uniform-pattern prior (the generating process is
fixed; the compared priors are the coding-side choice).  Each sequence gets
an independent generator seeded from (seed, sequence index), so runs are
reproducible and independent of processing order.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .base_tree import TreeShape
from .codec import CodecConfig, ideal_codelength_profile
from .context_tree import sample_source
from .distribution import FullTreeRule, UniformRule
from .errors import FormatError


def default_grid(n: int) -> tuple[int, ...]:
    """Powers of two up to n, plus n itself."""
    grid = []
    m = 1
    while m < n:
        grid.append(m)
        m *= 2
    grid.append(n)
    return tuple(grid)


def rule_label(rule) -> str:
    if isinstance(rule, UniformRule):
        return "uniform"
    if isinstance(rule, FullTreeRule):
        return f"full_tree:{rule.alpha!r}"
    raise ValueError(f"rule {rule!r} has no label")


def parse_rule_label(token: str):
    name, sep, param = token.partition(":")
    if name == "uniform" and not sep:
        return UniformRule()
    if name == "full_tree" and sep:
        try:
            return FullTreeRule(float(param))
        except ValueError as exc:
            raise ValueError(f"bad rule token {token!r}: {exc}") from None
    raise ValueError(f"unknown rule token {token!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    shape: TreeShape
    num_sequences: int
    length: int
    rules: tuple
    seed: int
    grid: tuple[int, ...] | None = None
    padding: int = 0

    def __post_init__(self):
        if self.num_sequences < 1:
            raise ValueError("need at least one sequence")
        if self.length < 1:
            raise ValueError("sequence length must be >= 1")
        if not self.rules:
            raise ValueError("need at least one prior rule")
        grid = self.grid if self.grid is not None else default_grid(self.length)
        grid = tuple(sorted(set(int(m) for m in grid)))
        if not grid or grid[0] < 1 or grid[-1] > self.length:
            raise ValueError("grid entries must lie in [1, length]")
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class ExperimentRow:
    rule: str
    n: int
    mean_bits_per_symbol: float
    stderr: float
    num_sequences: int
    seed: int


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    rows: tuple[ExperimentRow, ...]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("rule,n,mean_bits_per_symbol,stderr,num_sequences,seed\n")
        for row in self.rows:
            out.write(
                f"{row.rule},{row.n},{row.mean_bits_per_symbol:.12g},"
                f"{row.stderr:.12g},{row.num_sequences},{row.seed}\n"
            )
        return out.getvalue()

    def curve(self, rule_name: str) -> list[tuple[int, float]]:
        return [
            (row.n, row.mean_bits_per_symbol)
            for row in self.rows
            if row.rule == rule_name
        ]


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    grid = list(config.grid)
    # bits[r][s][g]: cumulative ideal codelength of sequence s at grid point g
    bits = np.zeros((len(config.rules), config.num_sequences, len(grid)))
    for s in range(config.num_sequences):
        rng = np.random.default_rng([config.seed, s])
        source = sample_source(config.shape, rng, padding=config.padding)
        symbols = source.take(config.length)
        for r, rule in enumerate(config.rules):
            codec_config = CodecConfig(config.shape, rule, config.padding)
            bits[r, s, :] = ideal_codelength_profile(codec_config, symbols, grid)
    rows = []
    for r, rule in enumerate(config.rules):
        label = rule_label(rule)
        for g, m in enumerate(grid):
            per_symbol = bits[r, :, g] / m
            mean = float(per_symbol.mean())
            if config.num_sequences > 1:
                stderr = float(
                    per_symbol.std(ddof=1) / np.sqrt(config.num_sequences)
                )
            else:
                stderr = 0.0
            rows.append(
                ExperimentRow(
                    label, m, mean, stderr, config.num_sequences, config.seed
                )
            )
    return ExperimentReport(config, tuple(rows))


_CONFIG_KEYS = {"k_max", "d_max", "sequences", "length", "seed", "padding"}


def parse_experiment_config(text: str, seed_override: int | None = None) -> ExperimentConfig:
    values: dict[str, int] = {}
    grid: tuple[int, ...] | None = None
    rules: list = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        key = tokens[0]
        if key in _CONFIG_KEYS:
            if len(tokens) != 2:
                raise FormatError(lineno, f"{key} takes one integer")
            try:
                values[key] = int(tokens[1])
            except ValueError:
                raise FormatError(lineno, f"{key} must be an integer") from None
        elif key == "grid":
            try:
                grid = tuple(int(t) for t in tokens[1:])
            except ValueError:
                raise FormatError(lineno, "grid entries must be integers") from None
            if not grid:
                raise FormatError(lineno, "grid needs at least one entry")
        elif key == "rules":
            if len(tokens) < 2:
                raise FormatError(lineno, "rules needs at least one token")
            try:
                rules = [parse_rule_label(t) for t in tokens[1:]]
            except ValueError as exc:
                raise FormatError(lineno, str(exc)) from None
        else:
            raise FormatError(lineno, f"unknown directive {key!r}")
    for required in ("k_max", "d_max", "sequences", "length"):
        if required not in values:
            raise FormatError(0, f"missing {required}")
    seed = seed_override if seed_override is not None else values.get("seed")
    if seed is None:
        raise FormatError(0, "seed is required (config line or --seed)")
    if not rules:
        raise FormatError(0, "missing rules line")
    try:
        return ExperimentConfig(
            shape=TreeShape(values["k_max"], values["d_max"]),
            num_sequences=values["sequences"],
            length=values["length"],
            rules=tuple(rules),
            seed=seed,
            grid=grid,
            padding=values.get("padding", 0),
        )
    except ValueError as exc:
        raise FormatError(0, str(exc)) from None

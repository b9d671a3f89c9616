"""Command-line surface: distribution queries, codec, experiment, verify.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
Every error path prints a single line ``ERROR <kind>: <message>`` to stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .base_tree import TreeShape, bits_to_pattern, format_subtree, parse_address
from .codec import CodecConfig, decode, encode, ideal_codelength
from .distribution import FullTreeRule, UniformRule
from .errors import CodecError, FormatError
from .experiment import parse_experiment_config, run_experiment
from .serialization import parse_distribution
from .verify import SCOPES, run_verify

USAGE_EXIT = 1
DATA_EXIT = 2
VERIFY_EXIT = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rootedtrees")
    sub = parser.add_subparsers(dest="command", required=True)

    query = sub.add_parser("query", help="evaluate a distribution file")
    query.add_argument("dist_file", type=Path)
    query.add_argument(
        "what",
        choices=["mode", "entropy", "node-prob", "pattern-prob", "sample"],
    )
    query.add_argument("--address", help="dot-separated address, '-' for root")
    query.add_argument("--pattern", help="pattern bit string, child 0 first")
    query.add_argument("--seed", type=int, help="seed for sample")

    codec = sub.add_parser("codec", help="encode, decode, or measure a sequence")
    codec.add_argument("action", choices=["encode", "decode", "codelength"])
    codec.add_argument("--k-max", type=int, default=None)
    codec.add_argument("--d-max", type=int, default=None)
    codec.add_argument("--rule", choices=["uniform", "full_tree"], default="uniform")
    codec.add_argument("--alpha", type=float, default=0.5)
    codec.add_argument("--padding", type=int, default=0)
    codec.add_argument("--input", type=Path, required=True)
    codec.add_argument("--output", type=Path)

    experiment = sub.add_parser("experiment", help="run the compression comparison")
    experiment.add_argument("--config", type=Path, required=True)
    experiment.add_argument("--seed", type=int, help="override the config seed")
    experiment.add_argument("--output", type=Path, help="CSV destination")

    verify = sub.add_parser("verify", help="run the enumeration-oracle suites")
    verify.add_argument(
        "--scope",
        action="append",
        choices=list(SCOPES),
        help="restrict to one or more suites (repeatable)",
    )
    verify.add_argument("--seed", type=int, default=20260809)
    verify.add_argument(
        "--replay-dir",
        type=Path,
        help="where to write failing-case replay files (default: cwd)",
    )
    return parser


def _read_text(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc.strerror or exc}") from None


def _parse_cli_address(text: str, dist) -> tuple:
    try:
        addr = parse_address(text)
        dist.shape.require_address(addr)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return addr


def _cmd_query(args) -> int:
    dist = parse_distribution(_read_text(args.dist_file))
    what = args.what
    if what in ("node-prob", "pattern-prob") and args.address is None:
        raise UsageError(f"{what} needs --address")
    if what == "entropy":
        print(repr(dist.entropy()))
    elif what == "mode":
        tree, prob = dist.mode()
        print(format_subtree(tree, dist.shape.k_max))
        print(f"probability: {prob!r}")
    elif what == "node-prob":
        addr = _parse_cli_address(args.address, dist)
        print(repr(dist.node_prob(addr)))
    elif what == "pattern-prob":
        if args.pattern is None:
            raise UsageError("pattern-prob needs --pattern")
        addr = _parse_cli_address(args.address, dist)
        if len(args.pattern) != dist.shape.k_max:
            raise UsageError(
                f"pattern needs {dist.shape.k_max} bits, got {len(args.pattern)}"
            )
        try:
            pattern = bits_to_pattern(args.pattern)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        print(repr(dist.pattern_event_prob(addr, pattern)))
    elif what == "sample":
        if args.seed is None:
            raise UsageError("sample needs --seed")
        tree = dist.sample(np.random.default_rng(args.seed))
        print(format_subtree(tree, dist.shape.k_max))
    return 0


def _codec_config(args) -> CodecConfig:
    if args.k_max is None or args.d_max is None:
        raise UsageError("encode/codelength need --k-max and --d-max")
    rule = UniformRule() if args.rule == "uniform" else FullTreeRule(args.alpha)
    try:
        return CodecConfig(TreeShape(args.k_max, args.d_max), rule, args.padding)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _cmd_codec(args) -> int:
    config = None
    if args.action != "decode":
        config = _codec_config(args)
    if args.action in ("encode", "decode") and args.output is None:
        raise UsageError(f"{args.action} needs --output")
    try:
        data = args.input.read_bytes()
    except OSError as exc:
        raise ValueError(f"cannot read {args.input}: {exc.strerror or exc}") from None
    if args.action == "decode":
        symbols = decode(data)
        args.output.write_bytes(bytes(symbols))
        return 0
    try:
        symbols = list(data)
        if args.action == "encode":
            args.output.write_bytes(encode(config, symbols))
        else:
            bits = ideal_codelength(config, symbols)
            per = bits / len(symbols) if symbols else 0.0
            print(f"total_bits {bits!r}")
            print(f"bits_per_symbol {per!r}")
    except ValueError as exc:
        raise CodecError(str(exc)) from None
    return 0


def _cmd_experiment(args) -> int:
    try:
        config = parse_experiment_config(_read_text(args.config), args.seed)
    except FormatError as exc:
        raise UsageError(f"{args.config}: {exc}") from None
    report = run_experiment(config)
    csv_text = report.to_csv()
    if args.output is not None:
        args.output.write_text(csv_text)
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(csv_text)
    return 0


def _cmd_verify(args) -> int:
    report = run_verify(tuple(args.scope) if args.scope else None, seed=args.seed)
    failures = 0
    for idx, result in enumerate(report.results):
        status = "PASS" if result.passed else "FAIL"
        detail = f" ({result.detail})" if result.detail else ""
        print(f"{status} {result.name}{detail}")
        if not result.passed and result.replay:
            replay_dir = args.replay_dir or Path.cwd()
            replay_dir.mkdir(parents=True, exist_ok=True)
            replay = replay_dir / f"verify_replay_{idx}.txt"
            replay.write_text(result.replay)
            print(f"  replay written to {replay}")
        failures += not result.passed
    print(f"{len(report.results) - failures}/{len(report.results)} checks passed")
    return 0 if failures == 0 else VERIFY_EXIT


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "query":
            return _cmd_query(args)
        if args.command == "codec":
            return _cmd_codec(args)
        if args.command == "experiment":
            return _cmd_experiment(args)
        return _cmd_verify(args)
    except UsageError as exc:
        print(f"ERROR usage: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (FormatError, CodecError) as exc:
        print(f"ERROR data: {exc}", file=sys.stderr)
        return DATA_EXIT
    except ValueError as exc:
        print(f"ERROR data: {exc}", file=sys.stderr)
        return DATA_EXIT
    except OSError as exc:
        print(f"ERROR data: {exc}", file=sys.stderr)
        return DATA_EXIT


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

"""Lossless sequential entropy coder driven by the context-tree predictive.

Stream layout (normative): magic ``GCTB1``, then unsigned little-endian
header fields (k_max: 1 byte, d_max: 1, sequence length: 8, padding symbol:
1, prior-rule id: 1, rule parameter as 8-byte IEEE-754 double when the rule
has one), then payload bits most-significant-bit-first within bytes.

The coder is a 64-bit-state arithmetic coder with underflow (carry) handling
and an explicit one-bit flush.  Predictive probabilities are quantized to
16-bit frequencies with a floor of 1 per symbol before coding; that
quantization is part of the format.  `ideal_codelength` works in the exact
floating log2 domain and is independent of the quantization.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .base_tree import TreeShape
from .context_tree import Alphabet, ContextTreeModel
from .distribution import FullTreeRule, UniformRule
from .errors import CodecError

MAGIC = b"GCTB1"

RULE_IDS = {"uniform": 0, "full_tree": 1}
RULE_NAMES = {v: k for k, v in RULE_IDS.items()}

FREQ_TOTAL = 1 << 16

_STATE_BITS = 64
_STATE_MASK = (1 << _STATE_BITS) - 1
_TOP_MASK = 1 << (_STATE_BITS - 1)
_SECOND_MASK = 1 << (_STATE_BITS - 2)


@dataclass(frozen=True)
class CodecConfig:
    """Everything the decoder needs to rebuild the sequential model."""

    shape: TreeShape
    rule: UniformRule | FullTreeRule
    padding: int = 0

    def __post_init__(self):
        if self.rule.name not in RULE_IDS:
            raise ValueError(f"rule {self.rule.name!r} cannot be stored in a header")
        if not 0 <= self.padding < self.shape.k_max:
            raise ValueError("padding symbol outside alphabet")

    def fresh_model(self) -> ContextTreeModel:
        return ContextTreeModel.fresh(self.shape, self.rule, self.padding)


@dataclass(frozen=True)
class CodecHeader:
    k_max: int
    d_max: int
    length: int
    padding: int
    rule_id: int
    rule_param: float | None

    @staticmethod
    def for_config(config: CodecConfig, length: int) -> "CodecHeader":
        param = config.rule.alpha if isinstance(config.rule, FullTreeRule) else None
        return CodecHeader(
            config.shape.k_max,
            config.shape.d_max,
            length,
            config.padding,
            RULE_IDS[config.rule.name],
            param,
        )

    def to_config(self) -> CodecConfig:
        if self.rule_id == RULE_IDS["uniform"]:
            rule = UniformRule()
        else:
            rule = FullTreeRule(self.rule_param)
        return CodecConfig(TreeShape(self.k_max, self.d_max), rule, self.padding)

    def pack(self) -> bytes:
        head = MAGIC + struct.pack(
            "<BBQBB", self.k_max, self.d_max, self.length, self.padding, self.rule_id
        )
        if self.rule_param is not None:
            head += struct.pack("<d", self.rule_param)
        return head

    @staticmethod
    def unpack(data: bytes) -> tuple["CodecHeader", int]:
        """Parse a header from the front of ``data``; returns (header, size)."""
        base = len(MAGIC) + struct.calcsize("<BBQBB")
        if len(data) < base:
            raise CodecError("stream shorter than header")
        if data[: len(MAGIC)] != MAGIC:
            raise CodecError(f"bad magic {data[:len(MAGIC)]!r}")
        k_max, d_max, length, padding, rule_id = struct.unpack(
            "<BBQBB", data[len(MAGIC) : base]
        )
        if rule_id not in RULE_NAMES:
            raise CodecError(f"unknown prior-rule id {rule_id}")
        param = None
        size = base
        if rule_id == RULE_IDS["full_tree"]:
            if len(data) < base + 8:
                raise CodecError("stream shorter than header")
            (param,) = struct.unpack("<d", data[base : base + 8])
            size += 8
        header = CodecHeader(k_max, d_max, length, padding, rule_id, param)
        try:
            header.to_config()
        except (ValueError, CodecError) as exc:
            raise CodecError(f"invalid header: {exc}") from exc
        return header, size


class _BitWriter:
    def __init__(self):
        self._bytes = bytearray()
        self._acc = 0
        self._filled = 0
        self.bit_count = 0

    def write(self, bit: int) -> None:
        self._acc = (self._acc << 1) | bit
        self._filled += 1
        self.bit_count += 1
        if self._filled == 8:
            self._bytes.append(self._acc)
            self._acc = 0
            self._filled = 0

    def getvalue(self) -> bytes:
        out = bytearray(self._bytes)
        if self._filled:
            out.append(self._acc << (8 - self._filled))
        return bytes(out)


class _BitReader:
    """MSB-first reader; zero bits past the end are permitted only up to the
    coder's state width, which is the legitimate tail window.  Needing more
    means the payload was truncated."""

    def __init__(self, data: bytes, max_virtual: int = _STATE_BITS):
        self._data = data
        self._pos = 0
        self._virtual = 0
        self._max_virtual = max_virtual

    def read(self) -> int:
        byte_idx, bit_idx = divmod(self._pos, 8)
        if byte_idx >= len(self._data):
            self._virtual += 1
            if self._virtual > self._max_virtual:
                raise CodecError("payload truncated or corrupt")
            self._pos += 1
            return 0
        self._pos += 1
        return (self._data[byte_idx] >> (7 - bit_idx)) & 1


class _ArithmeticEncoder:
    def __init__(self, out: _BitWriter):
        self._low = 0
        self._high = _STATE_MASK
        self._pending = 0
        self._out = out

    def encode(self, cum_lo: int, cum_hi: int, total: int) -> None:
        span = self._high - self._low + 1
        self._high = self._low + span * cum_hi // total - 1
        self._low = self._low + span * cum_lo // total
        while True:
            if (self._low ^ self._high) & _TOP_MASK == 0:
                bit = self._low >> (_STATE_BITS - 1)
                self._out.write(bit)
                for _ in range(self._pending):
                    self._out.write(bit ^ 1)
                self._pending = 0
                self._low = (self._low << 1) & _STATE_MASK
                self._high = ((self._high << 1) & _STATE_MASK) | 1
            elif self._low & ~self._high & _SECOND_MASK:
                self._pending += 1
                self._low = (self._low << 1) & (_STATE_MASK >> 1)
                self._high = ((self._high << 1) & (_STATE_MASK >> 1)) | _TOP_MASK | 1
            else:
                break

    def finish(self) -> None:
        self._out.write(1)
        for _ in range(self._pending):
            self._out.write(0)
        self._pending = 0


class _ArithmeticDecoder:
    def __init__(self, reader: _BitReader):
        self._low = 0
        self._high = _STATE_MASK
        self._reader = reader
        self._code = 0
        for _ in range(_STATE_BITS):
            self._code = (self._code << 1) | reader.read()

    def decode(self, cums: np.ndarray, total: int) -> int:
        span = self._high - self._low + 1
        value = ((self._code - self._low + 1) * total - 1) // span
        symbol = int(np.searchsorted(cums, value, side="right")) - 1
        symbol = max(0, min(symbol, cums.size - 2))
        cum_lo = int(cums[symbol])
        cum_hi = int(cums[symbol + 1])
        self._high = self._low + span * cum_hi // total - 1
        self._low = self._low + span * cum_lo // total
        while True:
            if (self._low ^ self._high) & _TOP_MASK == 0:
                self._code = ((self._code << 1) & _STATE_MASK) | self._reader.read()
                self._low = (self._low << 1) & _STATE_MASK
                self._high = ((self._high << 1) & _STATE_MASK) | 1
            elif self._low & ~self._high & _SECOND_MASK:
                self._code = (
                    (self._code & _TOP_MASK)
                    | ((self._code << 1) & (_STATE_MASK >> 1))
                    | self._reader.read()
                )
                self._low = (self._low << 1) & (_STATE_MASK >> 1)
                self._high = ((self._high << 1) & (_STATE_MASK >> 1)) | _TOP_MASK | 1
            else:
                break
        return symbol


def quantize_freqs(probs: np.ndarray) -> np.ndarray:
    """Map a probability vector to integer frequencies summing to FREQ_TOTAL,
    each at least 1.  Deterministic: the leftover mass goes to the largest
    entry (lowest index on ties)."""
    k = probs.size
    base = np.floor(probs * (FREQ_TOTAL - k)).astype(np.int64) + 1
    base[int(np.argmax(probs))] += FREQ_TOTAL - int(base.sum())
    return base


def _freq_cums(freqs: np.ndarray) -> np.ndarray:
    cums = np.zeros(freqs.size + 1, dtype=np.int64)
    np.cumsum(freqs, out=cums[1:])
    return cums


def _validate_symbols(alphabet: Alphabet, symbols) -> list[int]:
    out = []
    for pos, sym in enumerate(symbols, start=1):
        sym = int(sym)
        alphabet.require_symbol(sym, position=pos)
        out.append(sym)
    return out


def encode(config: CodecConfig, symbols) -> bytes:
    """Compress a symbol sequence; the header fully describes decoding."""
    syms = _validate_symbols(Alphabet(config.shape.k_max), symbols)
    header = CodecHeader.for_config(config, len(syms))
    writer = _BitWriter()
    if syms:
        coder = _ArithmeticEncoder(writer)
        model = config.fresh_model()
        history: list[int] = []
        for i, sym in enumerate(syms, start=1):
            predictive = model.predictive_distribution(history, i)
            cums = _freq_cums(quantize_freqs(predictive))
            coder.encode(int(cums[sym]), int(cums[sym + 1]), FREQ_TOTAL)
            model, _ = model.update(history, i, sym)
            history.append(sym)
        coder.finish()
    return header.pack() + writer.getvalue()


def decode(data: bytes) -> list[int]:
    """Recover the exact symbol sequence from a stream."""
    header, offset = CodecHeader.unpack(data)
    config = header.to_config()
    payload = data[offset:]
    if header.length == 0:
        return []
    reader = _BitReader(payload)
    coder = _ArithmeticDecoder(reader)
    model = config.fresh_model()
    history: list[int] = []
    out: list[int] = []
    for i in range(1, header.length + 1):
        predictive = model.predictive_distribution(history, i)
        cums = _freq_cums(quantize_freqs(predictive))
        sym = coder.decode(cums, FREQ_TOTAL)
        model, _ = model.update(history, i, sym)
        history.append(sym)
        out.append(sym)
    return out


def split_stream(data: bytes) -> tuple[CodecHeader, bytes]:
    """Separate a stream into its parsed header and raw payload bytes."""
    header, offset = CodecHeader.unpack(data)
    return header, data[offset:]


def ideal_codelength(config: CodecConfig, symbols) -> float:
    """Exact sequential codelength in bits: sum of -log2 predictive."""
    syms = _validate_symbols(Alphabet(config.shape.k_max), symbols)
    return ideal_codelength_profile(config, syms, [len(syms)])[0] if syms else 0.0


def ideal_codelength_profile(config: CodecConfig, symbols, grid) -> list[float]:
    """Cumulative ideal codelengths at each prefix length in ``grid``."""
    syms = _validate_symbols(Alphabet(config.shape.k_max), symbols)
    grid = list(grid)
    if any(m < 0 or m > len(syms) for m in grid):
        raise ValueError("grid entries must lie within the sequence length")
    wanted: dict[int, list[int]] = {}
    for idx, m in enumerate(grid):
        wanted.setdefault(m, []).append(idx)
    out = [0.0] * len(grid)
    model = config.fresh_model()
    history: list[int] = []
    total = 0.0
    for i, sym in enumerate(syms, start=1):
        model, evidence = model.update(history, i, sym)
        total += -math.log2(evidence)
        history.append(sym)
        for idx in wanted.get(i, ()):
            out[idx] = total
    return out

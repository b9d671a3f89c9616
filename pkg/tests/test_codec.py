import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rootedtrees import (
    CodecError,
    FullTreeRule,
    TreeDistribution,
    TreeShape,
    UniformRule,
    decode,
    encode,
    ideal_codelength,
)
from rootedtrees import oracle
from rootedtrees.codec import (
    MAGIC,
    CodecConfig,
    CodecHeader,
    ideal_codelength_profile,
    quantize_freqs,
    split_stream,
    FREQ_TOTAL,
)
from rootedtrees.context_tree import ContextTreeModel

SHAPE22 = TreeShape(2, 2)
CFG22 = CodecConfig(SHAPE22, UniformRule())


class TestIdealCodelength:
    def test_empty_sequence(self):
        assert ideal_codelength(CFG22, []) == 0.0

    def test_first_symbol_costs_log_k(self):
        cfg = CodecConfig(TreeShape(4, 3), UniformRule())
        assert ideal_codelength(cfg, [2]) == pytest.approx(2.0, abs=1e-12)

    def test_matches_brute_force_joint(self, rng):
        prior = TreeDistribution(SHAPE22, UniformRule())
        for _ in range(5):
            symbols = [int(x) for x in rng.integers(0, 2, 8)]
            bits = ideal_codelength(CFG22, symbols)
            brute = oracle.sequential_joint_marginal(prior, symbols)
            assert bits == pytest.approx(-math.log2(brute), rel=1e-9)

    def test_profile_prefixes(self, rng):
        symbols = [int(x) for x in rng.integers(0, 2, 16)]
        grid = [1, 2, 4, 8, 16]
        profile = ideal_codelength_profile(CFG22, symbols, grid)
        for m, bits in zip(grid, profile):
            assert bits == pytest.approx(
                ideal_codelength(CFG22, symbols[:m]), abs=1e-12
            )
        assert all(a <= b + 1e-12 for a, b in zip(profile, profile[1:]))

    def test_out_of_range_symbol_names_position(self):
        with pytest.raises(ValueError, match="position 3"):
            ideal_codelength(CFG22, [0, 1, 2, 0])


class TestRoundtrip:
    @pytest.mark.parametrize(
        "symbols",
        [[], [0], [1, 1, 1, 1, 1, 1], [0, 1] * 20],
        ids=["empty", "single", "constant", "alternating"],
    )
    def test_degenerate_sequences(self, symbols):
        stream = encode(CFG22, symbols)
        assert decode(stream) == symbols

    def test_random_roundtrips_with_overhead_bound(self, rng):
        for _ in range(60):
            k = int(rng.integers(1, 5))
            d = int(rng.integers(1, 5))
            n = int(rng.integers(0, 150))
            rule = (
                UniformRule()
                if rng.random() < 0.5
                else FullTreeRule(float(rng.uniform(0.2, 0.8)))
            )
            cfg = CodecConfig(TreeShape(k, d), rule)
            symbols = [int(x) for x in rng.integers(0, k, n)]
            stream = encode(cfg, symbols)
            assert decode(stream) == symbols
            _, payload = split_stream(stream)
            overhead = len(payload) * 8 - ideal_codelength(cfg, symbols)
            # quantization can hand the coded symbol slightly more mass than
            # the exact predictive, so a small negative overhead is possible
            assert -2.0 <= overhead <= 32.0

    def test_empty_sequence_is_header_only(self):
        stream = encode(CFG22, [])
        _, payload = split_stream(stream)
        assert payload == b""

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(0, 2), max_size=60))
    def test_roundtrip_property(self, symbols):
        cfg = CodecConfig(TreeShape(3, 2), UniformRule())
        assert decode(encode(cfg, symbols)) == symbols


class TestHeader:
    def test_header_roundtrip_uniform(self):
        header = CodecHeader.for_config(CFG22, 12345)
        parsed, size = CodecHeader.unpack(header.pack())
        assert parsed == header
        assert size == len(header.pack())

    def test_header_roundtrip_full_tree(self):
        cfg = CodecConfig(TreeShape(4, 5), FullTreeRule(0.3), padding=2)
        header = CodecHeader.for_config(cfg, 7)
        parsed, _ = CodecHeader.unpack(header.pack())
        assert parsed.rule_param == pytest.approx(0.3)
        rebuilt = parsed.to_config()
        assert rebuilt == cfg

    def test_bad_magic_rejected(self):
        stream = bytearray(encode(CFG22, [0, 1]))
        stream[0] ^= 0xFF
        with pytest.raises(CodecError, match="magic"):
            decode(bytes(stream))

    def test_short_stream_rejected(self):
        with pytest.raises(CodecError, match="header"):
            decode(MAGIC + b"\x01")

    def test_invalid_header_fields_rejected(self):
        header = CodecHeader(0, 2, 4, 0, 0, None)
        with pytest.raises(CodecError, match="invalid header"):
            CodecHeader.unpack(header.pack())

    def test_decode_follows_header_rule(self, rng):
        # streams carry their own model configuration
        symbols = [int(x) for x in rng.integers(0, 2, 40)]
        for rule in [UniformRule(), FullTreeRule(0.5)]:
            cfg = CodecConfig(SHAPE22, rule)
            assert decode(encode(cfg, symbols)) == symbols

    def test_truncated_payload_rejected(self, rng):
        symbols = [int(x) for x in rng.integers(0, 2, 120)]
        stream = encode(CFG22, symbols)
        with pytest.raises(CodecError):
            decode(stream[: len(stream) - max(4, (len(stream) // 2))])

    def test_encode_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="position 2"):
            encode(CFG22, [0, 5])


class TestQuantization:
    def test_freqs_sum_to_total_with_floor(self, rng):
        for _ in range(100):
            k = int(rng.integers(1, 6))
            probs = rng.dirichlet(np.ones(k))
            freqs = quantize_freqs(probs)
            assert freqs.sum() == FREQ_TOTAL
            assert np.all(freqs >= 1)

    def test_deterministic(self):
        probs = np.array([0.1, 0.2, 0.3, 0.4])
        assert np.array_equal(quantize_freqs(probs), quantize_freqs(probs))


class TestPredictiveSynchronization:
    def test_encoder_decoder_freq_tables_identical(self, rng):
        cfg = CodecConfig(TreeShape(3, 2), UniformRule())
        symbols = [int(x) for x in rng.integers(0, 3, 50)]

        def trace(syms):
            model = ContextTreeModel.fresh(cfg.shape, cfg.rule, cfg.padding)
            tables = []
            history = []
            for i, sym in enumerate(syms, start=1):
                pred = model.predictive_distribution(history, i)
                tables.append(quantize_freqs(pred))
                model, _ = model.update(history, i, sym)
                history.append(sym)
            return tables

        encoder_side = trace(symbols)
        decoded = decode(encode(cfg, symbols))
        decoder_side = trace(decoded)
        assert len(encoder_side) == len(decoder_side)
        for a, b in zip(encoder_side, decoder_side):
            assert np.array_equal(a, b)


class TestDominance:
    def test_matched_prior_codes_shorter_on_average(self):
        # sources drawn from the uniform-pattern prior: the matched mixture
        # dominates the full-tree baseline on average
        shape = TreeShape(4, 3)
        n, num_sequences = 128, 100
        uni = CodecConfig(shape, UniformRule())
        ft = CodecConfig(shape, FullTreeRule(0.5))
        from rootedtrees.context_tree import sample_source

        total_uni = total_ft = 0.0
        for s in range(num_sequences):
            source = sample_source(shape, np.random.default_rng([31, s]))
            symbols = source.take(n)
            total_uni += ideal_codelength(uni, symbols)
            total_ft += ideal_codelength(ft, symbols)
        assert total_uni <= total_ft

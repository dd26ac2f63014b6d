#!/usr/bin/env python3
"""Sliding-window encoder, index replay and the SplitMix64 generator"""
import math

import pytest
from pydantic import ValidationError

from slidingfountain.codec import (
    HEADER,
    CodecConfig,
    Packet,
    PrngState,
    SlidingWindowEncoder,
    degree_for,
    derive_seed,
    encode_next,
    new_encoder_state,
    parity_indices,
    prng_next,
    reconstruct_indices,
)
from slidingfountain.errors import EncodingError


def test_prng_golden_value():
    state, value = prng_next(PrngState(0))
    assert state.s == 0x9E3779B97F4A7C15
    assert value == 0xE220A8397B1DCDAF


def test_prng_next_is_pure_and_deterministic():
    a = PrngState(42)
    b = PrngState(42)
    prng_next(a)
    assert a.s == 42
    assert [a.advance() for _ in range(1000)] == [b.advance() for _ in range(1000)]


def test_prng_seeds_differ():
    assert prng_next(PrngState(1))[1] != prng_next(PrngState(2))[1]


def test_uniform_range():
    rng = PrngState(3)
    values = [rng.uniform() for _ in range(1000)]
    assert all(0.0 <= v < 1.0 for v in values)


def test_derive_seed_separates_tags():
    assert derive_seed(5, 1, 1) != derive_seed(5, 1, 2)
    assert derive_seed(5, 1, 1) != derive_seed(5, 2, 1)
    assert derive_seed(5, 1, 1) == derive_seed(5, 1, 1)


def test_config_degree_and_density():
    assert CodecConfig().D == 25
    assert CodecConfig(window=5, degree=3).delta == pytest.approx(0.6)
    assert degree_for(0.5, 5) == 3
    assert degree_for(0.01, 10) == 1
    assert CodecConfig(window=50, density=0.5, degree=25).D == 25
    assert CodecConfig(parities=3).rate == pytest.approx(0.25)
    assert CodecConfig(segments=2, parities=1).rate == pytest.approx(2 / 3)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"window": 5, "degree": 6},
        {"window": 50, "degree": 10, "density": 0.5},
        {"density": 1.5},
        {"parities": 0},
        {"segments": 256},
    ],
)
def test_config_rejects(kwargs):
    with pytest.raises(ValidationError):
        CodecConfig(**kwargs)


def test_parity_indices_full_window():
    config = CodecConfig(window=5, degree=3, seed=11)
    indices = parity_indices(10, 1, config)
    assert len(indices) == 3
    assert len(set(indices)) == 3
    assert set(indices) <= set(range(5, 10))


def test_parity_indices_warm_up():
    config = CodecConfig(window=5, degree=3)
    assert parity_indices(0, 1, config) == []
    assert parity_indices(1, 1, config) == [0]
    assert parity_indices(2, 1, config) == [0, 1]


def test_parity_indices_degree_equals_window():
    config = CodecConfig(window=4, degree=4)
    assert parity_indices(9, 1, config) == [5, 6, 7, 8]


def test_parity_indices_count_symbols_with_segments():
    config = CodecConfig(window=4, degree=2, segments=2, seed=5)
    for seq in range(1, 30):
        indices = parity_indices(seq, 1, config)
        first = seq * 2
        assert set(indices) <= set(range(max(0, first - 4), first))


def test_encoder_parity_is_xor_of_window():
    config = CodecConfig(window=5, degree=3, seed=9)
    encoder = SlidingWindowEncoder(config)
    data = [(i * 7919) % 65536 for i in range(40)]
    for seq, value in enumerate(data):
        packet = encoder.encode([value])
        assert packet.seq == seq
        assert packet.data == (value,)
        expected = 0
        for idx in reconstruct_indices(seq, config)[0]:
            expected ^= data[idx]
        assert packet.parity == (expected,)
        assert packet.degree_actual == (min(3, seq),)


def test_encoder_zero_history_gives_zero_parity():
    encoder = SlidingWindowEncoder(CodecConfig(window=5, degree=3))
    for _ in range(10):
        packet = encoder.encode([0])
    assert packet.parity == (0,)


def test_rate_quarter_packet_has_three_parities():
    config = CodecConfig(window=10, degree=5, parities=3, seed=2)
    encoder = SlidingWindowEncoder(config)
    for i in range(20):
        packet = encoder.encode([i])
    assert len(packet.parity) == 3
    assert config.rate == pytest.approx(0.25)
    slots = reconstruct_indices(19, config)
    assert len({tuple(s) for s in slots}) > 1


def test_reconstruct_indices_stay_in_trailing_window():
    config = CodecConfig(window=50, density=0.5, seed=4)
    for seq in (100, 101):
        (indices,) = reconstruct_indices(seq, config)
        assert len(indices) == 25
        assert set(indices) <= set(range(seq - 50, seq))
    assert reconstruct_indices(0, config) == [[]]


def test_wrong_segment_count_leaves_state_alone():
    config = CodecConfig(window=5, degree=3, segments=2)
    state = new_encoder_state(config)
    encode_next(state, [1, 2], config)
    with pytest.raises(EncodingError):
        encode_next(state, [1], config)
    assert state.n == 1
    assert list(state.window) == [1, 2]


def test_wrong_width_rejected():
    config = CodecConfig(window=5, degree=3, payload_width=8)
    encoder = SlidingWindowEncoder(config)
    with pytest.raises(EncodingError):
        encoder.encode([256])
    assert encoder.state.n == 0


def test_packet_wire_layout():
    packet = Packet(seq=3, data=(0x0102,), parity=(0xFFFF,))
    raw = packet.to_bytes(16)
    assert HEADER.size == 12
    assert len(raw) == 12 + 2 * 2
    assert raw[:8] == (3).to_bytes(8, "little")
    assert raw[8:10] == bytes([1, 1])
    assert raw[12:14] == bytes([0x02, 0x01])
    decoded, end = Packet.from_bytes(raw + b"tail")
    assert end == len(raw)
    assert decoded == packet


def test_packet_from_truncated_bytes():
    raw = Packet(seq=0, data=(1, 2), parity=(3,)).to_bytes(16)
    with pytest.raises(ValueError):
        Packet.from_bytes(raw[:-1])


def test_window_positions_selected_uniformly():
    config = CodecConfig(window=10, degree=4, seed=123)
    trials = 10_000
    counts = [0] * 10
    for seq in range(10, 10 + trials):
        for idx in parity_indices(seq, 1, config):
            counts[idx - (seq - 10)] += 1
    p = 0.4
    sigma = math.sqrt(p * (1 - p) / trials)
    for count in counts:
        # 4 sigma rather than 3: ten bins must all pass under one fixed seed
        assert abs(count / trials - p) < 4 * sigma

#!/usr/bin/env python3
"""Binary traces and replay from delivered packets only"""
import pytest

from slidingfountain.channel import BernoulliChannel
from slidingfountain.codec import CodecConfig
from slidingfountain.decoder import Variant
from slidingfountain.errors import ConfigError
from slidingfountain.simcore import build_spec, run_decoders, stream_codec
from slidingfountain.trace import TraceWriter, read_trace, replay_trace, write_trace

CODEC = CodecConfig(window=10, density=0.5, payload_width=12)


def record_run(path, p_e: float, seed: int = 0, variant: Variant = Variant.GE, d_max: int | None = None):
    spec = build_spec(CODEC, BernoulliChannel(p_e=p_e), variant=variant, d_max=d_max, n_packets=300, seeds=[seed])
    with TraceWriter(path, stream_codec(spec, seed)) as writer:
        out = run_decoders(spec, seed, [spec.decoder], on_packet=writer.record)
    return out[spec.decoder.label], writer.count


def test_trace_keeps_codec_and_flags(tmp_path, encode_stream):
    packets = encode_stream(CODEC, 5)
    path = tmp_path / "t.swft"
    assert write_trace(path, CODEC, [(p, p.seq != 2) for p in packets]) == 5
    codec, records = read_trace(path)
    assert codec == CODEC
    assert [delivered for _, delivered in records] == [True, True, False, True, True]
    assert [p.data for p, _ in records] == [p.data for p in packets]


@pytest.mark.parametrize("variant, d_max", [(Variant.GE, None), (Variant.INACTIVATION, None),
                                            (Variant.TRUNCATED_GE, 5)])
def test_replay_matches_live_decoding(tmp_path, variant, d_max):
    path = tmp_path / "run.swft"
    live, count = record_run(path, 0.3, variant=variant, d_max=d_max)
    assert count == 300
    assert replay_trace(path, variant, d_max) == live.metrics


def test_replay_with_trailing_losses(tmp_path):
    path = tmp_path / "dead.swft"
    live, _ = record_run(path, 1.0)
    replayed = replay_trace(path)
    assert replayed == live.metrics
    assert replayed.drr == 0.0


def test_bad_files(tmp_path):
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"not a trace at all")
    with pytest.raises(ConfigError):
        read_trace(junk)

    path = tmp_path / "cut.swft"
    record_run(path, 0.2)
    cut = tmp_path / "cut2.swft"
    cut.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(ConfigError):
        read_trace(cut)

    with pytest.raises(ConfigError):
        replay_trace(path, Variant.TRUNCATED_GE)
    with pytest.raises(ConfigError):
        read_trace(tmp_path / "absent.swft")

"""Shared fixtures: small codecs, seeded packet streams and clean settings"""
import pytest

from slidingfountain.codec import CodecConfig, Packet, PrngState, SlidingWindowEncoder
from slidingfountain.settings import get_settings

ENV_VARS = ("SWF_PACKETS", "SWF_SEEDS", "SWF_THREADS", "SWF_OUT_DIR", "SWF_LOG_LEVEL")


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    for name in ENV_VARS:
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def small_codec() -> CodecConfig:
    """W = 6, D = 3, R = 1/2"""
    return CodecConfig(window=6, degree=3, parities=1, seed=7, payload_width=16)


@pytest.fixture
def encode_stream():
    """Encode `count` packets of seeded pseudorandom payload"""

    def _encode(codec: CodecConfig, count: int, seed: int = 1) -> list[Packet]:
        rng = PrngState(seed)
        encoder = SlidingWindowEncoder(codec)
        mask = (1 << codec.payload_width) - 1
        return [encoder.encode([rng.advance() & mask for _ in range(codec.segments)]) for _ in range(count)]

    return _encode

"""Sliding-window application layer fountain code: encoder, decoders, channels and experiments"""
from slidingfountain.channel import BernoulliChannel, Delivered, ErasureChannel, Lost, SlottedAlohaChannel
from slidingfountain.codec import CodecConfig, Packet, SlidingWindowEncoder
from slidingfountain.decoder import DecoderConfig, Variant, make_decoder
from slidingfountain.errors import (
    ConfigError,
    DecodingFault,
    EncodingError,
    FountainError,
    OrderingError,
    UndefinedRunError,
)
from slidingfountain.metrics import RunMetrics
from slidingfountain.simcore import ExperimentSpec, build_spec, run, sweep

__version__ = "0.1.0"

__all__ = [
    "BernoulliChannel",
    "CodecConfig",
    "ConfigError",
    "DecoderConfig",
    "DecodingFault",
    "Delivered",
    "EncodingError",
    "ErasureChannel",
    "ExperimentSpec",
    "FountainError",
    "Lost",
    "OrderingError",
    "Packet",
    "RunMetrics",
    "SlidingWindowEncoder",
    "SlottedAlohaChannel",
    "UndefinedRunError",
    "Variant",
    "build_spec",
    "make_decoder",
    "run",
    "sweep",
]

"""
Systematic sliding-window fountain encoder.

Every packet carries `segments` raw data symbols followed by `parities`
parity symbols. Each parity is the XOR of `degree` distinct symbols drawn from
the last `window` data symbols sent before the packet (never the packet's own
data). Which symbols are drawn is decided by a SplitMix64 generator reseeded
per (stream seed, packet, parity slot) so a receiver can replay the choice for
any packet it hears, whatever was lost before it.
"""
import math
import struct
from collections import deque
from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field, model_validator

from slidingfountain.errors import EncodingError
from slidingfountain.gf2 import BitBlock

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# seq (u64), segments (u8), parities (u8), payload width in bits (u16)
HEADER = struct.Struct("<QBBH")


@dataclass(slots=True)
class PrngState:
    s: int = 0

    def advance(self) -> int:
        """Step in place and return the next 64-bit output"""
        self.s = (self.s + GOLDEN_GAMMA) & MASK64
        z = self.s
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Float in [0, 1) from the top 53 bits of the next output"""
        return (self.advance() >> 11) * (1.0 / (1 << 53))


def prng_next(state: PrngState) -> tuple[PrngState, int]:
    """Pure SplitMix64 step: (new state, output); `state` is not modified"""
    nxt = PrngState(state.s)
    value = nxt.advance()
    return nxt, value


def derive_seed(seed: int, *tags: int) -> int:
    """Fold tags into a seed; distinct tag tuples give unrelated streams"""
    s = seed & MASK64
    for tag in tags:
        _, s = prng_next(PrngState(s ^ (tag & MASK64)))
    return s


class CodecConfig(BaseModel):
    """
    W (`window`, symbols), D (`degree`) or Δ (`density`, D = round(Δ·W)),
    l (`segments`) data symbols and m (`parities`) parity symbols per packet.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    window: int = Field(default=50, ge=1)
    degree: int | None = Field(default=None, ge=1)
    density: float | None = Field(default=None, gt=0.0, le=1.0)
    segments: int = Field(default=1, ge=1, le=255)
    parities: int = Field(default=1, ge=1, le=255)
    seed: int = Field(default=0, ge=0, le=MASK64)
    payload_width: int = Field(default=16, ge=1, le=0xFFFF)

    @model_validator(mode="after")
    def _check_degree(self) -> "CodecConfig":
        if self.degree is not None and self.density is not None:
            if self.degree != degree_for(self.density, self.window):
                raise ValueError(f"degree {self.degree} disagrees with density {self.density} at window {self.window}")
        if not 1 <= self.D <= self.window:
            raise ValueError(f"degree {self.D} outside [1, {self.window}]")
        return self

    @property
    def D(self) -> int:
        if self.degree is not None:
            return self.degree
        return degree_for(0.5 if self.density is None else self.density, self.window)

    @property
    def delta(self) -> float:
        return self.D / self.window

    @property
    def rate(self) -> float:
        return self.segments / (self.segments + self.parities)

    @property
    def symbol_bytes(self) -> int:
        return (self.payload_width + 7) // 8


def degree_for(density: float, window: int) -> int:
    """D = round(Δ·W), halves rounded up, never below one"""
    return max(1, int(math.floor(density * window + 0.5)))


@dataclass(frozen=True, slots=True)
class Packet:
    seq: int
    data: tuple[BitBlock, ...]
    parity: tuple[BitBlock, ...]
    degree_actual: tuple[int, ...] = ()

    def symbol_indices(self) -> range:
        return range(self.seq * len(self.data), (self.seq + 1) * len(self.data))

    def to_bytes(self, payload_width: int) -> bytes:
        size = (payload_width + 7) // 8
        header = HEADER.pack(self.seq, len(self.data), len(self.parity), payload_width)
        body = b"".join(v.to_bytes(size, "little") for v in (*self.data, *self.parity))
        return header + body

    @classmethod
    def from_bytes(cls, buf: bytes | memoryview, offset: int = 0) -> tuple["Packet", int]:
        """Parse one packet at `offset`; returns it with the offset just past it"""
        seq, segments, parities, width = HEADER.unpack_from(buf, offset)
        size = (width + 7) // 8
        pos = offset + HEADER.size
        end = pos + (segments + parities) * size
        if end > len(buf):
            raise ValueError(f"truncated packet {seq}: need {end - offset} bytes")
        values = [int.from_bytes(buf[pos + i * size:pos + (i + 1) * size], "little")
                  for i in range(segments + parities)]
        return cls(seq, tuple(values[:segments]), tuple(values[segments:])), end


def parity_indices(seq: int, slot: int, config: CodecConfig) -> list[int]:
    """
    Data-symbol indices combined into parity `slot` (1..m) of packet `seq`.

    Draws min(D, available) distinct indices from the trailing
    min(W, available) symbols by rejection sampling on the packet's reseeded
    generator. Packet 0 has nothing to protect and gets an empty set.
    """
    available = seq * config.segments
    size = min(config.window, available)
    if size == 0:
        return []
    start = available - size
    degree = min(config.D, size)
    if degree == size:
        return list(range(start, available))
    state = PrngState(derive_seed(config.seed, seq, slot))
    chosen: set[int] = set()
    while len(chosen) < degree:
        chosen.add(start + state.advance() % size)
    return sorted(chosen)


def reconstruct_indices(seq: int, config: CodecConfig) -> list[list[int]]:
    """Receiver side replay of every parity's index set for packet `seq`"""
    return [parity_indices(seq, slot, config) for slot in range(1, config.parities + 1)]


@dataclass
class EncoderState:
    window: deque[BitBlock]
    n: int = 0
    next_symbol: int = 0


def new_encoder_state(config: CodecConfig) -> EncoderState:
    return EncoderState(window=deque(maxlen=config.window))


def encode_next(state: EncoderState, data: list[BitBlock], config: CodecConfig) -> tuple[EncoderState, Packet]:
    """Emit packet `state.n` carrying `data`; the state is only advanced on success"""
    if len(data) != config.segments:
        raise EncodingError(f"packet {state.n}: expected {config.segments} segments, got {len(data)}")
    limit = 1 << config.payload_width
    for i, value in enumerate(data):
        if not 0 <= value < limit:
            raise EncodingError(f"packet {state.n}: segment {i} does not fit in {config.payload_width} bits")

    base = state.next_symbol - len(state.window)
    parity = []
    degrees = []
    for slot in range(1, config.parities + 1):
        indices = parity_indices(state.n, slot, config)
        value = 0
        for idx in indices:
            value ^= state.window[idx - base]
        parity.append(value)
        degrees.append(len(indices))

    packet = Packet(state.n, tuple(data), tuple(parity), tuple(degrees))
    state.window.extend(data)
    state.next_symbol += len(data)
    state.n += 1
    return state, packet


class SlidingWindowEncoder:
    """Stateful convenience wrapper around encode_next"""

    def __init__(self, config: CodecConfig):
        self.config = config
        self.state = new_encoder_state(config)

    def encode(self, data: list[BitBlock]) -> Packet:
        _, packet = encode_next(self.state, data, self.config)
        return packet

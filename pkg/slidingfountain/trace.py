"""
Binary channel traces.

A trace starts with `SWFT`, a format version byte and the codec configuration
as length-prefixed JSON, followed by one record per transmitted packet: a flag
byte (1 delivered, 0 lost) and the packet in its wire form. Lost packets are
kept so a replay can check recovered values bit for bit.
"""
import logging
import struct
from collections.abc import Iterable
from pathlib import Path
from types import TracebackType
from typing import BinaryIO

from pydantic import ValidationError

from slidingfountain.channel import Lost
from slidingfountain.codec import CodecConfig, Packet
from slidingfountain.decoder import DecoderConfig, Variant, make_decoder
from slidingfountain.errors import ConfigError, DecodingFault
from slidingfountain.metrics import RunMetrics, finalize

logger = logging.getLogger(__name__)

MAGIC = b"SWFT"
VERSION = 1
PREFIX = struct.Struct("<4sBI")


class TraceWriter:
    """Streams records to disk; its `record` fits `run_decoders(on_packet=...)`"""

    def __init__(self, path: str | Path, codec: CodecConfig):
        self.codec = codec
        self.count = 0
        self._fh: BinaryIO = open(path, "wb")
        header = codec.model_dump_json().encode()
        self._fh.write(PREFIX.pack(MAGIC, VERSION, len(header)))
        self._fh.write(header)

    def record(self, packet: Packet, delivered: bool) -> None:
        self._fh.write(b"\x01" if delivered else b"\x00")
        self._fh.write(packet.to_bytes(self.codec.payload_width))
        self.count += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, exc_type: type[BaseException] | None, exc: BaseException | None,
                 tb: TracebackType | None) -> None:
        self.close()


def write_trace(path: str | Path, codec: CodecConfig, records: Iterable[tuple[Packet, bool]]) -> int:
    with TraceWriter(path, codec) as writer:
        for packet, delivered in records:
            writer.record(packet, delivered)
        return writer.count


def read_trace(path: str | Path) -> tuple[CodecConfig, list[tuple[Packet, bool]]]:
    try:
        buf = Path(path).read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read trace {path}: {e}") from e
    if len(buf) < PREFIX.size:
        raise ConfigError(f"{path}: not a trace file")
    magic, version, length = PREFIX.unpack_from(buf)
    if magic != MAGIC or version != VERSION:
        raise ConfigError(f"{path}: not a version {VERSION} trace file")
    offset = PREFIX.size + length
    try:
        codec = CodecConfig.model_validate_json(buf[PREFIX.size:offset])
    except ValidationError as e:
        raise ConfigError(f"{path}: bad codec header: {e.errors()[0]['msg']}") from e

    records = []
    while offset < len(buf):
        flag = buf[offset]
        try:
            packet, offset = Packet.from_bytes(buf, offset + 1)
        except (ValueError, struct.error) as e:
            raise ConfigError(f"{path}: damaged record {len(records)}: {e}") from e
        if len(packet.data) != codec.segments or len(packet.parity) != codec.parities:
            raise ConfigError(f"{path}: packet {packet.seq} does not match the codec header")
        records.append((packet, flag == 1))
    return codec, records


def replay_trace(path: str | Path, variant: Variant = Variant.GE, d_max: int | None = None) -> RunMetrics:
    """
    Decode a recorded trace feeding only the delivered packets, the way a
    gateway would see them; losses come from sequence gaps.
    """
    codec, records = read_trace(path)
    if not records:
        raise ConfigError(f"{path}: trace has no packets")
    try:
        config = DecoderConfig(variant=variant, d_max=d_max, codec=codec)
    except ValidationError as e:
        raise ConfigError(e.errors()[0]["msg"], key="d_max") from e
    decoder = make_decoder(config)

    sent: dict[int, int] = {}
    losses: list[int] = []
    for packet, delivered in records:
        if delivered:
            decoder.receive(packet)
            continue
        for i, idx in enumerate(packet.symbol_indices()):
            sent[idx] = packet.data[i]
            losses.append(idx)
    last = records[-1][0].seq
    for seq in range(decoder.state.clock + 1, last + 1):
        decoder.ingest(Lost(seq))

    events = decoder.state.recovered_log
    for e in events:
        if sent.get(e.symbol) != e.value:
            raise DecodingFault(f"{config.label}: symbol {e.symbol} recovered with a wrong value")
    logger.debug("replayed %d packets from %s with %s", len(records), path, config.label)
    samples = [s for s, _ in decoder.samples]
    return finalize(len(records) * codec.segments, losses, events, samples, **decoder.counters())

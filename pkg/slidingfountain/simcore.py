"""
Experiment engine: payload source -> encoder -> channel -> decoder(s) -> metrics.

A run is a pure function of (ExperimentSpec, seed). The payload, parity index
and channel streams are derived from the run seed with different tags, so
changing the channel never changes which symbols the encoder combines.
"""
import hashlib
import json
import logging
from collections.abc import Callable, Iterable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from slidingfountain.channel import BernoulliChannel, ChannelConfig, ErasureChannel, Lost, SlottedAlohaChannel
from slidingfountain.codec import CodecConfig, Packet, PrngState, SlidingWindowEncoder, derive_seed
from slidingfountain.decoder import DecoderConfig, Variant, make_decoder
from slidingfountain.errors import ConfigError, DecodingFault
from slidingfountain.metrics import RunMetrics, aggregate, finalize

logger = logging.getLogger(__name__)

TAG_CODEC = 0xC0DEC
TAG_CHANNEL = 0xC4A77E1
TAG_PAYLOAD = 0xDA7A

J = TypeVar("J")
T = TypeVar("T")

# parameters a sweep can move; see with_axis
AXES = ("p_e", "window", "density", "degree", "rate", "parities", "d_max", "devices", "slots")


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    codec: CodecConfig = Field(default_factory=CodecConfig)
    channel: ChannelConfig = Field(default_factory=BernoulliChannel)
    decoder: DecoderConfig = Field(default_factory=DecoderConfig)
    n_packets: int = Field(default=100_000, ge=1)
    seeds: list[int] = Field(default_factory=lambda: list(range(10)), min_length=1)
    exclude_warmup: bool = False

    @model_validator(mode="after")
    def _check(self) -> "ExperimentSpec":
        if self.n_packets * self.codec.segments < 10 * self.codec.window:
            raise ValueError(f"n_packets {self.n_packets} is shorter than ten windows ({self.codec.window} symbols)")
        if self.decoder.codec != self.codec:
            raise ValueError("decoder codec differs from the experiment codec")
        return self

    def spec_hash(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode()).hexdigest()[:16]


def parameter_hash(parameters: Mapping[str, object]) -> str:
    """spec_hash for outputs that are not a single ExperimentSpec (recipes, analysis, replays)"""
    text = json.dumps(dict(parameters), sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def build_spec(
    codec: CodecConfig,
    channel: BernoulliChannel | SlottedAlohaChannel,
    variant: Variant = Variant.GE,
    d_max: int | None = None,
    n_packets: int = 100_000,
    seeds: Sequence[int] = tuple(range(10)),
    exclude_warmup: bool = False,
) -> ExperimentSpec:
    """Assemble a spec keeping the decoder's codec in step with the encoder's"""
    return ExperimentSpec(
        codec=codec,
        channel=channel,
        decoder=DecoderConfig(variant=variant, d_max=d_max, codec=codec),
        n_packets=n_packets,
        seeds=list(seeds),
        exclude_warmup=exclude_warmup,
    )


@dataclass
class RunOutcome:
    metrics: RunMetrics
    recovered: frozenset[int]
    max_delay: int
    losses: frozenset[int] = field(default_factory=frozenset)


def run(spec: ExperimentSpec, seed: int) -> RunMetrics:
    """One seeded end-to-end run"""
    return run_decoders(spec, seed, [spec.decoder])[spec.decoder.label].metrics


def stream_codec(spec: ExperimentSpec, seed: int) -> CodecConfig:
    """Codec of one run: the experiment codec with its seed mixed with the run seed"""
    return spec.codec.model_copy(update={"seed": derive_seed(spec.codec.seed, seed, TAG_CODEC)})


def run_decoders(
    spec: ExperimentSpec,
    seed: int,
    decoders: Sequence[DecoderConfig],
    on_packet: Callable[[Packet, bool], None] | None = None,
) -> dict[str, RunOutcome]:
    """
    Push one channel trace through several decoders at once, so their
    results are comparable symbol for symbol. Every recovered value is
    checked against what was sent. `on_packet` sees each packet with its
    delivered flag (trace recording).
    """
    codec = stream_codec(spec, seed)
    encoder = SlidingWindowEncoder(codec)
    channel = ErasureChannel(spec.channel, derive_seed(seed, TAG_CHANNEL), code_rate=codec.rate)
    payload = PrngState(derive_seed(seed, TAG_PAYLOAD))
    mask = (1 << codec.payload_width) - 1
    width_words = (codec.payload_width + 63) // 64

    labels = [d.label for d in decoders]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate decoders in comparison: {labels}")
    receivers = {d.label: make_decoder(d.model_copy(update={"codec": codec})) for d in decoders}

    l = codec.segments
    warmup = codec.window if spec.exclude_warmup else 0  # symbols
    sent: dict[int, int] = {}
    losses: list[int] = []
    for seq in range(spec.n_packets):
        data = []
        for _ in range(l):
            value = 0
            for _ in range(width_words):
                value = (value << 64) | payload.advance()
            data.append(value & mask)
        packet = encoder.encode(data)
        outcome = channel.transmit(packet)
        if on_packet is not None:
            on_packet(packet, not isinstance(outcome, Lost))
        if isinstance(outcome, Lost):
            for i, idx in enumerate(packet.symbol_indices()):
                sent[idx] = packet.data[i]
                if idx >= warmup:
                    losses.append(idx)
        for receiver in receivers.values():
            receiver.ingest(outcome)

    transmitted = spec.n_packets * l - warmup
    results = {}
    for label, receiver in receivers.items():
        events = [e for e in receiver.state.recovered_log if e.symbol >= warmup]
        for e in receiver.state.recovered_log:
            if sent.get(e.symbol) != e.value:
                raise DecodingFault(f"{label}: symbol {e.symbol} recovered with a wrong value (seed {seed})")
        samples = [s for s, _ in receiver.samples[warmup // l if warmup else 0:]]
        metrics = finalize(transmitted, losses, events, samples, **receiver.counters())
        results[label] = RunOutcome(
            metrics=metrics,
            recovered=frozenset(e.symbol for e in events),
            max_delay=max((e.delay for e in events), default=0),
            losses=frozenset(losses),
        )
        logger.debug("seed %d %s: drr=%.4f recovered=%d", seed, label, metrics.drr, metrics.recovered)
    return results


def with_axis(spec: ExperimentSpec, axis: str, value: float) -> ExperimentSpec:
    """Copy of `spec` with one scalar parameter moved; a value the models reject is a ConfigError"""
    if axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {', '.join(AXES)}", key="sweep_axis")
    try:
        return _moved(spec, axis, value)
    except ValidationError as e:
        raise ConfigError(f"{axis} = {value:g}: {e.errors()[0]['msg']}", key="sweep_values") from e


def _moved(spec: ExperimentSpec, axis: str, value: float) -> ExperimentSpec:
    codec = spec.codec
    channel = spec.channel
    decoder = spec.decoder
    if axis == "p_e":
        if not isinstance(channel, BernoulliChannel):
            raise ConfigError("p_e sweeps need the bernoulli channel", key="sweep_axis")
        channel = BernoulliChannel(**{**channel.model_dump(), "p_e": float(value)})
    elif axis == "window":
        codec = CodecConfig(**{**codec.model_dump(), "window": int(value), "degree": None,
                               "density": codec.density if codec.density is not None else codec.delta})
    elif axis == "density":
        codec = CodecConfig(**{**codec.model_dump(), "density": float(value), "degree": None})
    elif axis == "degree":
        codec = CodecConfig(**{**codec.model_dump(), "degree": int(value), "density": None})
    elif axis in ("rate", "parities"):
        parities = int(value) if axis == "parities" else _parities_for_rate(float(value), codec.segments)
        codec = CodecConfig(**{**codec.model_dump(), "parities": parities})
        # a pinned expansion rate follows the code rate it was pinned to
        if isinstance(channel, SlottedAlohaChannel) and channel.rate is not None:
            channel = SlottedAlohaChannel(**{**channel.model_dump(), "rate": codec.rate})
    elif axis == "d_max":
        decoder = DecoderConfig(variant=Variant.TRUNCATED_GE, d_max=int(value), codec=codec)
    else:
        if not isinstance(channel, SlottedAlohaChannel):
            raise ConfigError(f"{axis} sweeps need the slotted_aloha channel", key="sweep_axis")
        channel = SlottedAlohaChannel(**{**channel.model_dump(), axis: int(value)})
    return ExperimentSpec(
        codec=codec,
        channel=channel,
        decoder=decoder.model_copy(update={"codec": codec}),
        n_packets=spec.n_packets,
        seeds=spec.seeds,
        exclude_warmup=spec.exclude_warmup,
    )


def _parities_for_rate(rate: float, segments: int) -> int:
    parities = segments * (1.0 - rate) / rate
    if abs(parities - round(parities)) > 1e-6 or round(parities) < 1:
        raise ConfigError(f"rate {rate} is not l/(l+m) for l={segments}", key="sweep_values")
    return int(round(parities))


class SweepPoint(BaseModel):
    value: float
    runs: list[RunMetrics]
    seeds: list[int]
    stats: dict[str, tuple[float, float]]  # field -> (mean, stderr)


class SweepResult(BaseModel):
    axis: str
    points: list[SweepPoint]


def _run_job(job: tuple[ExperimentSpec, int]) -> RunMetrics:
    spec, seed = job
    return run(spec, seed)


def map_jobs(worker: Callable[[J], T], jobs: Sequence[J], threads: int = 1,
             progress: Callable[[int, int], None] | None = None) -> list[T]:
    """Apply a picklable `worker` to every job, in worker processes when threads > 1; results keep job order"""
    results: list[T] = []
    if threads <= 1 or len(jobs) <= 1:
        outputs: Iterable[T] = map(worker, jobs)
        for i, result in enumerate(outputs):
            results.append(result)
            if progress:
                progress(i + 1, len(jobs))
        return results
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for i, result in enumerate(pool.map(worker, jobs)):
            results.append(result)
            if progress:
                progress(i + 1, len(jobs))
    return results


def run_jobs(jobs: Sequence[tuple[ExperimentSpec, int]], threads: int = 1,
             progress: Callable[[int, int], None] | None = None) -> list[RunMetrics]:
    """Run (spec, seed) jobs; see map_jobs"""
    return map_jobs(_run_job, jobs, threads, progress)


def sweep(base: ExperimentSpec, axis: str, values: Sequence[float], threads: int = 1) -> SweepResult:
    """Run every (value, seed) pair and aggregate mean ± stderr per value"""
    if not values:
        raise ConfigError("sweep needs at least one value", key="sweep_values")
    specs = [with_axis(base, axis, v) for v in values]
    jobs = [(s, seed) for s in specs for seed in base.seeds]
    logger.info("sweep over %s: %d points x %d seeds", axis, len(values), len(base.seeds))
    results = run_jobs(jobs, threads, progress=lambda done, total: logger.info("run %d/%d done", done, total))

    n = len(base.seeds)
    points = []
    for i, value in enumerate(values):
        runs = results[i * n:(i + 1) * n]
        points.append(SweepPoint(value=float(value), runs=runs, seeds=list(base.seeds), stats=aggregate(runs)))
    return SweepResult(axis=axis, points=points)

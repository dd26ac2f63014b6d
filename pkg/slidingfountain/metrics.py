"""
Run metrics: data recovery rate, latency of recovered symbols and decoding
buffer size. Latency and delay are counted in packets.
"""
import logging
from collections import Counter
from collections.abc import Iterable, Sequence

import numpy as np
from pydantic import BaseModel, Field

from slidingfountain.decoder import RecoveryEvent
from slidingfountain.errors import UndefinedRunError

logger = logging.getLogger(__name__)

# scalar fields aggregated across seeds, in CSV column order
SCALAR_FIELDS = (
    "transmitted",
    "delivered_direct",
    "lost",
    "recovered",
    "drr",
    "drr_recovery_only",
    "latency_mean",
    "latency_p95",
    "latency_max",
    "buffer_mean",
    "buffer_max",
    "column_ops",
    "inactivations",
    "dependent_discards",
)


class RunMetrics(BaseModel):
    transmitted: int
    delivered_direct: int
    lost: int
    recovered: int
    drr: float
    drr_recovery_only: float
    latency_mean: float
    latency_p95: float
    latency_max: int
    latency_hist: dict[int, int] = Field(default_factory=dict)
    buffer_mean: float
    buffer_max: int
    column_ops: int = 0
    inactivations: int = 0
    dependent_discards: int = 0

    def scalars(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in SCALAR_FIELDS}


def finalize(
    transmitted: int,
    losses: Iterable[int],
    events: Iterable[RecoveryEvent],
    samples: Sequence[int],
    column_ops: int = 0,
    inactivations: int = 0,
    dependent_discards: int = 0,
) -> RunMetrics:
    """
    Fold one run's logs into metrics. `losses` are the lost data-symbol
    indices, `events` the decoder recoveries and `samples` the decoding-buffer
    size (unresolved symbols) after every ingest. Symbols still pending at the
    end count as unrecovered. The counters are the decoder's work totals
    (`Decoder.counters()`).
    """
    if transmitted <= 0:
        raise UndefinedRunError("run transmitted no data units")
    lost = len(set(losses))
    delays = [e.delay for e in events]
    recovered = len(delays)
    delivered = transmitted - lost

    if delays:
        arr = np.asarray(delays, dtype=float)
        latency_mean = float(arr.mean())
        latency_p95 = float(np.percentile(arr, 95))
        latency_max = int(arr.max())
    else:
        latency_mean = latency_p95 = 0.0
        latency_max = 0

    buffer = np.asarray(samples, dtype=float) if len(samples) else np.zeros(1)
    return RunMetrics(
        transmitted=transmitted,
        delivered_direct=delivered,
        lost=lost,
        recovered=recovered,
        drr=(delivered + recovered) / transmitted,
        drr_recovery_only=recovered / transmitted,
        latency_mean=latency_mean,
        latency_p95=latency_p95,
        latency_max=latency_max,
        latency_hist=dict(sorted(Counter(delays).items())),
        buffer_mean=float(buffer.mean()),
        buffer_max=int(buffer.max()),
        column_ops=column_ops,
        inactivations=inactivations,
        dependent_discards=dependent_discards,
    )


def normalize_latency(sweep: Sequence[tuple[float, float]]) -> tuple[list[tuple[float, float]], bool]:
    """
    Divide each mean latency by the smallest positive one. Returns the
    normalised sweep and a flag that is True when no point had positive
    latency (everything is then reported as 1.0).
    """
    if not sweep:
        raise ValueError("empty latency sweep")
    positive = [m for _, m in sweep if m > 0]
    if not positive:
        logger.warning("latency sweep has no recovered symbols; normalised values set to 1.0")
        return [(x, 1.0) for x, _ in sweep], True
    floor = min(positive)
    # points with nothing recovered have no latency to speak of; keep them at the floor
    return [(x, m / floor if m > 0 else 1.0) for x, m in sweep], False


def aggregate(runs: Sequence[RunMetrics]) -> dict[str, tuple[float, float]]:
    """Mean and standard error of every scalar field across seeds"""
    out = {}
    for name in SCALAR_FIELDS:
        values = np.asarray([getattr(r, name) for r in runs], dtype=float)
        stderr = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
        out[name] = (float(values.mean()), stderr)
    return out

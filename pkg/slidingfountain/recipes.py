"""
Built-in figure recipes.

Each recipe pins the parameters its figure states (R = 1/2, W = 50, Δ = 0.5
unless the figure varies them) and records every other choice (run length,
seeds, grids) in the CSV metadata.
"""
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from slidingfountain.analysis import feasibility_threshold, rate_curve
from slidingfountain.channel import BernoulliChannel
from slidingfountain.codec import CodecConfig
from slidingfountain.decoder import DecoderConfig, Variant
from slidingfountain.errors import ConfigError
from slidingfountain.metrics import RunMetrics, aggregate, normalize_latency
from slidingfountain.simcore import ExperimentSpec, build_spec, map_jobs, parameter_hash, run_decoders, run_jobs

logger = logging.getLogger(__name__)

WINDOW = 50
DENSITY = 0.5
D_MAX_VALUES = (25, 50, 100)
MEMORY_VALUES = (10, 20, 50, 100)
PARITY_VALUES = (1, 2, 3)  # R = 1/2, 1/3, 1/4 with one segment
DENSITY_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))
DENSITY_LOSSES = (0.1, 0.2, 0.3)
LOSS_GRID = tuple(round(0.05 * i, 2) for i in range(1, 15))
ANALYSIS_GRID = tuple(round(0.01 * i, 2) for i in range(0, 36))


@dataclass
class RecipeResult:
    frame: pd.DataFrame
    metadata: dict[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class RunPlan:
    seeds: Sequence[int]
    packets: int
    threads: int = 1


def _codec(window: int = WINDOW, parities: int = 1, density: float = DENSITY) -> CodecConfig:
    return CodecConfig(window=window, density=density, parities=parities)


def _spec(codec: CodecConfig, p_e: float, plan: RunPlan) -> ExperimentSpec:
    return build_spec(codec, BernoulliChannel(p_e=p_e), Variant.GE, n_packets=plan.packets, seeds=plan.seeds)


def _plot_meta(x: str, y: str, series: str, xlabel: str, ylabel: str, title: str,
               yerr: str | None = None) -> dict[str, object]:
    meta: dict[str, object] = {
        "plot_x": x, "plot_y": y, "plot_series": series,
        "plot_xlabel": xlabel, "plot_ylabel": ylabel, "plot_title": title,
    }
    if yerr:
        meta["plot_yerr"] = yerr
    return meta


def _run_meta(name: str, plan: RunPlan, **parameters: object) -> dict[str, object]:
    meta: dict[str, object] = {"recipe": name, "packets": plan.packets, "seeds": " ".join(map(str, plan.seeds))}
    meta.update(parameters)
    meta["spec_hash"] = parameter_hash(meta)
    return meta


def _grid(values: Sequence[float]) -> str:
    return " ".join(f"{v:g}" for v in values)


def _drr_grid(name: str, plan: RunPlan, series: str, codecs: dict[object, CodecConfig],
              losses: Sequence[float]) -> pd.DataFrame:
    points = [(key, p, _spec(codec, p, plan)) for key, codec in codecs.items() for p in losses]
    jobs = [(spec, seed) for _, _, spec in points for seed in plan.seeds]
    logger.info("%s: %d runs", name, len(jobs))
    results = run_jobs(jobs, plan.threads)
    n = len(plan.seeds)
    rows = []
    for i, (key, p, _) in enumerate(points):
        stats = aggregate(results[i * n:(i + 1) * n])
        rows.append({series: key, "p_e": p, "drr": stats["drr"][0], "drr_stderr": stats["drr"][1]})
    return pd.DataFrame(rows, columns=[series, "p_e", "drr", "drr_stderr"])


def memory(plan: RunPlan, losses: Sequence[float] = LOSS_GRID,
           windows: Sequence[int] = MEMORY_VALUES) -> RecipeResult:
    """DRR against loss for a few memory sizes"""
    frame = _drr_grid("memory", plan, "window", {w: _codec(window=w) for w in windows}, losses)
    meta = _run_meta("memory", plan, rate="1/2", density=DENSITY, decoder="ge",
                     windows=_grid(windows), p_e_grid=_grid(losses))
    meta.update(_plot_meta("p_e", "drr", "window", "packet loss p_e", "data recovery rate",
                           "DRR for different memory W", yerr="drr_stderr"))
    return RecipeResult(frame, meta)


def code_rate(plan: RunPlan, losses: Sequence[float] = LOSS_GRID,
              parities: Sequence[int] = PARITY_VALUES) -> RecipeResult:
    """DRR against loss for R = 1/2, 1/3, 1/4"""
    codecs = {f"1/{m + 1}": _codec(parities=m) for m in parities}
    frame = _drr_grid("code_rate", plan, "rate", codecs, losses)
    meta = _run_meta("code_rate", plan, window=WINDOW, density=DENSITY, decoder="ge",
                     rates=" ".join(codecs), p_e_grid=_grid(losses))
    meta.update(_plot_meta("p_e", "drr", "rate", "packet loss p_e", "data recovery rate",
                           "DRR for different code rates", yerr="drr_stderr"))
    return RecipeResult(frame, meta)


def delta(plan: RunPlan, densities: Sequence[float] = DENSITY_GRID,
          losses: Sequence[float] = DENSITY_LOSSES) -> RecipeResult:
    """Mean latency of recovered symbols against Δ, normalised per loss by its smallest value"""
    points = [(p, d, _spec(_codec(density=d), p, plan)) for p in losses for d in densities]
    jobs = [(spec, seed) for _, _, spec in points for seed in plan.seeds]
    logger.info("delta: %d runs", len(jobs))
    results = run_jobs(jobs, plan.threads)
    n = len(plan.seeds)
    stats = [aggregate(results[i * n:(i + 1) * n]) for i in range(len(points))]

    rows = []
    degenerate = []
    for p in losses:
        idx = [i for i, (q, _, _) in enumerate(points) if q == p]
        sweep = [(points[i][1], stats[i]["latency_mean"][0]) for i in idx]
        normalised, flat = normalize_latency(sweep)
        if flat:
            degenerate.append(f"{p:g}")
        floor = min((m for _, m in sweep if m > 0), default=1.0)
        for i, (d, value) in zip(idx, normalised):
            mean, stderr = stats[i]["latency_mean"]
            rows.append({"p_e": p, "density": d, "latency_norm": value,
                         "latency_norm_stderr": stderr / floor if mean > 0 else 0.0, "latency_mean": mean})
    frame = pd.DataFrame(rows, columns=["p_e", "density", "latency_norm", "latency_norm_stderr", "latency_mean"])
    meta = _run_meta("delta", plan, rate="1/2", window=WINDOW, decoder="ge",
                     density_grid=_grid(densities), p_e_values=_grid(losses))
    meta["degenerate"] = " ".join(degenerate) or "none"
    meta.update(_plot_meta("density", "latency_norm", "p_e", "parity density Δ", "normalised mean latency",
                           "Latency of recovered data against Δ", yerr="latency_norm_stderr"))
    return RecipeResult(frame, meta)


def max_code_rate(plan: RunPlan | None = None, losses: Sequence[float] = ANALYSIS_GRID) -> RecipeResult:
    """Largest usable code rate with and without payload expansion (closed form)"""
    rows = []
    for p, plain, expanded in rate_curve(list(losses)):
        rows.append({"p_e": p, "curve": "no_expansion", "r_max": plain})
        rows.append({"p_e": p, "curve": "expansion", "r_max": expanded if expanded is not None else np.nan})
    frame = pd.DataFrame(rows, columns=["p_e", "curve", "r_max"])
    meta: dict[str, object] = {"recipe": "max_code_rate", "seeds": "none", "p_e_grid": _grid(losses),
                               "threshold": f"{feasibility_threshold():.6f}"}
    meta["spec_hash"] = parameter_hash(meta)
    meta.update(_plot_meta("p_e", "r_max", "curve", "packet loss p_e", "maximum code rate",
                           "Maximum effective code rate"))
    return RecipeResult(frame, meta)


def _compare_job(job: tuple[ExperimentSpec, int, tuple[DecoderConfig, ...]]) -> dict[str, RunMetrics]:
    spec, seed, decoders = job
    return {label: outcome.metrics for label, outcome in run_decoders(spec, seed, decoders).items()}


def _truncation(name: str, plan: RunPlan, y: str, ylabel: str, title: str,
                losses: Sequence[float], d_max_values: Sequence[int]) -> RecipeResult:
    codec = _codec()
    decoders = (DecoderConfig(variant=Variant.GE, codec=codec),) + tuple(
        DecoderConfig(variant=Variant.TRUNCATED_GE, d_max=d, codec=codec) for d in d_max_values
    )
    specs = [_spec(codec, p, plan) for p in losses]
    jobs = [(spec, seed, decoders) for spec in specs for seed in plan.seeds]
    logger.info("%s: %d runs of %d decoders", name, len(jobs), len(decoders))
    results = map_jobs(_compare_job, jobs, plan.threads)

    n = len(plan.seeds)
    rows = []
    for i, p in enumerate(losses):
        chunk = results[i * n:(i + 1) * n]
        for decoder in decoders:
            stats = aggregate([r[decoder.label] for r in chunk])
            rows.append({"decoder": decoder.label, "p_e": p, y: stats[y][0], f"{y}_stderr": stats[y][1]})
    frame = pd.DataFrame(rows, columns=["decoder", "p_e", y, f"{y}_stderr"])
    meta = _run_meta(name, plan, rate="1/2", window=WINDOW, density=DENSITY,
                     d_max_packets=_grid(d_max_values), p_e_grid=_grid(losses))
    meta.update(_plot_meta("p_e", y, "decoder", "packet loss p_e", ylabel, title, yerr=f"{y}_stderr"))
    return RecipeResult(frame, meta)


def truncated_drr(plan: RunPlan, losses: Sequence[float] = LOSS_GRID,
                  d_max_values: Sequence[int] = D_MAX_VALUES) -> RecipeResult:
    return _truncation("truncated_drr", plan, "drr", "data recovery rate",
                       "DRR with a maximum decoding delay", losses, d_max_values)


def latency(plan: RunPlan, losses: Sequence[float] = LOSS_GRID,
            d_max_values: Sequence[int] = D_MAX_VALUES) -> RecipeResult:
    return _truncation("latency", plan, "latency_mean", "mean latency of recovered data (packets)",
                       "Average latency of recovered data", losses, d_max_values)


def buffer(plan: RunPlan, losses: Sequence[float] = LOSS_GRID,
           d_max_values: Sequence[int] = D_MAX_VALUES) -> RecipeResult:
    return _truncation("buffer", plan, "buffer_mean", "mean decoding buffer (symbols)",
                       "Size of the decoding problem", losses, d_max_values)


RECIPES: dict[str, Callable[[RunPlan], RecipeResult]] = {
    "memory": memory,
    "delta": delta,
    "code_rate": code_rate,
    "max_code_rate": max_code_rate,
    "truncated_drr": truncated_drr,
    "latency": latency,
    "buffer": buffer,
}


def run_recipe(name: str, plan: RunPlan) -> RecipeResult:
    if name not in RECIPES:
        raise ConfigError(f"unknown figure {name!r}; expected one of {', '.join(RECIPES)}", key="figure")
    return RECIPES[name](plan)

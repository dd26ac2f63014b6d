"""
sliding-fountain command line: simulate, sweep, analyze, reproduce, replay.

CSV goes to stdout (or files under --out-dir for reproduce), logs and errors
to stderr. Exit codes: 0 success, 1 usage or configuration error, 2 runtime
fault.
"""
import hashlib
import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated

import pandas as pd
import typer
from rich.console import Console
from rich.markup import escape

from slidingfountain import __version__
from slidingfountain.analysis import max_effective_rate
from slidingfountain.channel import loss_probability
from slidingfountain.decoder import Variant
from slidingfountain.errors import ConfigError, DecodingFault, EncodingError, OrderingError, UndefinedRunError
from slidingfountain.experiment import ExperimentFile, load_experiment
from slidingfountain.metrics import SCALAR_FIELDS, RunMetrics, aggregate
from slidingfountain.plotting import plot_csv, write_csv
from slidingfountain.recipes import RECIPES, RunPlan, run_recipe
from slidingfountain.settings import configure_logging, get_settings
from slidingfountain.simcore import (
    ExperimentSpec,
    parameter_hash,
    run_decoders,
    run_jobs,
    stream_codec,
    sweep,
    with_axis,
)
from slidingfountain.trace import TraceWriter, replay_trace

logger = logging.getLogger(__name__)
console = Console(stderr=True)

app = typer.Typer(help="Sliding-window fountain code simulator", add_completion=False, no_args_is_help=True)

# columns of `simulate`, fixed whatever the data
SIMULATE_METRICS = (
    "transmitted", "delivered_direct", "recovered", "drr", "drr_recovery_only",
    "latency_mean", "latency_p95", "buffer_mean", "buffer_max",
    "column_ops", "inactivations", "dependent_discards",
)
POINT_COLUMNS = ("axis", "value", "window", "degree", "rate", "loss", "decoder")

USAGE_EXIT = 1
FAULT_EXIT = 2
# click leaves with this on a usage error; faults never reach SystemExit
CLICK_USAGE_EXIT = 2

Seeds = Annotated[int | None, typer.Option("--seeds", min=1, help="Seed count (runs use seeds 0..N-1)")]
Packets = Annotated[int | None, typer.Option("--packets", min=1, help="Packets per run")]
Threads = Annotated[int | None, typer.Option("--threads", min=1, help="Worker processes")]
OutDir = Annotated[Path | None, typer.Option("--out-dir", help="Directory for CSV and SVG output")]


@contextmanager
def exit_codes() -> Iterator[None]:
    """
    Report library errors on stderr. Configuration and input errors leave
    with exit code 1 through typer; runtime faults are re-raised for `main`,
    which turns them into exit code 2.
    """
    try:
        yield
    except (ConfigError, EncodingError, OrderingError) as e:
        console.print(f"[red]error:[/red] {escape(str(e))}", highlight=False)
        raise typer.Exit(USAGE_EXIT) from e
    except (DecodingFault, UndefinedRunError) as e:
        console.print(f"[red]fault:[/red] {escape(str(e))}", highlight=False)
        raise


@app.callback()
def _setup(
    log_level: Annotated[str | None, typer.Option("--log-level", help="Logging level for stderr")] = None,
) -> None:
    configure_logging(log_level or get_settings().log_level)


def _load(path: Path, seeds: int | None, packets: int | None) -> ExperimentFile:
    settings = get_settings()
    defaults = {"n_packets": settings.packets, "seeds": list(range(settings.seeds))}
    return load_experiment(path, defaults).with_overrides(seeds=seeds, packets=packets)


def _metadata(command: str, spec: ExperimentSpec, **extra: object) -> dict[str, object]:
    meta: dict[str, object] = {
        "command": command,
        "version": __version__,
        "spec_hash": spec.spec_hash(),
        "seeds": " ".join(map(str, spec.seeds)),
        "packets": spec.n_packets,
    }
    meta.update(extra)
    return meta


def _point(spec: ExperimentSpec, axis: str | None, value: float | None) -> dict[str, object]:
    return {
        "axis": axis or "",
        "value": "" if value is None else value,
        "window": spec.codec.window,
        "degree": spec.codec.D,
        "rate": spec.codec.rate,
        "loss": loss_probability(spec.channel, spec.codec.rate),
        "decoder": spec.decoder.label,
    }


def _simulate_rows(spec: ExperimentSpec, axis: str | None, value: float | None,
                   runs: list[RunMetrics]) -> list[dict[str, object]]:
    point = _point(spec, axis, value)
    rows = []
    for seed, metrics in zip(spec.seeds, runs):
        rows.append({**point, "row": "run", "seed": str(seed), **{f: getattr(metrics, f) for f in SIMULATE_METRICS}})
    stats = aggregate(runs)
    for i, name in enumerate(("mean", "stderr")):
        rows.append({**point, "row": name, "seed": "", **{f: stats[f][i] for f in SIMULATE_METRICS}})
    return rows


def cmd_simulate(file: ExperimentFile, threads: int = 1, trace_out: Path | None = None) -> tuple[pd.DataFrame, dict]:
    """One row per (point, seed) plus mean and stderr rows per point"""
    base = file.spec
    points: list[tuple[ExperimentSpec, float | None]]
    if file.axis:
        points = [(with_axis(base, file.axis, v), v) for v in file.values]
    else:
        points = [(base, None)]
    jobs = [(spec, seed) for spec, _ in points for seed in spec.seeds]

    results: list[RunMetrics] = []
    if trace_out is not None:
        spec, seed = jobs[0]
        with TraceWriter(trace_out, stream_codec(spec, seed)) as writer:
            first = run_decoders(spec, seed, [spec.decoder], on_packet=writer.record)
        results.append(first[spec.decoder.label].metrics)
        logger.info("trace of seed %d written to %s (%d packets)", seed, trace_out, writer.count)
        jobs = jobs[1:]
    results += run_jobs(jobs, threads)

    rows = []
    n = len(base.seeds)
    for i, (spec, value) in enumerate(points):
        rows += _simulate_rows(spec, file.axis, value, results[i * n:(i + 1) * n])
    frame = pd.DataFrame(rows, columns=[*POINT_COLUMNS, "row", "seed", *SIMULATE_METRICS])
    meta = _metadata("simulate", base, sweep_axis=file.axis or "none",
                     sweep_values=" ".join(f"{v:g}" for v in file.values) or "none")
    return frame, meta


def cmd_sweep(file: ExperimentFile, threads: int = 1) -> tuple[pd.DataFrame, dict]:
    """One row per sweep point with mean and standard error of every metric"""
    if not file.axis:
        raise ConfigError("sweep needs sweep_axis and sweep_values in the experiment file", key="sweep_axis")
    result = sweep(file.spec, file.axis, file.values, threads)
    rows = []
    for point in result.points:
        row: dict[str, object] = {"axis": result.axis, "value": point.value}
        for name in SCALAR_FIELDS:
            row[name], row[f"{name}_stderr"] = point.stats[name]
        rows.append(row)
    columns = ["axis", "value"] + [c for name in SCALAR_FIELDS for c in (name, f"{name}_stderr")]
    meta = _metadata("sweep", file.spec, sweep_axis=file.axis)
    meta.update({"plot_x": "value", "plot_y": "drr", "plot_xlabel": file.axis, "plot_ylabel": "data recovery rate",
                 "plot_yerr": "drr_stderr"})
    return pd.DataFrame(rows, columns=columns), meta


def cmd_analyze(p_values: list[float]) -> pd.DataFrame:
    """(p_e, 1 − p_e, R_max, feasible) per loss probability"""
    rows = []
    for p in p_values:
        if not 0.0 <= p < 1.0:
            raise ConfigError(f"loss probability {p} outside [0, 1)", key="p_e")
        result = max_effective_rate(p)
        rows.append({
            "p_e": p,
            "one_minus_p_e": 1.0 - p,
            "r_max": "" if result.r_max is None else result.r_max,
            "feasible": "yes" if result.feasible else "no",
        })
    return pd.DataFrame(rows, columns=["p_e", "one_minus_p_e", "r_max", "feasible"])


def cmd_reproduce(figure: str, plan: RunPlan, out_dir: Path) -> tuple[Path, Path]:
    """Run a figure recipe, write <figure>.csv and the SVG drawn from it"""
    result = run_recipe(figure, plan)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{figure}.csv"
    meta = {"command": "reproduce", "version": __version__, **result.metadata}
    write_csv(result.frame, meta, csv_path)
    svg_path = plot_csv(csv_path, out_dir / f"{figure}.svg")
    return csv_path, svg_path


@app.command()
def simulate(
    experiment: Annotated[Path, typer.Argument(help="Experiment file")],
    seeds: Seeds = None,
    packets: Packets = None,
    threads: Threads = None,
    trace_out: Annotated[Path | None, typer.Option("--trace-out", help="Write the first run's channel trace")] = None,
) -> None:
    """Run an experiment file, one CSV row per (point, seed) plus aggregates"""
    with exit_codes():
        file = _load(experiment, seeds, packets)
        frame, meta = cmd_simulate(file, threads or get_settings().threads, trace_out)
        write_csv(frame, meta, sys.stdout)


@app.command("sweep")
def sweep_command(
    experiment: Annotated[Path, typer.Argument(help="Experiment file with sweep_axis and sweep_values")],
    seeds: Seeds = None,
    packets: Packets = None,
    threads: Threads = None,
    out_dir: OutDir = None,
) -> None:
    """Aggregate a parameter sweep; with --out-dir also writes CSV and SVG files"""
    with exit_codes():
        file = _load(experiment, seeds, packets)
        frame, meta = cmd_sweep(file, threads or get_settings().threads)
        write_csv(frame, meta, sys.stdout)
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            csv_path = out_dir / f"{experiment.stem}.csv"
            write_csv(frame, meta, csv_path)
            plot_csv(csv_path, csv_path.with_suffix(".svg"))


@app.command()
def analyze(
    p_values: Annotated[list[float], typer.Argument(help="Nominal loss probabilities in [0, 1)")],
) -> None:
    """Closed-form maximum code rate with and without payload expansion"""
    with exit_codes():
        frame = cmd_analyze(p_values)
        meta = {"command": "analyze", "version": __version__,
                "spec_hash": parameter_hash({"p_e": p_values}), "seeds": "none"}
        write_csv(frame, meta, sys.stdout)


@app.command()
def reproduce(
    figure: Annotated[str, typer.Argument(help=f"One of: {', '.join(RECIPES)}")],
    seeds: Seeds = None,
    packets: Packets = None,
    threads: Threads = None,
    out_dir: OutDir = None,
) -> None:
    """Run a built-in figure recipe and write <figure>.csv and <figure>.svg"""
    with exit_codes():
        settings = get_settings()
        plan = RunPlan(
            seeds=list(range(seeds or settings.seeds)),
            packets=packets or settings.packets,
            threads=threads or settings.threads,
        )
        csv_path, svg_path = cmd_reproduce(figure, plan, out_dir or Path(settings.out_dir))
        console.print(f"wrote {csv_path} and {svg_path}", highlight=False)


@app.command()
def replay(
    trace: Annotated[Path, typer.Argument(help="Trace file written by simulate --trace-out")],
    decoder: Annotated[Variant, typer.Option("--decoder", help="Decoder variant")] = Variant.GE,
    d_max: Annotated[int | None, typer.Option("--d-max", min=1, help="Delay limit in packets (truncated_ge)")] = None,
) -> None:
    """Decode a recorded trace from its delivered packets only"""
    with exit_codes():
        metrics = replay_trace(trace, decoder, d_max)
        label = f"{decoder}_{d_max}" if decoder is Variant.TRUNCATED_GE else str(decoder)
        frame = pd.DataFrame([{"trace": trace.name, "decoder": label, **metrics.scalars()}],
                             columns=["trace", "decoder", *SCALAR_FIELDS])
        digest = hashlib.sha256(trace.read_bytes()).hexdigest()
        meta = {"command": "replay", "version": __version__,
                "spec_hash": parameter_hash({"trace": digest, "decoder": label}), "seeds": "recorded"}
        write_csv(frame, meta, sys.stdout)


def main(argv: list[str] | None = None) -> int:
    """Console entry point; returns the process exit code"""
    try:
        app(args=argv, prog_name="sliding-fountain", standalone_mode=True)
    except (DecodingFault, UndefinedRunError):
        return FAULT_EXIT
    except SystemExit as e:
        if e.code is None:
            return 0
        if not isinstance(e.code, int):
            return USAGE_EXIT
        return USAGE_EXIT if e.code == CLICK_USAGE_EXIT else e.code
    return 0

"""
CSV output with `# key: value` metadata headers, and SVG line plots drawn
from those CSV files alone.
"""
import io
import logging
from pathlib import Path
from typing import TextIO

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

# keeps SVG element ids stable between runs
matplotlib.rcParams["svg.hashsalt"] = "sliding-fountain"


def render_csv(frame: pd.DataFrame, metadata: dict[str, object]) -> str:
    buf = io.StringIO()
    for key, value in metadata.items():
        buf.write(f"# {key}: {value}\n")
    frame.to_csv(buf, index=False, lineterminator="\n")
    return buf.getvalue()


def write_csv(frame: pd.DataFrame, metadata: dict[str, object], out: TextIO | str | Path) -> None:
    text = render_csv(frame, metadata)
    if isinstance(out, (str, Path)):
        Path(out).write_text(text)
    else:
        out.write(text)


def read_csv(path: str | Path) -> tuple[pd.DataFrame, dict[str, str]]:
    """Data rows plus the metadata header"""
    metadata: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            metadata[key.strip()] = value.strip()
    return pd.read_csv(path, comment="#"), metadata


def plot_csv(csv_path: str | Path, svg_path: str | Path) -> Path:
    """
    Draw one line per value of the `plot_series` column, `plot_y` against
    `plot_x`, with error bars from `plot_yerr` when the header names one.
    """
    frame, meta = read_csv(csv_path)
    x, y = meta["plot_x"], meta["plot_y"]
    series = meta.get("plot_series")
    yerr = meta.get("plot_yerr")

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    groups = frame.groupby(series, sort=True) if series else [(None, frame)]
    for name, group in groups:
        group = group.sort_values(x)
        label = f"{series} = {name}" if series else None
        if yerr and yerr in group:
            ax.errorbar(group[x], group[y], yerr=group[yerr], marker="o", markersize=3, capsize=2, label=label)
        else:
            ax.plot(group[x], group[y], marker="o", markersize=3, label=label)
    ax.set_xlabel(meta.get("plot_xlabel", x))
    ax.set_ylabel(meta.get("plot_ylabel", y))
    if "plot_title" in meta:
        ax.set_title(meta["plot_title"])
    ax.grid(True)
    if series:
        ax.legend()

    svg_path = Path(svg_path)
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("wrote %s", svg_path)
    return svg_path

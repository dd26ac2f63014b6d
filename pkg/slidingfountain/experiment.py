"""
Experiment files: `key = value` lines, `#` starts a comment. Every physical
quantity names its unit in the key. Example:

    window_symbols = 50
    density = 0.5
    parities_per_packet = 1
    channel = bernoulli
    loss_probability = 0.2
    decoder = truncated_ge
    d_max_packets = 25
    run_length_packets = 100000
    seed_count = 10
    sweep_axis = p_e
    sweep_values = 0.1, 0.2, 0.3
"""
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from slidingfountain.errors import ConfigError
from slidingfountain.simcore import AXES, ExperimentSpec


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _floats(text: str) -> list[float]:
    values = []
    for v in text.replace(",", " ").split():
        if "/" in v:
            num, den = v.split("/", 1)
            values.append(float(num) / float(den))
        else:
            values.append(float(v))
    return values


# key -> (section, field, parser)
KEYS: dict[str, tuple[str, str, Callable[[str], Any]]] = {
    "window_symbols": ("codec", "window", int),
    "degree_symbols": ("codec", "degree", int),
    "density": ("codec", "density", float),
    "segments_per_packet": ("codec", "segments", int),
    "parities_per_packet": ("codec", "parities", int),
    "codec_seed": ("codec", "seed", int),
    "payload_width_bits": ("codec", "payload_width", int),
    "channel": ("channel", "model", str),
    "loss_probability": ("channel", "p_e", float),
    "devices": ("channel", "devices", int),
    "slots": ("channel", "slots", int),
    "channel_rate": ("channel", "rate", float),
    "decoder": ("decoder", "variant", str),
    "d_max_packets": ("decoder", "d_max", int),
    "run_length_packets": ("run", "n_packets", int),
    "seeds": ("run", "seeds", _ints),
    "seed_count": ("run", "seed_count", int),
    "exclude_warmup": ("run", "exclude_warmup", _bool),
    "sweep_axis": ("sweep", "axis", str),
    "sweep_values": ("sweep", "values", _floats),
}


@dataclass
class ExperimentFile:
    spec: ExperimentSpec
    axis: str | None = None
    values: list[float] = field(default_factory=list)
    lines: dict[str, int] = field(default_factory=dict)

    def with_overrides(self, seeds: int | None = None, packets: int | None = None) -> "ExperimentFile":
        update: dict[str, Any] = {}
        if seeds is not None:
            update["seeds"] = list(range(seeds))
        if packets is not None:
            update["n_packets"] = packets
        if not update:
            return self
        try:
            spec = ExperimentSpec(**{**self.spec.model_dump(), **update})
        except ValidationError as e:
            raise ConfigError(e.errors()[0]["msg"]) from e
        return ExperimentFile(spec, self.axis, self.values, self.lines)


def parse_experiment(text: str, defaults: dict[str, Any] | None = None) -> ExperimentFile:
    """Parse and validate an experiment document; errors name the key and line"""
    raw: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"expected 'key = value', got {content!r}", line=number)
        key, value = (part.strip() for part in content.split("=", 1))
        key = key.lower()
        if key not in KEYS:
            raise ConfigError("unknown key", key=key, line=number)
        if key in lines:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", key=key, line=number)
        try:
            raw[key] = KEYS[key][2](value)
        except ValueError as e:
            raise ConfigError(f"bad value {value!r}: {e}", key=key, line=number) from e
        lines[key] = number

    sections: dict[str, dict[str, Any]] = {"codec": {}, "channel": {}, "decoder": {}, "run": {}, "sweep": {}}
    for key, value in raw.items():
        section, name, _ = KEYS[key]
        sections[section][name] = value

    run = dict(defaults or {})
    run.update(sections["run"])
    if "seed_count" in run:
        if "seeds" in sections["run"]:
            raise ConfigError("give either seeds or seed_count", key="seed_count", line=lines.get("seed_count"))
        run["seeds"] = list(range(run.pop("seed_count")))
    channel = {"model": "bernoulli", **sections["channel"]}

    try:
        spec = ExperimentSpec(
            codec=sections["codec"],
            channel=channel,
            decoder={**sections["decoder"], "codec": sections["codec"]},
            **run,
        )
    except ValidationError as e:
        raise _config_error(e, lines) from e

    axis = sections["sweep"].get("axis")
    values = sections["sweep"].get("values", [])
    if axis is not None and axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}", key="sweep_axis", line=lines["sweep_axis"])
    if (axis is None) != (not values):
        key = "sweep_values" if axis is not None else "sweep_axis"
        line = lines.get("sweep_axis") or lines.get("sweep_values")
        raise ConfigError("sweep_axis and sweep_values go together", key=key, line=line)
    return ExperimentFile(spec=spec, axis=axis, values=values, lines=lines)


def load_experiment(path: str | Path, defaults: dict[str, Any] | None = None) -> ExperimentFile:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read experiment file {path}: {e}") from e
    return parse_experiment(text, defaults)


def _config_error(error: ValidationError, lines: dict[str, int]) -> ConfigError:
    first = error.errors()[0]
    loc = [str(p) for p in first["loc"]]
    field_name = loc[-1] if loc else ""
    section = loc[0] if loc else ""
    for key, (sec, name, _) in KEYS.items():
        if name == field_name and (sec == section or section not in ("codec", "channel", "decoder")):
            return ConfigError(first["msg"], key=key, line=lines.get(key))
    return ConfigError(f"{'.'.join(loc) or 'experiment'}: {first['msg']}")

#!/usr/bin/env python3
"""Command line: CSV schemas, exit codes and reproducibility"""
import dataclasses
import io

import pandas as pd
import pytest
import typer
from typer.testing import CliRunner

from slidingfountain.cli import SIMULATE_METRICS, app, exit_codes, main
from slidingfountain.codec import CodecConfig
from slidingfountain.errors import ConfigError, DecodingFault, UndefinedRunError
from slidingfountain.plotting import plot_csv, read_csv
from slidingfountain.trace import write_trace

runner = CliRunner()


def frame(text: str) -> pd.DataFrame:
    return pd.read_csv(io.StringIO(text), comment="#")


def metadata(text: str) -> dict[str, str]:
    return {k.strip(): v.strip() for k, _, v in (line[1:].partition(":") for line in text.splitlines()
                                                  if line.startswith("#"))}


@pytest.fixture
def experiment(tmp_path):
    def _write(body: str) -> str:
        path = tmp_path / "exp.txt"
        path.write_text(body)
        return str(path)

    return _write


def test_simulate_minimal_file(experiment, capsys):
    path = experiment("window_symbols = 10\n")
    assert main(["simulate", path, "--seeds", "2", "--packets", "200"]) == 0
    out = capsys.readouterr().out
    rows = frame(out)
    assert list(rows.columns) == ["axis", "value", "window", "degree", "rate", "loss", "decoder", "row", "seed",
                                  *SIMULATE_METRICS]
    assert list(rows["row"]) == ["run", "run", "mean", "stderr"]
    assert (rows.loc[rows["row"] != "stderr", "drr"] == 1.0).all()
    meta = metadata(out)
    assert meta["seeds"] == "0 1"
    assert meta["packets"] == "200"
    assert len(meta["spec_hash"]) == 16
    assert "version" in meta


def test_simulate_rate_sweep_rows_carry_rate(experiment, capsys):
    path = experiment("window_symbols = 10\nloss_probability = 0.2\nsweep_axis = rate\nsweep_values = 1/2, 1/3, 1/4\n")
    assert main(["simulate", path, "--seeds", "1", "--packets", "200"]) == 0
    rows = frame(capsys.readouterr().out)
    assert len(rows) == 3 * 3
    assert sorted(rows["rate"].round(4).unique()) == [0.25, 0.3333, 0.5]


def test_simulate_rejects_unknown_key(experiment, capsys):
    path = experiment("window_symbols = 10\nmemory = 4\n")
    assert main(["simulate", path]) == 1
    err = capsys.readouterr().err
    assert "memory" in err
    assert "line 2" in err


def test_usage_errors_exit_one(capsys):
    assert main(["simulate"]) == 1
    assert main(["reproduce", "fig42", "--packets", "10"]) == 1
    assert main(["analyze", "1.5"]) == 1


def test_exit_codes_maps_config_errors_and_passes_faults_on():
    with pytest.raises(typer.Exit) as info:
        with exit_codes():
            raise ConfigError("window_symbols must be positive", key="window_symbols")
    assert info.value.exit_code == 1
    for error in (DecodingFault("bad symbol"), UndefinedRunError("empty")):
        with pytest.raises(type(error)):
            with exit_codes():
                raise error


def test_wrong_recovery_exits_two(tmp_path, encode_stream, capsys):
    codec = CodecConfig(window=1, degree=1, payload_width=12)
    first, second = encode_stream(codec, 2)
    tampered = dataclasses.replace(first, data=(first.data[0] ^ 1,))
    trace = tmp_path / "tampered.swft"
    write_trace(trace, codec, [(tampered, False), (second, True)])
    assert main(["replay", str(trace)]) == 2
    assert "wrong value" in capsys.readouterr().err


def test_sweep_value_the_codec_rejects_exits_one(experiment, capsys):
    path = experiment("window_symbols = 10\ndegree_symbols = 5\nsweep_axis = degree\nsweep_values = 40\n")
    assert main(["sweep", path, "--seeds", "1", "--packets", "50"]) == 1
    assert "sweep_values" in capsys.readouterr().err


def test_every_output_carries_spec_hash(experiment, tmp_path, capsys):
    path = experiment("window_symbols = 10\nloss_probability = 0.2\nsweep_axis = p_e\nsweep_values = 0.1 0.2\n")
    trace = tmp_path / "run.swft"
    outputs = {}
    assert main(["simulate", path, "--seeds", "1", "--packets", "100", "--trace-out", str(trace)]) == 0
    outputs["simulate"] = metadata(capsys.readouterr().out)
    assert main(["sweep", path, "--seeds", "1", "--packets", "100"]) == 0
    outputs["sweep"] = metadata(capsys.readouterr().out)
    assert main(["analyze", "0.1", "0.2"]) == 0
    outputs["analyze"] = metadata(capsys.readouterr().out)
    assert main(["replay", str(trace)]) == 0
    outputs["replay"] = metadata(capsys.readouterr().out)
    assert main(["reproduce", "max_code_rate", "--out-dir", str(tmp_path)]) == 0
    outputs["reproduce"] = read_csv(tmp_path / "max_code_rate.csv")[1]
    for command, meta in outputs.items():
        assert len(meta["spec_hash"]) == 16, command
        assert "seeds" in meta, command


def test_analyze(capsys):
    assert main(["analyze", "0", "0.1", "0.35"]) == 0
    rows = frame(capsys.readouterr().out)
    assert list(rows.columns) == ["p_e", "one_minus_p_e", "r_max", "feasible"]
    assert list(rows["feasible"]) == ["yes", "yes", "no"]
    assert rows["r_max"][0] == 1.0
    assert rows["r_max"][1] == pytest.approx(0.888, abs=1e-3)
    assert pd.isna(rows["r_max"][2])
    assert rows["one_minus_p_e"][2] == pytest.approx(0.65)


def test_reproduce_max_code_rate(tmp_path):
    result = runner.invoke(app, ["reproduce", "max_code_rate", "--out-dir", str(tmp_path)])
    assert result.exit_code == 0
    csv_path, svg_path = tmp_path / "max_code_rate.csv", tmp_path / "max_code_rate.svg"
    assert svg_path.read_text().lstrip().startswith("<?xml")

    rows, meta = read_csv(csv_path)
    assert set(rows["curve"]) == {"no_expansion", "expansion"}
    assert meta["recipe"] == "max_code_rate"
    plain = rows[rows["curve"] == "no_expansion"]
    assert ((plain["r_max"] - (1 - plain["p_e"])).abs() < 1e-12).all()

    again = plot_csv(csv_path, tmp_path / "again.svg")
    assert again.read_bytes() == svg_path.read_bytes()


def test_reproduce_truncation_recipe_small(tmp_path, monkeypatch):
    from slidingfountain import recipes

    monkeypatch.setitem(recipes.RECIPES, "latency", lambda plan: recipes.latency(plan, losses=(0.2, 0.4)))
    assert main(["reproduce", "latency", "--seeds", "1", "--packets", "600", "--out-dir", str(tmp_path)]) == 0
    rows, meta = read_csv(tmp_path / "latency.csv")
    assert set(rows["decoder"]) == {"ge", "truncated_ge_25", "truncated_ge_50", "truncated_ge_100"}
    assert len(rows) == 2 * 4
    assert meta["plot_y"] == "latency_mean"
    assert meta["packets"] == "600"


def test_output_identical_across_runs_and_threads(experiment, capsys):
    path = experiment("window_symbols = 10\nloss_probability = 0.3\nsweep_axis = p_e\nsweep_values = 0.2 0.3\n")
    outputs = []
    for threads in ("1", "1", "2"):
        assert main(["simulate", path, "--seeds", "2", "--packets", "300", "--threads", threads]) == 0
        outputs.append(capsys.readouterr().out)
    assert outputs[0] == outputs[1] == outputs[2]


def test_trace_out_and_replay(experiment, tmp_path, capsys):
    path = experiment("window_symbols = 10\nloss_probability = 0.25\n")
    trace = tmp_path / "run.swft"
    assert main(["simulate", path, "--seeds", "1", "--packets", "300", "--trace-out", str(trace)]) == 0
    simulated = frame(capsys.readouterr().out)
    assert main(["replay", str(trace)]) == 0
    replayed = frame(capsys.readouterr().out)
    assert replayed["drr"][0] == simulated["drr"][0]
    assert replayed["recovered"][0] == simulated["recovered"][0]


def test_settings_from_environment(experiment, capsys, monkeypatch):
    monkeypatch.setenv("SWF_SEEDS", "3")
    monkeypatch.setenv("SWF_PACKETS", "150")
    path = experiment("window_symbols = 10\n")
    assert main(["simulate", path]) == 0
    out = capsys.readouterr().out
    assert metadata(out)["seeds"] == "0 1 2"
    assert len(frame(out)) == 3 + 2

import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from sms import config
from sms.cli import main
from sms.config import ConfigError, ExperimentConfig
from sms.solvers import load_trajectory

# Independently transcribed experiment table: name -> expected field values.
EXPECTED = {
    "vdp": dict(problem="vdp", mu=2.0, state0=(1.0, 0.0), dt=0.004, n_steps=2500, subsample=10,
                train_split=200, spike_steps=100, window=2, encoder="lower_triangular", hidden=500,
                epochs=5000, learning_rate=1e-3, shared_range=False),
    "lorenz": dict(problem="lorenz", sigma=10.0, rho=28.0, beta=8 / 3, state0=(1.0, 1.0, 1.0), dt=0.01,
                   n_steps=4000, subsample=10, train_split=320, spike_steps=1000, window=2, hidden=500,
                   epochs=5000),
    "wave": dict(problem="wave", c=1.0, dx=0.01, dt=0.01, n_steps=1000, subsample=1, train_split=800,
                 ic="gaussian", ic_width=0.05, spike_steps=100, shared_range=True, hidden=500, epochs=5000),
    "heat": dict(problem="heat", alpha=1.0, dx=0.01, dt=4e-5, n_steps=1000, subsample=10, train_split=80,
                 ic="hat", spike_steps=100, shared_range=True, hidden=500, epochs=5000),
}


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_full_preset_matches_experiment_table(name):
    cfg = config.preset(name)
    for key, value in EXPECTED[name].items():
        assert getattr(cfg, key) == pytest.approx(value), key


def test_presets_listing_has_full_and_desk_variants():
    table = config.presets()
    assert sorted(table) == sorted(list(EXPECTED) + [f"{n}-desk" for n in EXPECTED])
    for name in EXPECTED:
        desk = table[f"{name}-desk"]
        assert desk.spike_steps < table[name].spike_steps and desk.epochs < table[name].epochs
        assert replace(desk, name=name, spike_steps=table[name].spike_steps,
                       epochs=table[name].epochs) == table[name]


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        config.preset("duffing")


@pytest.mark.parametrize("name", sorted(config.presets()))
def test_serialize_round_trip(name):
    cfg = config.preset(name)
    assert config.parse(config.serialize(cfg)) == cfg
    assert config.parse(config.serialize(cfg)).digest() == cfg.digest()


def test_parse_rejects_unknown_key_and_section():
    text = config.serialize(ExperimentConfig())
    with pytest.raises(ConfigError):
        config.parse(text.replace("[train]", "[train]\nmomentum = 0.9"))
    with pytest.raises(ConfigError):
        config.parse(text + "\n[plots]\ndpi = 100\n")
    with pytest.raises(ConfigError):
        config.parse(text.replace("mu = 2.0", "mu = fast"))


def test_validation_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig(problem="duffing")
    with pytest.raises(ConfigError):
        ExperimentConfig(problem="lorenz", state0=(1.0, 0.0))
    with pytest.raises(ConfigError):
        ExperimentConfig(train_split=250)
    with pytest.raises(ConfigError):
        ExperimentConfig(lif_decay=2.0)


def test_digest_depends_on_content():
    a = ExperimentConfig()
    assert a.digest() == ExperimentConfig().digest()
    assert a.digest() != replace(a, seed=1).digest()


def _write_config(tmp_path, cfg, name="exp.ini"):
    path = tmp_path / name
    path.write_text(config.serialize(cfg))
    return str(path)


def test_cli_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[problem]\nwhatever = 1\n")
    assert main(["gen-data", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["gen-data", "--out", str(tmp_path)]) == 2
    assert main(["gen-data", "--preset", "nope", "--out", str(tmp_path)]) == 2
    assert main(["gen-data", "--config", str(tmp_path / "missing.ini")]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_runtime_errors_exit_1(tmp_path):
    assert main(["train", "--preset", "vdp-desk", "--out", str(tmp_path)]) == 1
    assert main(["evaluate", "--preset", "vdp-desk", "--out", str(tmp_path)]) == 1


@pytest.mark.parametrize("name,rows,sub_rows", [("vdp", 2501, 251), ("lorenz", 4001, 401), ("heat", 1001, 101)])
def test_gen_data_row_counts(tmp_path, name, rows, sub_rows):
    assert main(["gen-data", "--preset", name, "--out", str(tmp_path)]) == 0
    assert load_trajectory(tmp_path / "reference.traj").n_rows == rows
    assert load_trajectory(tmp_path / "reference_sub.traj").n_rows == sub_rows
    manifest = json.loads((tmp_path / "manifest-gen-data.json").read_text())
    assert manifest["command"] == "gen-data" and manifest["config_hash"] == config.preset(name).digest()
    assert manifest["files"] == ["reference.traj", "reference_sub.traj"]


def test_heat_pipeline_csv_covers_extrapolation(tmp_path):
    cfg = replace(config.preset("heat-desk"), spike_steps=8, hidden=16, epochs=3)
    path = _write_config(tmp_path, cfg)
    out = str(tmp_path / "run")
    for cmd in ("gen-data", "train", "evaluate"):
        assert main([cmd, "--config", path, "--out", out]) == 0
    with open(tmp_path / "run" / "cascade.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 100
    assert [int(r["step"]) for r in rows] == list(range(1, 101))
    assert all(r["regime"] == ("extrapolation" if int(r["step"]) > 80 else "interpolation") for r in rows)
    with open(tmp_path / "run" / "one_step.csv") as fh:
        one = list(csv.DictReader(fh))
    assert [int(r["step"]) for r in one] == list(range(2, 101))
    history = list(csv.DictReader(open(tmp_path / "run" / "loss_history.csv")))
    assert len(history) == 3
    assert np.isfinite([float(r["error"]) for r in rows]).all()


def test_evaluate_rejects_mismatched_checkpoint(tmp_path, capsys):
    cfg = replace(config.preset("vdp-desk"), spike_steps=6, hidden=8, epochs=1)
    path = _write_config(tmp_path, cfg)
    for cmd in ("gen-data", "train"):
        assert main([cmd, "--config", path, "--out", str(tmp_path)]) == 0
    other = _write_config(tmp_path, replace(cfg, spike_steps=7), "other.ini")
    assert main(["evaluate", "--config", other, "--out", str(tmp_path)]) == 1
    assert "does not match" in capsys.readouterr().err
    assert not (tmp_path / "one_step.csv").exists()


def test_bench_encoding_command(tmp_path, capsys):
    assert main(["bench-encoding", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "encoding_errors.csv")))
    assert [r["encoder"] for r in rows].count("rate") == 10
    assert "lower_triangular" in capsys.readouterr().out


def test_presets_command(tmp_path, capsys):
    assert main(["presets", "--write", str(tmp_path)]) == 0
    assert "== vdp-desk" in capsys.readouterr().out
    assert config.load(tmp_path / "lorenz.ini") == config.preset("lorenz")

import argparse
import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from lvgp import cli
from lvgp.gp_exact import InternalConsistencyError
from lvgp.inference import FitError

GOLDEN = Path(__file__).parent / "golden" / "cli_help.txt"


@pytest.fixture
def workdir(tmp_path):
    space = {"quant": [{"name": "x", "lower": 0, "upper": 1}],
             "qual": [{"name": "t", "levels": ["a", "b", "c"]}], "response": "y"}
    (tmp_path / "space.json").write_text(json.dumps(space))
    return tmp_path


def run(*argv):
    return cli.main([str(a) for a in argv])


def make_training(d):
    assert run("doe", "--space", d / "space.json", "--per-level", 5, "--seed", 1, "--out", d / "design.csv") == 0
    df = pd.read_csv(d / "design.csv")
    df["y"] = np.sin(6 * df["x"]) + df["t"].map({"a": 0.0, "b": 0.3, "c": 1.5})
    df.to_csv(d / "train.csv", index=False)
    df.drop(columns="y").to_csv(d / "test.csv", index=False)


def test_help_matches_golden(monkeypatch):
    monkeypatch.setenv("COLUMNS", "100")
    assert cli.full_help() == GOLDEN.read_text()


def test_every_flag_is_documented():
    parser = cli.build_parser()
    text = cli.full_help(parser)
    subs = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sp in subs.choices.items():
        for action in sp._actions:
            for opt in action.option_strings:
                assert opt in text, f"{name} {opt}"
            assert action.help, f"{name} {action.dest} lacks help"


def test_fit_predict_latent_workflow(workdir, capsys):
    d = workdir
    make_training(d)
    capsys.readouterr()
    assert run("fit", "--data", d / "train.csv", "--space", d / "space.json", "--out", d / "m.json",
               "--restarts", 2, "--seed", 0, "--threads", 1) == 0
    out = capsys.readouterr()
    summary = json.loads(out.out)
    assert summary["method"] == "map" and len(summary["map"]["restarts"]) == 2
    assert "model written" in out.err

    assert run("predict", "--model", d / "m.json", "--data", d / "test.csv", "--out", d / "p.csv") == 0
    p = pd.read_csv(d / "p.csv")
    assert list(p.columns) == ["x", "t", "mean", "variance", "lower95", "upper95"]
    assert np.all(p["lower95"] <= p["upper95"])

    assert run("latent", "--model", d / "m.json", "--out-dir", d / "lat") == 0
    lat = pd.read_csv(d / "lat" / "latent_t.csv")
    assert lat["kind"].tolist() == ["map"] * 3


def test_seeded_outputs_are_byte_identical(workdir):
    d = workdir
    make_training(d)
    for k in (1, 2):
        assert run("fit", "--data", d / "train.csv", "--space", d / "space.json", "--out", d / f"m{k}.json",
                   "--method", "bayes", "--chains", 2, "--warmup", 40, "--draws", 15, "--seed", 3,
                   "--threads", 1) == 0
        assert run("predict", "--model", d / f"m{k}.json", "--data", d / "test.csv", "--out", d / f"p{k}.csv",
                   "--interval-samples", 500, "--seed", 2) == 0
        assert run("latent", "--model", d / f"m{k}.json", "--out-dir", d / f"lat{k}", "--seed", 4) == 0
    draws = [json.loads((d / f"m{k}.json").read_text())["draws"] for k in (1, 2)]
    assert draws[0] == draws[1] and len(draws[0]) == 30
    assert (d / "p1.csv").read_bytes() == (d / "p2.csv").read_bytes()
    assert (d / "lat1" / "latent_t.csv").read_bytes() == (d / "lat2" / "latent_t.csv").read_bytes()
    assert "representative" in (d / "lat1" / "latent_t.csv").read_text()


def test_input_errors_exit_2(workdir, capsys):
    d = workdir
    assert run("predict", "--model", d / "missing.json", "--data", d / "x.csv", "--out", d / "p.csv") == 2
    assert "model file not found" in capsys.readouterr().err
    assert run("fit", "--data", d / "nope.csv", "--space", d / "space.json", "--out", d / "m.json") == 2
    (d / "bad.json").write_text("{")
    assert run("doe", "--space", d / "bad.json", "--per-level", 2, "--out", d / "x.csv") == 2
    make_training(d)
    df = pd.read_csv(d / "train.csv")
    df.loc[0, "t"] = "zzz"
    df.to_csv(d / "badlevel.csv", index=False)
    assert run("fit", "--data", d / "badlevel.csv", "--space", d / "space.json", "--out", d / "m.json") == 2
    assert "unknown level 'zzz'" in capsys.readouterr().err
    assert run("doe", "--space", d / "space.json", "--per-level", 2, "--out", d / "no" / "dir.csv") == 2
    # nothing was written to standard output on failure
    assert capsys.readouterr().out == ""


def test_numerical_and_internal_failures(workdir, monkeypatch):
    d = workdir
    make_training(d)
    args = ("fit", "--data", d / "train.csv", "--space", d / "space.json", "--out", d / "m.json")

    def fail(exc):
        def _fit(self, data):
            raise exc
        return _fit

    monkeypatch.setattr(cli.LVGP, "fit", fail(FitError("all optimization restarts failed", [])))
    assert run(*args) == 3
    monkeypatch.setattr(cli.LVGP, "fit", fail(InternalConsistencyError("negative variance")))
    assert run(*args) == 4


def test_bench_command(workdir, capsys):
    d = workdir
    cfg = {"function": "synthetic", "synthetic_levels": [3, 3], "methods": ["map"], "per_level": [2],
           "replicates": 1, "test_size": 20, "restarts": 2, "seed": 1}
    (d / "cfg.json").write_text(json.dumps(cfg))
    assert run("bench", "--config", d / "cfg.json", "--out-dir", d / "out", "--threads", 1) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["map/n=18"]["replicates"] == 1
    (d / "cfg.json").write_text(json.dumps({**cfg, "unknown": 1}))
    assert run("bench", "--config", d / "cfg.json", "--out-dir", d / "out") == 2


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "lvgp", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("lvgp ")

"""Replication harness: repeated train/test experiments over methods and sizes.

Every (size, replicate) pair owns an RNG stream derived from the master
seed, the per-level size and the replicate index, so results do not depend
on scheduling. Outputs:

* ``metrics.csv``: replicate, method, size, rrmse, mis, coverage, status
  (deterministic for a fixed config and seed)
* ``timings.csv``: replicate, method, size, seconds (wall clock)
* ``report.json``: config echo, seed manifest, per-fit records and summaries
* ``latents/``: per-fit latent coordinate tables for plotting
"""

from __future__ import annotations

import json
import logging
import math
import time
import traceback
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd

from ..domain import stratified_doe, uniform_design
from ..latent import export_latents
from ..model import LVGP, FitSettings, _clean
from ..inference.parallel import run_tasks
from .functions import get_function
from .metrics import coverage, mis, rrmse
from .synthetic import draw_responses, qualitative_space

log = logging.getLogger(__name__)

METRIC_COLUMNS = ["replicate", "method", "size", "rrmse", "mis", "coverage", "status"]


@dataclass
class ExperimentConfig:
    function: str = "borehole"
    discretization: dict | None = None
    methods: list = field(default_factory=lambda: ["map", "bayes"])
    per_level: list = field(default_factory=lambda: [2])
    replicates: int = 25
    test_size: int = 1000
    seed: int = 0
    restarts: int = 8
    chains: int = 4
    warmup: int = 500
    draws: int = 250
    target_accept: float = 0.8
    max_tree_depth: int = 10
    latent_dim: int = 2
    n_inducing: int = 50
    interval_samples: int = 10000
    bayes_init: str = "prior"
    piston_variant: str = "printed"
    synthetic_levels: list = field(default_factory=lambda: [4, 5])
    write_latents: bool = True
    n_jobs: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be positive")
        if self.test_size < 2:
            raise ValueError("test_size must be at least 2")
        labels = []
        for m in self.methods:
            method, approx = parse_method(m)
            labels.append(method if approx == "exact" else f"{method}-{approx}")
        self.methods = labels
        self.per_level = [int(p) for p in self.per_level]

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown experiment settings: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def parse_method(label: str) -> tuple[str, str]:
    """``"bayes"`` -> ("bayes", "exact"); ``"map-vfe"`` -> ("map", "vfe")."""
    parts = str(label).lower().replace("/", "-").split("-")
    method = parts[0]
    approx = parts[1] if len(parts) > 1 else "exact"
    if method not in ("map", "mle", "bayes") or approx not in ("exact", "fitc", "vfe") or len(parts) > 2:
        raise ValueError(f"unknown method label {label!r}")
    return method, approx


def _problem(cfg: ExperimentConfig, per_level: int, seeds):
    if cfg.function == "synthetic":
        space = qualitative_space(cfg.synthetic_levels)
        train = stratified_doe(space, per_level, seed=seeds[0])
        test = uniform_design(space, cfg.test_size, seed=seeds[1])
        (train, test), _ = draw_responses(space, [train, test], seed=seeds[3], latent_dim=cfg.latent_dim)
        return space, train, test
    func = get_function(cfg.function, discretization=cfg.discretization, piston_variant=cfg.piston_variant)
    space = func.space()
    train = func.label(stratified_doe(space, per_level, seed=seeds[0]))
    test = func.label(uniform_design(space, cfg.test_size, seed=seeds[1]))
    return space, train, test


def replicate_seeds(master: int, per_level: int, replicate: int) -> list[int]:
    """doe, test set, fit, interval (and synthetic response) seeds."""
    ss = np.random.SeedSequence(master, spawn_key=(per_level, replicate))
    return [int(s) for s in ss.generate_state(4)]


def _run_one(args):
    cfg, per_level, rep = args
    seeds = replicate_seeds(cfg.seed, per_level, rep)
    space, train, test = _problem(cfg, per_level, seeds)
    records, latents = [], []
    for label in cfg.methods:
        method, approx = parse_method(label)
        rec = {"replicate": rep, "method": label, "size": train.n, "per_level": per_level}
        t0 = time.perf_counter()
        try:
            settings = FitSettings(method=method, approx=approx, latent_dim=cfg.latent_dim,
                                   n_inducing=cfg.n_inducing, restarts=cfg.restarts, seed=seeds[2],
                                   chains=cfg.chains, warmup=cfg.warmup, draws=cfg.draws,
                                   target_accept=cfg.target_accept, max_tree_depth=cfg.max_tree_depth,
                                   bayes_init=cfg.bayes_init)
            model = LVGP(space, settings).fit(train)
            mix = model.mixture(test)
            iv = model.intervals(test, n_samples=cfg.interval_samples, seed=seeds[3], mixture=mix)
            rec.update(rrmse=rrmse(test.Y, mix.mean()), mis=mis(test.Y, iv), coverage=coverage(test.Y, iv),
                       status="ok")
            rec["fit"] = {k: v for k, v in model.summary.items() if k != "seconds"}
            if cfg.write_latents:
                for q in space.qual:
                    tab = export_latents(model, q.name, {"seed": seeds[3]})
                    latents.append((label, train.n, rep, q.name, tab))
        except Exception as exc:  # recorded and skipped, the run continues
            log.warning("replicate %d, %s failed: %s", rep, label, exc)
            rec.update(rrmse=math.nan, mis=math.nan, coverage=math.nan,
                       status=f"failed: {type(exc).__name__}: {exc}")
            rec["traceback"] = traceback.format_exc()
        rec["seconds"] = time.perf_counter() - t0
        records.append(rec)
    return records, latents


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list
    seeds: dict

    def metrics_frame(self) -> pd.DataFrame:
        df = pd.DataFrame([{k: r[k] for k in METRIC_COLUMNS} for r in self.records], columns=METRIC_COLUMNS)
        return df

    def timings_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{k: r[k] for k in ("replicate", "method", "size", "seconds")}
                             for r in self.records])

    def summary(self) -> dict:
        df = self.metrics_frame()
        ok = df[df["status"] == "ok"]
        out = {}
        for (method, size), g in ok.groupby(["method", "size"], sort=True):
            out[f"{method}/n={size}"] = {
                "replicates": int(len(g)),
                "rrmse_mean": float(g["rrmse"].mean()),
                "mis_mean": float(g["mis"].mean()),
                "coverage_mean": float(g["coverage"].mean()),
            }
        return out

    def to_dict(self) -> dict:
        return _clean({"config": asdict(self.config), "seeds": self.seeds, "records": self.records,
                       "summary": self.summary()})


def run_experiment(config: ExperimentConfig, out_dir=None) -> ExperimentReport:
    """Run every (per_level, replicate) task and optionally write the report files."""
    tasks = [(config, p, r) for p in config.per_level for r in range(config.replicates)]
    results = run_tasks(_run_one, tasks, config.n_jobs)
    records = [rec for recs, _ in results for rec in recs]
    seeds = {f"per_level={p}/replicate={r}": dict(zip(("doe", "test", "fit", "interval"),
                                                       replicate_seeds(config.seed, p, r)))
             for p in config.per_level for r in range(config.replicates)}
    report = ExperimentReport(config, records, seeds)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.metrics_frame().to_csv(out / "metrics.csv", index=False, float_format="%.12g")
        report.timings_frame().to_csv(out / "timings.csv", index=False, float_format="%.3f")
        (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1))
        if config.write_latents:
            ldir = out / "latents"
            ldir.mkdir(exist_ok=True)
            for _, lats in results:
                for label, size, rep, qname, tab in lats:
                    tab.to_csv(ldir / f"{label}_n{size}_rep{rep}_{qname}.csv", index=False,
                               float_format="%.12g")
    return report

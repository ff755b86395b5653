"""Command-line interface.

Machine-readable output (model JSON, CSV tables, fit summaries) goes to
files or standard output; progress and human-readable notes go to
standard error. Exit codes: 0 success, 2 invalid input, 3 numerical
failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .domain import InputSpace, ValidationError, read_csv, stratified_doe
from .gp_exact import InternalConsistencyError
from .inference import FitError, NonFiniteGradientError, available_cores
from .kernel import SingularCovarianceError
from .model import APPROXES, METHODS, LVGP, FitSettings, _clean

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_INTERNAL = 0, 2, 3, 4

log = logging.getLogger("lvgp")


class CliInputError(Exception):
    pass


def _require(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliInputError(f"{what} not found: {p}")
    return p


def _out_parent(path) -> Path:
    p = Path(path)
    if p.parent and not p.parent.exists():
        raise CliInputError(f"output directory does not exist: {p.parent}")
    return p


def _load_space(path) -> InputSpace:
    try:
        return InputSpace.from_json(_require(path, "space file"))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"invalid space file {path}: {exc}") from exc


def _load_model(path) -> LVGP:
    try:
        return LVGP.load(_require(path, "model file"))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"invalid model file {path}: {exc}") from exc


def _threads(args) -> int:
    return max(1, int(args.threads)) if args.threads else available_cores()


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    space = _load_space(args.space)
    data_path = _require(args.data, "data file")
    out = _out_parent(args.out)
    data = read_csv(space, data_path, require_response=True)
    settings = FitSettings(method=args.method, approx=args.approx, latent_dim=args.latent_dim,
                           n_inducing=args.inducing, restarts=args.restarts, max_iters=args.max_iters,
                           seed=args.seed, chains=args.chains, warmup=args.warmup, draws=args.draws,
                           target_accept=args.target_accept, max_tree_depth=args.max_tree_depth,
                           n_jobs=_threads(args), freeze=args.freeze, bayes_init=args.bayes_init)
    print(f"fitting {settings.method}/{settings.approx} on {data.n} rows", file=sys.stderr)
    model = LVGP(space, settings).fit(data)
    model.save(out)
    summary = dict(model.summary)
    summary["model"] = str(out)
    summary.pop("seconds", None)
    print(json.dumps(_clean(summary), indent=1))
    print(f"model written to {out} ({model.fit_seconds:.1f} s)", file=sys.stderr)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = _load_model(args.model)
    data_path = _require(args.data, "data file")
    out = _out_parent(args.out)
    data = read_csv(model.space, data_path, require_response=False)
    mix = model.mixture(data)
    iv = model.intervals(data, level=args.level, n_samples=args.interval_samples, seed=args.seed,
                         mixture=mix)
    frame = data.to_frame(model.space)
    pct = f"{100 * args.level:g}"
    frame["mean"] = mix.mean()
    frame["variance"] = mix.variance()
    frame[f"lower{pct}"] = iv[:, 0]
    frame[f"upper{pct}"] = iv[:, 1]
    frame.to_csv(out, index=False, float_format="%.12g")
    print(f"{data.n} predictions written to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_latent(args) -> int:
    from .latent import export_latents

    model = _load_model(args.model)
    out_dir = Path(args.out_dir)
    names = [q.name for q in model.space.qual]
    variables = args.variable or names
    for v in variables:
        if v not in names:
            raise CliInputError(f"unknown qualitative variable {v!r}; expected one of {names}")
    out_dir.mkdir(parents=True, exist_ok=True)
    for v in variables:
        tab = export_latents(model, v, {"restarts": args.restarts, "seed": args.seed})
        path = out_dir / f"latent_{v}.csv"
        tab.to_csv(path, index=False, float_format="%.12g")
        print(f"latent coordinates for {v} written to {path}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench.experiment import ExperimentConfig, run_experiment

    cfg_path = _require(args.config, "experiment config")
    try:
        raw = json.loads(cfg_path.read_text())
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.replicates is not None:
            raw["replicates"] = args.replicates
        raw["n_jobs"] = _threads(args)
        cfg = ExperimentConfig.from_dict(raw)
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"invalid experiment config: {exc}") from exc
    report = run_experiment(cfg, args.out_dir)
    print(json.dumps(_clean(report.summary()), indent=1))
    failed = sum(1 for r in report.records if r["status"] != "ok")
    print(f"{len(report.records)} fits, {failed} failed; report in {args.out_dir}", file=sys.stderr)
    return EXIT_OK


def cmd_doe(args) -> int:
    space = _load_space(args.space)
    out = _out_parent(args.out)
    design = stratified_doe(space, args.per_level, seed=args.seed)
    design.to_frame(space).to_csv(out, index=False, float_format="%.12g")
    print(f"{design.n} design points written to {out}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common(p, threads: bool = False):
    p.add_argument("--seed", type=int, default=None, help="random seed for reproducible output")
    if threads:
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes for restarts, chains or replicates (default: available cores)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lvgp",
        description="Latent-variable Gaussian process models for mixed quantitative/qualitative inputs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("fit", help="fit a model and write it as JSON",
                       description="Fit an LVGP model (MAP, MLE or fully Bayesian) and save it.")
    p.add_argument("--data", required=True, help="training CSV with input columns and the response")
    p.add_argument("--space", required=True, help="JSON declaration of the input space")
    p.add_argument("--out", required=True, help="path of the model JSON to write")
    p.add_argument("--method", choices=METHODS, default="map",
                   help="hyperparameter inference: point estimates (map, mle) or posterior sampling (bayes)")
    p.add_argument("--approx", choices=APPROXES, default="exact",
                   help="exact likelihood or a sparse inducing-point approximation")
    p.add_argument("--inducing", type=int, default=50, help="number of inducing points for fitc/vfe")
    p.add_argument("--latent-dim", type=int, default=2, help="latent dimension per qualitative input")
    p.add_argument("--restarts", type=int, default=8, help="optimizer restarts for point estimates")
    p.add_argument("--max-iters", type=int, default=500, help="iteration cap per optimizer restart")
    p.add_argument("--chains", type=int, default=4, help="independent sampler chains")
    p.add_argument("--warmup", type=int, default=500, help="adaptation iterations per chain")
    p.add_argument("--draws", type=int, default=250, help="retained draws per chain")
    p.add_argument("--target-accept", type=float, default=0.8, help="step-size adaptation target")
    p.add_argument("--max-tree-depth", type=int, default=10, help="trajectory doubling limit")
    p.add_argument("--bayes-init", choices=("prior", "map"), default="prior",
                   help="start chains from prior draws or from the MAP estimate")
    p.add_argument("--freeze", choices=("weights", "coords"), default="weights",
                   help="inducing parameters held fixed while sampling a sparse model")
    _common(p, threads=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict at new inputs",
                       description="Write predictive means, variances and prediction intervals as CSV.")
    p.add_argument("--model", required=True, help="model JSON written by 'fit'")
    p.add_argument("--data", required=True, help="CSV with the input columns (response optional)")
    p.add_argument("--out", required=True, help="path of the predictions CSV to write")
    p.add_argument("--level", type=float, default=0.95, help="central interval probability")
    p.add_argument("--interval-samples", type=int, default=10000,
                   help="mixture samples per point for posterior intervals")
    _common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("latent", help="export latent coordinates",
                       description="Write latent coordinates per qualitative input (per draw and representative for posteriors).")
    p.add_argument("--model", required=True, help="model JSON written by 'fit'")
    p.add_argument("--out-dir", required=True, help="directory for latent_<variable>.csv files")
    p.add_argument("--variable", action="append", default=None,
                   help="qualitative input to export (repeatable; default: all)")
    p.add_argument("--restarts", type=int, default=4, help="restarts for the representative latent space")
    _common(p)
    p.set_defaults(func=cmd_latent)

    p = sub.add_parser("bench", help="run a replication experiment",
                       description="Run a benchmark experiment from a JSON config and write report files.")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out-dir", required=True, help="directory for metrics.csv, timings.csv, report.json")
    p.add_argument("--replicates", type=int, default=None, help="override the replicate count")
    _common(p, threads=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("doe", help="generate a stratified design",
                       description="Latin hypercube in the quantitative inputs with stratified level assignment.")
    p.add_argument("--space", required=True, help="JSON declaration of the input space")
    p.add_argument("--per-level", type=int, required=True, help="points per joint level combination")
    p.add_argument("--out", required=True, help="path of the design CSV to write")
    _common(p)
    p.set_defaults(func=cmd_doe)
    return parser


def full_help(parser: argparse.ArgumentParser | None = None) -> str:
    """Top-level help followed by every subcommand's help."""
    parser = parser or build_parser()
    parts = [parser.format_help()]
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for name, sp in action.choices.items():
                parts.append(f"--- {name} ---\n" + sp.format_help())
    return "\n".join(parts)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    # LinAlgError derives from ValueError, so numerical failures are matched first
    except (FitError, SingularCovarianceError, NonFiniteGradientError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CliInputError, ValidationError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InternalConsistencyError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

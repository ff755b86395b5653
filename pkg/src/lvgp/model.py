"""High-level LVGP model: fit, predict, intervals, save and load.

All user-facing quantities are in the original units of the data; the
inference routines work on standardized data (inputs scaled to [0, 1] by
the declared bounds, response to zero mean and unit standard deviation).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .domain import Dataset, InputSpace, ScalingInfo, ValidationError, standardize
from .inference import (
    MapConfig,
    MapFitResult,
    PosteriorSamples,
    PredictiveMixture,
    SamplerConfig,
    SparseMapConfig,
    fit_map,
    fit_sparse_map,
    gaussian_interval,
    prediction_interval,
    predictive_mixture,
    sample_posterior,
    sample_sparse_posterior,
)
from .latent import RepresentativeLatent, representative_latent
from .priors import NOISE_FLOOR, ParamLayout, PriorSpec
from .sparse import SPARSE_NOISE_FLOOR, InducingSet

FORMAT = "lvgp-model"
FORMAT_VERSION = 1
METHODS = ("map", "mle", "bayes")
APPROXES = ("exact", "fitc", "vfe")


@dataclass
class FitSettings:
    method: str = "map"
    approx: str = "exact"
    latent_dim: int = 2
    n_inducing: int = 50
    restarts: int = 8
    max_iters: int = 500
    seed: int | None = None
    chains: int = 4
    warmup: int = 500
    draws: int = 250
    target_accept: float = 0.8
    max_tree_depth: int = 10
    n_jobs: int = 1
    freeze: str = "weights"  # frozen inducing parameters while sampling: "weights" or "coords"
    bayes_init: str = "prior"  # chain starts: "prior" draws or the "map" estimate

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.approx not in APPROXES:
            raise ValidationError(f"approx must be one of {APPROXES}, got {self.approx!r}")
        if self.latent_dim < 1:
            raise ValidationError("latent_dim must be positive")
        if self.freeze not in ("weights", "coords"):
            raise ValidationError("freeze must be 'weights' or 'coords'")
        if self.bayes_init not in ("prior", "map"):
            raise ValidationError("bayes_init must be 'prior' or 'map'")
        if self.restarts < 1:
            raise ValidationError("restarts must be positive")

    @classmethod
    def from_dict(cls, d) -> "FitSettings":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def _stage_seeds(seed, k: int = 3) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(k)]


def _clean(obj):
    """JSON-safe copy: NaN and infinities become None, numpy scalars become Python scalars."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


class LVGP:
    """Latent-variable GP for mixed quantitative/qualitative inputs."""

    def __init__(self, space: InputSpace, settings: FitSettings | None = None,
                 prior: PriorSpec | None = None, **overrides):
        self.space = space
        settings = settings or FitSettings()
        self.settings = replace(settings, **overrides) if overrides else settings
        self.prior = prior or PriorSpec()
        self.train: Dataset | None = None
        self.scaling: ScalingInfo | None = None
        self.layout: ParamLayout | None = None
        self.point: MapFitResult | None = None
        self.samples: PosteriorSamples | None = None
        self.inducing: InducingSet | None = None
        self.fit_seconds = math.nan
        self.summary: dict = {}

    # ------------------------------------------------------------------ fitting

    @property
    def is_bayes(self) -> bool:
        return self.settings.method == "bayes"

    @property
    def is_fitted(self) -> bool:
        return self.point is not None or self.samples is not None

    def _layout(self) -> ParamLayout:
        dims = [min(self.settings.latent_dim, L - 1) for L in self.space.n_levels]
        floor = NOISE_FLOOR if self.settings.approx == "exact" else SPARSE_NOISE_FLOOR
        return ParamLayout(self.space.n_quant, self.space.n_levels, dims, noise_floor=floor)

    def _spec(self) -> PriorSpec:
        if self.settings.method == "mle":
            return replace(self.prior, flat=True)
        return replace(self.prior, flat=False)

    def fit(self, data: Dataset) -> "LVGP":
        if data.Y is None:
            raise ValidationError("training data needs responses")
        s = self.settings
        t0 = time.perf_counter()
        self.train = data
        scaled, self.scaling = standardize(data, self.space)
        self.layout = self._layout()
        spec = self._spec()
        seed_map, seed_mcmc, _ = _stage_seeds(s.seed)
        sampler = SamplerConfig(chains=s.chains, warmup=s.warmup, draws=s.draws, seed=seed_mcmc,
                                target_accept=s.target_accept, max_tree_depth=s.max_tree_depth,
                                n_jobs=s.n_jobs)
        names = dict(quant_names=[v.name for v in self.space.quant],
                     qual_names=[v.name for v in self.space.qual])
        if s.approx == "exact":
            if s.method in ("map", "mle") or s.bayes_init == "map":
                cfg = MapConfig(restarts=s.restarts, seed=seed_map, max_iters=s.max_iters, n_jobs=s.n_jobs)
                self.point = fit_map(scaled, self.layout, replace(spec, flat=s.method == "mle"), cfg)
            if s.method == "bayes":
                init = None if s.bayes_init == "prior" else self.point.v
                self.samples = sample_posterior(scaled, self.layout, spec, sampler, init=init, **names)
        else:
            cfg = SparseMapConfig(M=s.n_inducing, restarts=s.restarts, seed=seed_map,
                                  max_iters=s.max_iters, n_jobs=s.n_jobs)
            map_spec = replace(spec, flat=s.method == "mle")
            self.point = fit_sparse_map(scaled, self.layout, map_spec, s.approx, cfg)
            self.inducing = self.point.inducing
            if s.method == "bayes":
                init = None if s.bayes_init == "prior" else self.point.v
                self.samples = sample_sparse_posterior(
                    scaled, self.layout, spec, s.approx, self.inducing, sampler,
                    freeze_coords=s.freeze == "coords", theta_ref=self.point.theta, init=init, **names)
                self.inducing = self.samples.inducing
        self.fit_seconds = time.perf_counter() - t0
        self.summary = self._summary()
        return self

    def _summary(self) -> dict:
        out = {"method": self.settings.method, "approx": self.settings.approx,
               "n_train": self.train.n, "seconds": self.fit_seconds}
        if self.point is not None:
            out["map"] = self.point.summary()
        if self.samples is not None:
            d = dict(self.samples.diagnostics)
            d.pop("scalars", None)
            out["diagnostics"] = d
            out["n_draws"] = self.samples.B
        return out

    # ------------------------------------------------------------- prediction

    def _check(self):
        if not self.is_fitted:
            raise RuntimeError("model is not fitted")

    @property
    def scaled_train(self) -> Dataset:
        return self.scaling.transform(self.train)

    def thetas(self) -> list:
        """Hyperparameter draws (one for a point estimate), in standardized units."""
        self._check()
        if self.samples is not None:
            return self.samples.thetas()
        return [self.point.theta]

    def latent_draws(self, j: int) -> list[np.ndarray]:
        return [th.latent[j] for th in self.thetas()]

    def representative_latent(self, j: int, restarts: int = 4, seed=None) -> RepresentativeLatent:
        return representative_latent(self.latent_draws(j), restarts=restarts, seed=seed)

    def mixture(self, Wstar: Dataset) -> PredictiveMixture:
        """Per-draw predictive means/variances of the latent response, original units."""
        self._check()
        W = Dataset(self.scaling.transform_x(Wstar.X), Wstar.T)
        method = None if self.settings.approx == "exact" else self.settings.approx
        mix = predictive_mixture(self.thetas(), self.scaled_train, W, self.inducing, method)
        return PredictiveMixture(self.scaling.inverse_y(mix.means), self.scaling.inverse_var(mix.variances))

    def predict(self, Wstar: Dataset) -> tuple[np.ndarray, np.ndarray]:
        """Predictive mean and variance (mixture moments for a posterior)."""
        mix = self.mixture(Wstar)
        return mix.mean(), mix.variance()

    def intervals(self, Wstar: Dataset, level: float = 0.95, n_samples: int = 10000, seed=None,
                  mixture: PredictiveMixture | None = None) -> np.ndarray:
        """Central prediction intervals, ``(n, 2)``.

        Point estimates use Gaussian quantiles; posteriors use Monte Carlo
        order statistics of the predictive mixture.
        """
        mix = mixture if mixture is not None else self.mixture(Wstar)
        if self.is_bayes:
            if seed is None:
                seed = _stage_seeds(self.settings.seed)[2]
            return prediction_interval(mix, level, n_samples, seed)
        return gaussian_interval(mix.means[0], mix.variances[0], level)

    # ---------------------------------------------------------- serialization

    def to_dict(self) -> dict:
        self._check()
        doc = {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "space": self.space.to_dict(),
            "scaling": self.scaling.to_dict(),
            "prior": self.prior.to_dict(),
            "settings": asdict(self.settings),
            "layout": self.layout.to_dict(),
            "fields": self.layout.names([v.name for v in self.space.quant],
                                        [v.name for v in self.space.qual]),
            "training": {"X": self.train.X.tolist(), "T": self.train.T.tolist(), "Y": self.train.Y.tolist()},
            "summary": _clean(self.summary),
        }
        if self.point is not None:
            doc["theta"] = self.point.v.tolist()
            doc["objective"] = _clean(self.point.value)
            doc["restarts"] = [_clean(t.to_dict()) for t in self.point.restarts]
        if self.samples is not None:
            doc["draws"] = self.samples.v.tolist()
            doc["chains"] = self.samples.chains
            doc["draws_per_chain"] = self.samples.draws
            doc["diagnostics"] = _clean(self.samples.diagnostics)
        if self.inducing is not None:
            doc["inducing"] = self.inducing.to_dict()
        return doc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def from_dict(cls, doc: dict) -> "LVGP":
        if doc.get("format") != FORMAT:
            raise ValidationError("not an LVGP model document")
        if int(doc.get("version", -1)) != FORMAT_VERSION:
            raise ValidationError(f"unsupported model format version {doc.get('version')}")
        space = InputSpace.from_dict(doc["space"])
        m = cls(space, FitSettings.from_dict(doc["settings"]), PriorSpec.from_dict(doc["prior"]))
        m.scaling = ScalingInfo.from_dict(doc["scaling"])
        m.layout = ParamLayout.from_dict(doc["layout"])
        if doc["fields"] != m.layout.names([v.name for v in space.quant], [v.name for v in space.qual]):
            raise ValidationError("field manifest does not match the parameter layout")
        tr = doc["training"]
        m.train = Dataset(np.asarray(tr["X"], float).reshape(len(tr["Y"]), -1),
                          np.asarray(tr["T"], np.int64).reshape(len(tr["Y"]), -1), tr["Y"])
        if "inducing" in doc:
            m.inducing = InducingSet.from_dict(doc["inducing"])
        if "theta" in doc:
            obj = doc.get("objective")
            m.point = MapFitResult(np.asarray(doc["theta"], float), math.nan if obj is None else obj,
                                   m.layout, [], bool(doc["summary"].get("map", {}).get("converged")),
                                   m.inducing)
        if "draws" in doc:
            v = np.asarray(doc["draws"], float).reshape(-1, m.layout.size)
            m.samples = PosteriorSamples(v, m.layout, int(doc["chains"]), int(doc["draws_per_chain"]),
                                         doc.get("diagnostics", {}), m.inducing,
                                         None if m.settings.approx == "exact" else m.settings.approx)
        m.summary = doc.get("summary", {})
        m.fit_seconds = m.summary.get("seconds") or math.nan
        return m

    @classmethod
    def load(cls, path) -> "LVGP":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"model file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

"""Fit a latent-variable GP to a small mixed-input problem and compare a
point estimate with the fully Bayesian treatment.

The response depends on one quantitative input and one qualitative input
with four levels; levels "b" and "c" behave almost identically, "d" is far
from the rest. The fitted latent space should reflect that.

    python3 demos/quickstart.py
"""

import numpy as np

from lvgp import LVGP, FitSettings, InputSpace, QualVar, QuantVar
from lvgp.bench import coverage, mis, rrmse
from lvgp.domain import stratified_doe, uniform_design

OFFSETS = {1: 0.0, 2: 0.8, 3: 0.85, 4: 2.5}


def simulator(X, T):
    off = np.array([OFFSETS[t] for t in T[:, 0]])
    return np.sin(5 * X[:, 0]) * (1 + 0.3 * off) + off


space = InputSpace([QuantVar("x", 0.0, 1.0)], [QualVar("material", ["a", "b", "c", "d"])])
train = stratified_doe(space, per_level=4, seed=0)
train = train.with_responses(simulator(train.X, train.T))
test = uniform_design(space, 500, seed=1)
test = test.with_responses(simulator(test.X, test.T))

for method in ("map", "bayes"):
    model = LVGP(space, FitSettings(method=method, seed=0, chains=2, warmup=300, draws=200)).fit(train)
    mix = model.mixture(test)
    iv = model.intervals(test, mixture=mix)
    print(f"{method:>5}: RRMSE {rrmse(test.Y, mix.mean()):.4f}  MIS {mis(test.Y, iv):.4f}  "
          f"coverage {coverage(test.Y, iv):.3f}  ({model.fit_seconds:.1f} s)")
    if model.is_bayes:
        d = model.samples.diagnostics
        print(f"       max R-hat {d['max_rhat']:.3f}, min ESS {d['min_ess']:.0f}, "
              f"divergences {d['divergences']}")
        Z = model.representative_latent(0, seed=0).Z
    else:
        Z = model.latent_draws(0)[0]
    D = np.sqrt(((Z[:, None] - Z[None]) ** 2).sum(-1))
    print("       latent distances between levels a..d:")
    for row in D:
        print("        ", " ".join(f"{v:6.3f}" for v in row))

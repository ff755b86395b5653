"""Inducing-point approximations on a larger mixed-input data set.

Compares the exact MAP fit with FITC and VFE fits using 40 inducing points
on the discretized OTL circuit function, then runs the two-stage sparse
Bayesian fit (sparse MAP for the inducing set, then sampling with the
inducing parameters frozen). Finally it reports how many optimizer
iterations a VFE fit needs when started from the FITC optimum instead of
from random starts.

    python3 demos/sparse_demo.py

The sampling stage dominates the runtime (about 15 minutes on one core).
"""

import time

from lvgp import LVGP
from lvgp.bench import coverage, get_function, mis, rrmse
from lvgp.domain import standardize, stratified_doe, uniform_design
from lvgp.inference import SparseMapConfig, fit_sparse_map, sparse_layout

func = get_function("otl", discretization={"R_f": 3, "B": 2})
space = func.space()
train = func.label(stratified_doe(space, per_level=25, seed=0))
test = func.label(uniform_design(space, 1000, seed=1))
print(f"{train.n} training points, {space.n_quant} quantitative inputs, {space.n_levels[0]} levels")

runs = [("map", "exact"), ("map", "fitc"), ("map", "vfe"), ("bayes", "vfe")]
for method, approx in runs:
    t0 = time.perf_counter()
    model = LVGP(space, method=method, approx=approx, n_inducing=40, restarts=4, seed=0,
                 chains=2, warmup=200, draws=100).fit(train)
    mix = model.mixture(test)
    iv = model.intervals(test, mixture=mix)
    print(f"{method:>5}/{approx:<5}: RRMSE {rrmse(test.Y, mix.mean()):.4f}  MIS {mis(test.Y, iv):.4f}  "
          f"coverage {coverage(test.Y, iv):.3f}  ({time.perf_counter() - t0:.1f} s)")

scaled, _ = standardize(train, space)
layout = sparse_layout(space.n_quant, space.n_levels, [2] * len(space.n_levels))
cfg = SparseMapConfig(M=40, restarts=4, seed=0)
fitc = fit_sparse_map(scaled, layout, method="fitc", config=cfg)
cold = fit_sparse_map(scaled, layout, method="vfe", config=cfg)
warm = fit_sparse_map(scaled, layout, method="vfe", config=cfg, init_from=fitc)
print(f"VFE from FITC optimum: {warm.restarts[0].iterations} iterations, objective {warm.value:.3f}")
print(f"VFE cold starts: {[t.iterations for t in cold.restarts]} iterations, best objective {cold.value:.3f}")

import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from lvgp.bench import (
    DomainError, ExperimentConfig, borehole, coverage, discretize, draw_responses, get_function,
    interval_score, mis, otl, parse_method, piston, qualitative_space, replicate_seeds, rrmse,
    run_experiment, total_sobol,
)
from lvgp.domain import stratified_doe


# scalar re-implementations used as oracles for the vectorized functions
def borehole_scalar(Tu, r, rw, Hu, Tl, Hl, L, Kw):
    lr = math.log(r / rw)
    return 2 * math.pi * Tu * (Hu - Hl) / (lr * (1 + 2 * L * Tu / (lr * rw * rw * Kw) + Tu / Tl))


def otl_scalar(Rb1, Rb2, Rf, Rc1, Rc2, B):
    vb1 = 12 * Rb2 / (Rb1 + Rb2)
    k = B * (Rc2 + 9)
    return (vb1 + 0.74) * k / (k + Rf) + 11.35 * Rf / (k + Rf) + 0.74 * Rf * k / ((k + Rf) * Rc1)


def piston_scalar(M, S, V0, k, P0, T, T0, literature=False):
    A = P0 * S + 19.62 * M - k * V0 / S
    if literature:
        V = S / (2 * k) * (math.sqrt(A * A + 4 * k * P0 * V0 * T / T0) - A)
    else:
        V = S / (2 * k) * math.sqrt(A * A + 4 * k * P0 / T0 * T)
    return 2 * math.pi * math.sqrt(M / (k + S * S * P0 * V0 * T / (T0 * V * V)))


MIDPOINTS = {"borehole": 70.87291263681897, "otl": 5.310616942188329, "piston": 0.7672327383424863}


@pytest.mark.parametrize("name,oracle", [("borehole", borehole_scalar), ("otl", otl_scalar),
                                         ("piston", piston_scalar)])
def test_functions_match_scalar_oracles(name, oracle):
    f = get_function(name, mixed=False)
    lo, hi = np.array(f.lower), np.array(f.upper)
    mid = (lo + hi) / 2
    assert f(mid[None])[0] == pytest.approx(oracle(*mid), rel=1e-12)
    assert f(mid[None])[0] == pytest.approx(MIDPOINTS[name], rel=1e-12)
    X = lo + (hi - lo) * np.random.default_rng(0).random((50, f.dim))
    np.testing.assert_allclose(f(X), [oracle(*x) for x in X], rtol=1e-12)


def test_piston_literature_variant():
    f = get_function("piston", mixed=False, piston_variant="literature")
    mid = (np.array(f.lower) + np.array(f.upper)) / 2
    assert f(mid[None])[0] == pytest.approx(piston_scalar(*mid, literature=True), rel=1e-12)
    with pytest.raises(ValueError):
        piston(mid[None], variant="other")


def test_domain_errors():
    with pytest.raises(DomainError):
        borehole(np.array([[1e5, 0.01, 0.1, 1000, 80, 760, 1400, 1e4]]))
    with pytest.raises(DomainError):
        otl(np.array([[-1.0, 50, 1, 2, 1, 100]]))
    with pytest.raises(ValueError):
        borehole(np.zeros((1, 3)))


def test_discretized_borehole():
    f = get_function("borehole")
    sp = f.space()
    assert sp.n_quant == 6 and sp.n_levels == [16]
    vals = f.level_values()
    np.testing.assert_allclose(vals[:4, 0], 0.05)
    np.testing.assert_allclose(vals[:4, 1], np.linspace(700, 820, 4))
    d = f.label(stratified_doe(sp, 2, seed=0))
    assert d.n == 32
    full = f.full_inputs(d.X, d.T)
    np.testing.assert_allclose(d.Y, [borehole_scalar(*x) for x in full], rtol=1e-12)
    g = discretize(get_function("otl", mixed=False), ["R_f"], [3])
    assert g.n_levels == 3 and len(g.quant_inputs) == 5
    with pytest.raises(KeyError):
        discretize(f, ["nope"], [2])
    with pytest.raises(KeyError):
        get_function("branin")


def test_metric_values():
    y = np.array([0.0, 1.0, 2.0, 3.0])
    assert rrmse(y, y) == 0.0
    assert rrmse(y, np.full(4, y.mean())) == pytest.approx(1.0)
    iv = np.array([[-1, 1], [0, 0.5], [1.5, 2.5], [3.5, 4]])
    assert coverage(y, iv) == 0.5
    expected = np.mean([2, 0.5 + 40 * 0.5, 1, 0.5 + 40 * 0.5])
    assert mis(y, iv) == pytest.approx(expected)
    with pytest.raises(ValueError):
        interval_score(0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        rrmse(np.ones(3), np.ones(3))


@settings(max_examples=200, deadline=None)
@given(i=st.integers(-80, 80), j=st.integers(-80, 80), k=st.integers(0, 80), level=st.sampled_from([0.5, 0.8, 0.95]))
def test_interval_score_property(i, j, k, level):
    # dyadic values keep the arithmetic exact, so "equality iff covered" is testable verbatim
    y, lo, hi = i / 8, j / 8, (j + k) / 8
    s = interval_score(y, lo, hi, level)
    assert s >= hi - lo
    assert (s == hi - lo) == (lo <= y <= hi)


def test_metrics_are_order_independent():
    rng = np.random.default_rng(1)
    y, yhat = rng.normal(size=30), rng.normal(size=30)
    iv = np.sort(rng.normal(size=(30, 2)), axis=1)
    p = rng.permutation(30)
    assert rrmse(y, yhat) == pytest.approx(rrmse(y[p], yhat[p]))
    assert mis(y, iv) == pytest.approx(mis(y[p], iv[p]))


def test_total_sobol_on_additive_function():
    # f = x1 + 2 x2 on the unit square: total indices 1/5 and 4/5
    f = lambda X: X[:, 0] + 2 * X[:, 1]
    assert total_sobol(f, 0, 100_000, seed=0, lower=[0, 0], upper=[1, 1]) == pytest.approx(0.2, abs=0.01)
    assert total_sobol(f, 1, 100_000, seed=0, lower=[0, 0], upper=[1, 1]) == pytest.approx(0.8, abs=0.01)


def test_synthetic_generator():
    sp = qualitative_space([3, 4])
    (train,), theta = draw_responses(sp, [stratified_doe(sp, 2, seed=0)], seed=1)
    assert train.n == 24 and np.all(np.isfinite(train.Y))
    (again,), _ = draw_responses(sp, [stratified_doe(sp, 2, seed=0)], seed=1)
    np.testing.assert_array_equal(train.Y, again.Y)


def test_parse_method_and_seeds():
    assert parse_method("bayes") == ("bayes", "exact")
    assert parse_method("MAP/vfe") == ("map", "vfe")
    with pytest.raises(ValueError):
        parse_method("bayes-dtc")
    assert replicate_seeds(0, 2, 1) == replicate_seeds(0, 2, 1)
    assert replicate_seeds(0, 2, 1) != replicate_seeds(0, 2, 2)
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"colour": "red"})


def small_config(**kw):
    base = dict(function="synthetic", synthetic_levels=[3, 3], methods=["map", "mle"], per_level=[2],
                replicates=2, test_size=30, restarts=2, seed=5)
    base.update(kw)
    return ExperimentConfig(**base)


def test_experiment_outputs(tmp_path):
    rep = run_experiment(small_config(), tmp_path)
    m = pd.read_csv(tmp_path / "metrics.csv")
    assert list(m.columns) == ["replicate", "method", "size", "rrmse", "mis", "coverage", "status"]
    assert len(m) == 4 and set(m["status"]) == {"ok"}
    assert (tmp_path / "timings.csv").exists() and (tmp_path / "report.json").exists()
    assert len(list((tmp_path / "latents").glob("*.csv"))) == 4 * 2
    assert set(rep.summary()) == {"map/n=18", "mle/n=18"}


def test_experiment_records_failures(tmp_path):
    # more inducing points than observations is rejected; the run continues
    rep = run_experiment(small_config(methods=["map-fitc", "map"], n_inducing=100, replicates=1,
                                      write_latents=False))
    status = {r["method"]: r["status"] for r in rep.records}
    assert status["map"] == "ok" and status["map-fitc"].startswith("failed")

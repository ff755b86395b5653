import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.optimize import linprog

from lvgp.domain import Dataset
from lvgp.gp_exact import as_points, factorize, log_likelihood, predict
from lvgp.inference import PosteriorTarget, SparseJointTarget, SparseMapConfig, fit_sparse_map, sparse_layout
from lvgp.kernel import JITTER_START, cross_cov, latent_from_raw, one_hot
from lvgp.priors import PriorSpec
from lvgp.priors import from_unconstrained
from lvgp.sparse import (
    InducingSet, SparseLayout, inducing_from_weights, init_inducing, objective_parts, simplex_from_unconstrained,
    simplex_to_unconstrained, simplex_vjp, sparse_joint_objective_and_grad, sparse_objective,
    sparse_objective_and_grad, sparse_predict,
)

from conftest import central_diff, random_problem, rel_err


def random_inducing(rng, layout, M):
    return InducingSet(rng.random((M, layout.n_quant)),
                       [simplex_from_unconstrained(rng.normal(size=(M, L - 1))) for L in layout.n_levels])


def dense_objective(theta, ind, data, method):
    parts = objective_parts(theta, ind, data, method)
    S = parts.Q_NN + parts.G
    lp = stats.multivariate_normal(np.full(data.n, theta.mu), S, allow_singular=False).logpdf(data.Y)
    return lp - 0.5 * np.trace(parts.T) / parts.G[0, 0]


@pytest.mark.parametrize("method", ["fitc", "vfe"])
def test_objective_matches_dense_formula(method):
    rng = np.random.default_rng(0)
    for _ in range(10):
        data, layout, v = random_problem(rng, noise_floor=1e-6)
        theta, _ = from_unconstrained(v, layout)
        ind = random_inducing(rng, layout, int(rng.integers(1, 5)))
        assert sparse_objective(theta, ind, data, method) == pytest.approx(
            dense_objective(theta, ind, data, method), rel=1e-7, abs=1e-7)


@pytest.mark.parametrize("method", ["fitc", "vfe"])
def test_gradients(method):
    rng = np.random.default_rng(1)
    for _ in range(8):
        data, layout, v = random_problem(rng, noise_floor=1e-6)
        ind = random_inducing(rng, layout, 3)
        f = lambda u: sparse_objective_and_grad(u, layout, ind, data, method)[0]
        assert rel_err(sparse_objective_and_grad(v, layout, ind, data, method)[1], central_diff(f, v)) < 1e-5
        sl = SparseLayout(layout, 3)
        w = sl.pack(v, ind)
        fj = lambda u: sparse_joint_objective_and_grad(u, sl, data, method)[0]
        assert rel_err(sparse_joint_objective_and_grad(w, sl, data, method)[1], central_diff(fj, w)) < 1e-5


def test_predictions_match_dense_formula():
    rng = np.random.default_rng(2)
    data, layout, v = random_problem(rng, N=9, I=2, Ls=[3], noise_floor=1e-6)
    theta, _ = from_unconstrained(v, layout)
    ind = random_inducing(rng, layout, 4)
    Ws = Dataset(rng.random((6, 2)), rng.integers(1, 4, (6, 1)))
    P, Ps, U = as_points(data, [3]), as_points(Ws, [3]), ind.points()
    Kmm = cross_cov(theta, U, U) + JITTER_START * theta.sigma2 * np.eye(4)
    Kmn, Kms = cross_cov(theta, U, P), cross_cov(theta, U, Ps)
    for method in ["fitc", "vfe"]:
        G = objective_parts(theta, ind, data, method).G
        Sig = np.linalg.inv(Kmm + Kmn @ np.linalg.solve(G, Kmn.T))
        mean_ref = theta.mu + Kms.T @ Sig @ Kmn @ np.linalg.solve(G, data.Y - theta.mu)
        var_ref = (theta.sigma2 - np.einsum("ms,ms->s", Kms, np.linalg.solve(Kmm, Kms))
                   + np.einsum("ms,ms->s", Kms, Sig @ Kms))
        mean, var = sparse_predict(theta, ind, data, Ws, method)
        np.testing.assert_allclose(mean, mean_ref, atol=1e-6)
        np.testing.assert_allclose(var, var_ref, atol=1e-6)


def test_fitc_recovers_exact_model():
    rng = np.random.default_rng(3)
    data, layout, v = random_problem(rng, N=10, I=2, Ls=[3], noise_floor=1e-6)
    theta, _ = from_unconstrained(v, layout)
    ind = InducingSet(data.X.copy(), [one_hot(data.T[:, 0], 3)])
    assert sparse_objective(theta, ind, data, "fitc") == pytest.approx(log_likelihood(theta, data), abs=1e-6)
    m1, v1 = sparse_predict(theta, ind, data, data, "fitc")
    m2, v2 = predict(factorize(theta, data), data)
    np.testing.assert_allclose(m1, m2, atol=1e-6)
    np.testing.assert_allclose(v1, v2, atol=1e-6)


def test_vfe_lower_bound():
    rng = np.random.default_rng(4)
    for _ in range(20):
        data, layout, v = random_problem(rng, noise_floor=1e-6)
        theta, _ = from_unconstrained(v, layout)
        ind = random_inducing(rng, layout, int(rng.integers(1, 6)))
        assert sparse_objective(theta, ind, data, "vfe") <= log_likelihood(theta, data) + 1e-8


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), L=st.integers(2, 6))
def test_simplex_bijection(seed, L):
    rng = np.random.default_rng(seed)
    y = rng.normal(scale=3.0, size=(4, L - 1))
    psi = simplex_from_unconstrained(y)
    assert np.all(psi > 0) and np.allclose(psi.sum(axis=1), 1.0)
    np.testing.assert_allclose(simplex_to_unconstrained(psi), y, rtol=0, atol=1e-12)


def test_simplex_vjp():
    rng = np.random.default_rng(5)
    y, G = rng.normal(size=(3, 4)), rng.normal(size=(3, 5))
    f = lambda u: float((simplex_from_unconstrained(u.reshape(3, 4)) * G).sum())
    np.testing.assert_allclose(simplex_vjp(y, G).ravel(), central_diff(f, y.ravel(), 1e-6), atol=1e-8)


def test_inducing_set_validation_and_round_trip():
    with pytest.raises(ValueError):
        InducingSet(np.zeros((2, 1)), [np.array([[0.5, 0.6], [1.0, 0.0]])])
    rng = np.random.default_rng(6)
    data, layout, v = random_problem(rng, N=10, I=1, Ls=[3])
    ind = init_inducing(data, layout.n_levels, 4, seed=0)
    assert ind.M == 4 and np.allclose(ind.weights[0].sum(axis=1), 1.0)
    theta, _ = from_unconstrained(v, layout)
    frozen = ind.freeze(theta)
    back = InducingSet.from_dict(frozen.to_dict())
    np.testing.assert_allclose(back.coords(theta.latent)[0], frozen.frozen_coords[0])
    with pytest.raises(ValueError):
        sparse_objective(theta, ind, data, "dtc")


def test_inducing_from_weights_vertices_and_centroid():
    rng = np.random.default_rng(12)
    Z = latent_from_raw(rng.normal(size=(5, 2)))
    np.testing.assert_array_equal(inducing_from_weights(np.eye(5), Z), Z)
    np.testing.assert_allclose(inducing_from_weights(np.full((1, 5), 0.2), Z)[0], Z.mean(axis=0), atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), L=st.integers(2, 6), d=st.integers(1, 3))
def test_inducing_from_weights_in_convex_hull(seed, L, d):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(L, d))
    P = inducing_from_weights(simplex_from_unconstrained(rng.normal(size=(3, L - 1))), Z)
    for p in P:
        # feasibility of  lam >= 0, sum lam = 1, Z^T lam = p
        res = linprog(np.zeros(L), A_eq=np.vstack([Z.T, np.ones(L)]), b_eq=np.append(p, 1.0),
                      bounds=[(0, None)] * L, method="highs")
        assert res.status == 0


def test_fitc_posterior_matches_exact_along_slices():
    rng = np.random.default_rng(13)
    data, layout, v = random_problem(rng, N=10, I=2, Ls=[3, 4], noise_floor=1e-6)
    ind = InducingSet(data.X.copy(), [one_hot(data.T[:, j], L) for j, L in enumerate(layout.n_levels)])
    exact = PosteriorTarget(data, layout, PriorSpec())
    sparse = PosteriorTarget(data, layout, PriorSpec(), inducing=ind, method="fitc")
    for _ in range(3):
        u = rng.normal(size=v.size)
        u /= np.linalg.norm(u)
        for t in np.linspace(-1.0, 1.0, 9):
            a, b = exact(v + t * u)[0], sparse(v + t * u)[0]
            assert abs(a - b) <= 1e-6


def test_objective_cost_is_linear_in_n():
    def timed(N):
        rng = np.random.default_rng(14)
        data, layout, v = random_problem(rng, N=N, I=3, Ls=[4], noise_floor=1e-6)
        ind = random_inducing(rng, layout, 50)
        best = np.inf
        for _ in range(5):
            t0 = time.perf_counter()
            sparse_objective_and_grad(v, layout, ind, data, "vfe")
            best = min(best, time.perf_counter() - t0)
        return best

    assert timed(2000) < 10 * timed(200)


def test_vfe_warm_start_from_fitc():
    rng = np.random.default_rng(15)
    data, layout, _ = random_problem(rng, N=40, I=2, Ls=[3])
    slay = sparse_layout(2, [3], [2])
    cfg = SparseMapConfig(M=8, restarts=2, seed=0, max_iters=200)
    fitc = fit_sparse_map(data, slay, method="fitc", config=cfg)
    cold = fit_sparse_map(data, slay, method="vfe", config=cfg)
    warm = fit_sparse_map(data, slay, method="vfe", config=cfg, init_from=fitc)
    again = fit_sparse_map(data, slay, method="vfe", config=cfg, init_from=fitc)
    np.testing.assert_array_equal(warm.v, again.v)
    sl = SparseLayout(slay, 8)
    at_fitc = SparseJointTarget(data, sl, PriorSpec(), "vfe")(sl.pack(fitc.v, fitc.inducing))[0]
    assert warm.value >= at_fitc - 1e-8
    # iteration counts are reported only; the warm start is usually but not always faster
    print(f"VFE iterations: warm {warm.restarts[0].iterations}, "
          f"cold {[t.iterations for t in cold.restarts]}")

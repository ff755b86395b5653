import numpy as np
import pytest

from lvgp.domain import Dataset
from lvgp.priors import ParamLayout


def random_problem(rng, N=None, I=None, Ls=None, d=2, noise_floor=1e-8):
    """Small random mixed-input regression problem with a layout and a parameter vector."""
    N = N or int(rng.integers(3, 11))
    I = int(rng.integers(0, 4)) if I is None else I
    if Ls is None:
        J = int(rng.integers(0 if I else 1, 3))
        Ls = [int(rng.integers(2, 6)) for _ in range(J)]
    dims = [min(d, L - 1) for L in Ls]
    layout = ParamLayout(I, Ls, dims, noise_floor=noise_floor)
    X = rng.random((N, I))
    T = np.column_stack([rng.integers(1, L + 1, N) for L in Ls]) if Ls else np.zeros((N, 0), int)
    data = Dataset(X, T, rng.normal(size=N))
    v = 0.5 * rng.normal(size=layout.size)
    return data, layout, v


def central_diff(f, v, h=1e-5):
    g = np.zeros_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h
        g[i] = (f(v + e) - f(v - e)) / (2 * h)
    return g


def rel_err(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)))) if a.size else 0.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def conjugate_toy(N=8, seed=0):
    """Constant-mean model where only mu is free: posterior of mu is Gaussian in closed form.

    With a vanishing correlation (tiny length-scale, distinct inputs) the
    covariance is c I, so mu ~ N(0, 1) and y_i ~ N(mu, c) give the posterior
    N(m, s^2) with precision N/c + 1 and mean (sum y / c) / precision.
    """
    import math

    from lvgp.inference.targets import PosteriorTarget  # noqa: F401  (import check)

    rng = np.random.default_rng(seed)
    X = np.linspace(0, 1, N)[:, None]
    y = rng.normal(1.0, 0.7, N)
    data = Dataset(X, np.zeros((N, 0), int), y)
    layout = ParamLayout(1, [], [])
    sigma2, noise = 0.5, 0.05
    fixed = {"log_sigma2": math.log(sigma2), "log_omega[x1]": -8.0, "log_noise": math.log(noise)}
    c = sigma2 * (1 + 1e-8) + noise + layout.noise_floor
    prec = N / c + 1.0
    return data, layout, fixed, (y.sum() / c) / prec, prec ** -0.5


# ---------------------------------------------------------------------------
# Acceptance reporting: one PASS/FAIL line per criterion in the terminal summary
# ---------------------------------------------------------------------------

_ACCEPTANCE_LINES: list = []


@pytest.fixture
def criterion():
    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
        _ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

"""Convergence diagnostics: split-R-hat and effective sample size.

Both follow the rank-free formulation of Gelman et al. (BDA3, ch. 11): chains
are split in half, R-hat compares between- and within-half variances, and the
effective sample size truncates the combined autocorrelation sum with Geyer's
initial monotone sequence.
"""

from __future__ import annotations

import math

import numpy as np


def _split(x: np.ndarray) -> np.ndarray:
    """``(chains, draws)`` -> ``(2 * chains, draws // 2)``, dropping a middle draw if odd."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1] // 2
    if n == 0:
        return x
    return np.concatenate([x[:, :n], x[:, -n:]], axis=0)


def split_rhat(x) -> float:
    """Split potential scale reduction factor for one scalar, ``x`` is ``(chains, draws)``."""
    s = _split(x)
    m, n = s.shape
    if n < 2:
        return math.nan
    w = s.var(axis=1, ddof=1).mean()
    b = n * s.mean(axis=1).var(ddof=1) if m > 1 else 0.0
    if w <= 0:
        # constant within every half: converged iff the halves agree
        return 1.0 if b <= 1e-300 else math.inf
    var_plus = (n - 1) / n * w + b / n
    return float(math.sqrt(var_plus / w))


def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    size = 1 << (2 * n - 1).bit_length()
    xc = x - x.mean(axis=-1, keepdims=True)
    f = np.fft.rfft(xc, size, axis=-1)
    ac = np.fft.irfft(f * np.conj(f), size, axis=-1)[..., :n]
    return ac / n


def ess(x) -> float:
    """Effective sample size of one scalar from split chains."""
    s = _split(x)
    m, n = s.shape
    if n < 4:
        return math.nan
    acov = _autocov(s)
    w = acov[:, 0].mean() * n / (n - 1)
    if w <= 0:
        return float(m * n)
    b = n * s.mean(axis=1).var(ddof=1) if m > 1 else 0.0
    var_plus = (n - 1) / n * w + b / n
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # sum of adjacent pairs, truncated at the first negative pair and made monotone
    total = 0.0
    prev = math.inf
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0:
            break
        pair = min(pair, prev)
        total += pair
        prev = pair
        t += 2
    tau = -1.0 + 2.0 * total
    tau = max(tau, 1.0 / math.log10(m * n + 10))
    return float(m * n / tau)


def summarize(draws: np.ndarray, names: list[str]) -> dict:
    """Per-scalar R-hat and ESS for ``draws`` of shape ``(chains, draws, k)``."""
    out = {}
    for k, name in enumerate(names):
        x = draws[:, :, k]
        out[name] = {
            "mean": float(x.mean()),
            "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
            "rhat": split_rhat(x),
            "ess": ess(x),
        }
    return out


def identified_scalars(thetas, layout, quant_names=None, qual_names=None):
    """Scalars invariant to the latent frame: log hyperparameters and pairwise level distances.

    Raw latent coordinates are not identified (reflections of the constrained
    frame are equally likely), so diagnostics use distances instead.
    """
    qn = quant_names or [f"x{i + 1}" for i in range(layout.n_quant)]
    tn = qual_names or [f"t{j + 1}" for j in range(len(layout.n_levels))]
    names = ["mu", "log_sigma2"] + [f"log_omega[{n}]" for n in qn] + ["log_noise"]
    names += [f"log_gamma[{n}]" for n in tn]
    for n, L in zip(tn, layout.n_levels):
        names += [f"dist[{n}][{a},{b}]" for a in range(L) for b in range(a + 1, L)]
    rows = []
    for th in thetas:
        r = [th.mu, math.log(th.sigma2), *np.log(th.omega), math.log(th.noise - layout.noise_floor)]
        r += list(np.log(th.gamma))
        for Z in th.latent:
            iu = np.triu_indices(Z.shape[0], 1)
            D = np.sqrt(((Z[:, None, :] - Z[None, :, :]) ** 2).sum(-1))
            r += list(D[iu])
        rows.append(r)
    return np.asarray(rows, dtype=float).reshape(len(rows), len(names)), names

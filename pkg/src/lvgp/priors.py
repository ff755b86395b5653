"""Priors, the Gamma hyperprior on latent precisions and the map between
constrained hyperparameters and a flat unconstrained vector.

Unconstrained layout::

    [mu, log sigma2, log omega_1..I, log(noise - floor),
     raw_1 (L_1*d_1 entries, row-major), ..., raw_J, log gamma_1..J]

Positive parameters carry log-normal priors (normal on the log scale) except
the latent precisions, which are Gamma(alpha, alpha - 1) so that their mode
is at 1. Raw latents of variable j are i.i.d. Normal(0, 1 / (L_j gamma_j)).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .kernel import HyperParams

NOISE_FLOOR = 1e-8
_LOG2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class PriorSpec:
    alpha: float = 2.0
    mu_loc: float = 0.0
    mu_scale: float = 1.0
    log_sigma2_loc: float = 0.0
    log_sigma2_scale: float = 1.0
    log_omega_loc: float = 0.0
    log_omega_scale: float = 1.0
    log_noise_loc: float = -4.0
    log_noise_scale: float = 2.0
    flat: bool = False

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError("alpha must exceed 1")
        scales = (self.mu_scale, self.log_sigma2_scale, self.log_omega_scale, self.log_noise_scale)
        if min(scales) <= 0:
            raise ValueError("prior scales must be positive")

    @property
    def beta(self) -> float:
        return self.alpha - 1.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "PriorSpec":
        return cls(**dict(d))


class ParamLayout:
    """Shape bookkeeping for the unconstrained parameter vector."""

    def __init__(self, n_quant: int, n_levels: Sequence[int], latent_dims: Sequence[int],
                 noise_floor: float = NOISE_FLOOR):
        self.n_quant = int(n_quant)
        self.n_levels = [int(L) for L in n_levels]
        self.latent_dims = [int(d) for d in latent_dims]
        if len(self.n_levels) != len(self.latent_dims):
            raise ValueError("one latent dimension per qualitative variable is required")
        self.noise_floor = float(noise_floor)
        I = self.n_quant
        self.i_mu = 0
        self.i_sigma2 = 1
        self.s_omega = slice(2, 2 + I)
        self.i_noise = 2 + I
        start = 3 + I
        self.s_raw = []
        for L, d in zip(self.n_levels, self.latent_dims):
            self.s_raw.append(slice(start, start + L * d))
            start += L * d
        J = len(self.n_levels)
        self.s_gamma = slice(start, start + J)
        self.size = start + J

    @classmethod
    def for_theta(cls, theta: HyperParams, noise_floor: float = NOISE_FLOOR) -> "ParamLayout":
        return cls(theta.n_quant, [r.shape[0] for r in theta.raw], [r.shape[1] for r in theta.raw],
                   noise_floor)

    def names(self, quant_names=None, qual_names=None) -> list[str]:
        qn = quant_names or [f"x{i + 1}" for i in range(self.n_quant)]
        tn = qual_names or [f"t{j + 1}" for j in range(len(self.n_levels))]
        out = ["mu", "log_sigma2"] + [f"log_omega[{n}]" for n in qn] + ["log_noise"]
        for name, L, d in zip(tn, self.n_levels, self.latent_dims):
            out += [f"raw[{name}][{l},{r}]" for l in range(L) for r in range(d)]
        out += [f"log_gamma[{n}]" for n in tn]
        return out

    def to_dict(self) -> dict:
        return {"n_quant": self.n_quant, "n_levels": self.n_levels,
                "latent_dims": self.latent_dims, "noise_floor": self.noise_floor}

    @classmethod
    def from_dict(cls, d) -> "ParamLayout":
        return cls(d["n_quant"], d["n_levels"], d["latent_dims"], d.get("noise_floor", NOISE_FLOOR))


def to_unconstrained(theta: HyperParams, layout: ParamLayout | None = None) -> np.ndarray:
    layout = layout or ParamLayout.for_theta(theta)
    v = np.empty(layout.size)
    v[layout.i_mu] = theta.mu
    v[layout.i_sigma2] = math.log(theta.sigma2)
    v[layout.s_omega] = np.log(theta.omega)
    excess = theta.noise - layout.noise_floor
    if excess <= 0:
        raise ValueError(f"noise must exceed the floor {layout.noise_floor:g}")
    v[layout.i_noise] = math.log(excess)
    for s, r in zip(layout.s_raw, theta.raw):
        v[s] = r.ravel()
    v[layout.s_gamma] = np.log(theta.gamma)
    return v


def from_unconstrained(v, layout: ParamLayout) -> tuple[HyperParams, float]:
    """Return the hyperparameters and the log-Jacobian of the transform."""
    v = np.asarray(v, dtype=float)
    if v.shape != (layout.size,):
        raise ValueError(f"expected {layout.size} unconstrained values, got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("unconstrained vector has non-finite entries")
    raw = tuple(v[s].reshape(L, d) for s, L, d in zip(layout.s_raw, layout.n_levels, layout.latent_dims))
    theta = HyperParams(
        mu=float(v[layout.i_mu]),
        sigma2=math.exp(v[layout.i_sigma2]),
        omega=np.exp(v[layout.s_omega]),
        noise=layout.noise_floor + math.exp(v[layout.i_noise]),
        raw=raw,
        gamma=np.exp(v[layout.s_gamma]),
    )
    logjac = float(v[layout.i_sigma2] + v[layout.s_omega].sum() + v[layout.i_noise] + v[layout.s_gamma].sum())
    return theta, logjac


def _prior_constants(layout: ParamLayout, spec: PriorSpec):
    """Per-coordinate normal parameters of the leading block, cached on the layout."""
    cache = layout.__dict__.setdefault("_prior_cache", {})
    if spec not in cache:
        I = layout.n_quant
        loc = np.r_[spec.mu_loc, spec.log_sigma2_loc, np.full(I, spec.log_omega_loc), spec.log_noise_loc]
        scale = np.r_[spec.mu_scale, spec.log_sigma2_scale, np.full(I, spec.log_omega_scale),
                      spec.log_noise_scale]
        const = float(-np.log(scale).sum() - 0.5 * _LOG2PI * scale.size)
        a = spec.alpha
        gamma_const = a * math.log(spec.beta) - gammaln(a) if spec.beta > 0 else 0.0
        cache[spec] = (loc, scale, const, gamma_const)
    return cache[spec]


def log_prior_unconstrained(v, layout: ParamLayout, spec: PriorSpec, jacobian: bool = True):
    """Log prior density and its gradient, both in unconstrained coordinates.

    Without ``jacobian`` the value equals the density of the constrained
    hyperparameters (the quantity maximized for MAP estimates).
    """
    v = np.asarray(v, dtype=float)
    grad = np.zeros(layout.size)
    lp = 0.0
    n0 = layout.i_noise + 1  # mu, log sigma2, log omega, log noise
    sg = layout.s_gamma
    if jacobian:
        lp += float(v[1:n0].sum() + v[sg].sum())
        grad[1:n0] += 1.0
        grad[sg] += 1.0
    if spec.flat:
        return lp, grad

    loc, scale, const, gamma_const = _prior_constants(layout, spec)
    z = (v[:n0] - loc) / scale
    # log-normal priors on positives: normal density of the log minus the log
    lp += const - 0.5 * float(z @ z) - float(v[1:n0].sum())
    grad[:n0] -= z / scale
    grad[1:n0] -= 1.0

    a, b = spec.alpha, spec.beta
    for j, (s, L) in enumerate(zip(layout.s_raw, layout.n_levels)):
        k = sg.start + j
        lg = v[k]
        gam = math.exp(lg)
        r = v[s]
        prec = L * gam
        ss = float(r @ r)
        lp += 0.5 * r.size * (math.log(prec) - _LOG2PI) - 0.5 * prec * ss
        grad[s] -= prec * r
        lp += gamma_const + (a - 1.0) * lg - b * gam
        grad[k] += 0.5 * r.size - 0.5 * prec * ss + (a - 1.0) - b * gam
    return lp, grad


def log_prior(theta: HyperParams, spec: PriorSpec, noise_floor: float = 0.0) -> float:
    """Log density of the constrained hyperparameters under ``spec``.

    The noise prior applies to the excess of the noise variance over ``noise_floor``.
    """
    layout = ParamLayout.for_theta(theta, noise_floor=noise_floor)
    return log_prior_unconstrained(to_unconstrained(theta, layout), layout, spec, jacobian=False)[0]


def lv_log_prior(raw: np.ndarray, gamma: float) -> float:
    """Latent prior term for one qualitative variable."""
    raw = np.asarray(raw, dtype=float)
    prec = raw.shape[0] * gamma
    return 0.5 * raw.size * math.log(prec / (2 * math.pi)) - 0.5 * prec * float(np.sum(raw * raw))


def gamma_log_density(gamma: float, alpha: float) -> float:
    b = alpha - 1.0
    return alpha * math.log(b) - gammaln(alpha) + (alpha - 1.0) * math.log(gamma) - b * gamma


def log_posterior(v, layout: ParamLayout, data, spec: PriorSpec, jacobian: bool = True,
                  likelihood_weight: float = 1.0):
    """Unnormalized log posterior and gradient in unconstrained coordinates."""
    from .gp_exact import log_likelihood_and_grad

    lp, gp = log_prior_unconstrained(v, layout, spec, jacobian=jacobian)
    if likelihood_weight == 0.0:
        return lp, gp
    ll, gl = log_likelihood_and_grad(v, layout, data)
    return likelihood_weight * ll + lp, likelihood_weight * gl + gp

"""No-U-Turn Hamiltonian Monte Carlo with a diagonal Euclidean metric.

Trajectories are built by repeated doubling as in Hoffman & Gelman (2014),
with multinomial selection of the proposal inside each subtree and biased
progressive sampling between the old tree and a new subtree (Betancourt,
2017). Expansion stops when the generalized no-U-turn condition on the summed
momentum fails, for the whole tree or across any merge of two halves, at a
divergence (energy error above ``delta_max``) or at ``max_depth``.

Warmup follows the usual windowed scheme: dual averaging of the log step
size towards ``target_accept`` throughout, and a regularized diagonal mass
matrix estimated at the end of each slow window (75 / 25, 50, 100, ... / 50
iterations for 500 warmup draws). The step size is re-initialized after
every metric update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, index: int, name: str | None = None):
        label = name if name is not None else f"#{index}"
        super().__init__(f"non-finite gradient for parameter {label}")
        self.index = index
        self.name = name


@dataclass
class NutsConfig:
    warmup: int = 500
    draws: int = 250
    target_accept: float = 0.8
    max_depth: int = 10
    delta_max: float = 1000.0
    init_step_size: float = 0.1


@dataclass
class ChainResult:
    samples: np.ndarray
    logp: np.ndarray
    step_size: float
    inv_mass: np.ndarray
    divergences: int
    accept_stat: np.ndarray
    tree_depth: np.ndarray
    n_leapfrog: np.ndarray
    warmup_divergences: int = 0
    extra: dict = field(default_factory=dict)


@dataclass
class _State:
    q: np.ndarray
    logp: float
    grad: np.ndarray


@dataclass
class _Tree:
    s_minus: _State
    p_minus: np.ndarray
    s_plus: _State
    p_plus: np.ndarray
    rho: np.ndarray
    log_w: float
    prop: _State | None
    n: int
    accept: float
    valid: bool
    diverging: bool


class _DualAveraging:
    def __init__(self, step_size: float, gamma=0.05, t0=10.0, kappa=0.75):
        self.gamma, self.t0, self.kappa = gamma, t0, kappa
        self.restart(step_size)

    def restart(self, step_size: float):
        self.mu = math.log(10.0 * step_size)
        self.log_eps = math.log(step_size)
        self.log_eps_bar = 0.0
        self.h_bar = 0.0
        self.t = 0

    def update(self, accept: float, target: float) -> float:
        self.t += 1
        eta = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (target - accept)
        self.log_eps = self.mu - math.sqrt(self.t) / self.gamma * self.h_bar
        w = self.t ** (-self.kappa)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar
        return math.exp(self.log_eps)

    @property
    def final(self) -> float:
        return math.exp(self.log_eps_bar)


def warmup_windows(n_warmup: int) -> list[tuple[int, int]]:
    """Slow adaptation windows ``[start, end)`` for the mass matrix."""
    if n_warmup < 20:
        return []
    if n_warmup >= 150:
        init, term, base = 75, 50, 25
    else:
        init, term = int(0.15 * n_warmup), int(0.1 * n_warmup)
        base = n_warmup - init - term
    windows = []
    start, end = init, n_warmup - term
    size = base
    while start < end:
        stop = start + size
        # a window that would leave less than twice its size is merged forward
        if stop + 2 * size > end:
            stop = end
        windows.append((start, stop))
        start = stop
        size *= 2
    return windows


class _Sampler:
    def __init__(self, target, rng, cfg: NutsConfig, names=None):
        self.target = target
        self.rng = rng
        self.cfg = cfg
        self.names = names
        self.inv_mass = None
        self.n_grad = 0

    def evaluate(self, q) -> _State:
        val, g = self.target(q)
        self.n_grad += 1
        val = float(val)
        if math.isnan(val):
            val = -math.inf
        if math.isfinite(val):
            bad = np.flatnonzero(~np.isfinite(g))
            if bad.size:
                k = int(bad[0])
                raise NonFiniteGradientError(k, None if self.names is None else self.names[k])
        return _State(q, val, np.asarray(g, dtype=float))

    def kinetic(self, p) -> float:
        return 0.5 * float(p @ (self.inv_mass * p))

    def leapfrog(self, s: _State, p, eps):
        p_half = p + 0.5 * eps * s.grad
        q_new = s.q + eps * self.inv_mass * p_half
        s_new = self.evaluate(q_new)
        if not math.isfinite(s_new.logp):
            return s_new, p_half
        return s_new, p_half + 0.5 * eps * s_new.grad

    def persist(self, p_minus, p_plus, rho) -> bool:
        """Generalized no-U-turn condition on the summed momentum ``rho``."""
        return bool((self.inv_mass * p_minus) @ rho > 0 and (self.inv_mass * p_plus) @ rho > 0)

    def merge(self, a: _Tree, b: _Tree) -> _Tree:
        """Join adjacent trees, ``a`` on the minus side and ``b`` on the plus side.

        The proposal is not chosen here; callers pick it with the weighting
        appropriate to their level.
        """
        rho = a.rho + b.rho
        ok = (self.persist(a.p_minus, b.p_plus, rho)
              and self.persist(a.p_minus, b.p_minus, a.rho + b.p_minus)
              and self.persist(a.p_plus, b.p_plus, b.rho + a.p_plus))
        return _Tree(a.s_minus, a.p_minus, b.s_plus, b.p_plus, rho, np.logaddexp(a.log_w, b.log_w),
                     None, a.n + b.n, a.accept + b.accept, ok, False)

    def build(self, s: _State, p, direction: int, depth: int, eps: float, H0: float) -> _Tree:
        if depth == 0:
            s_new, p_new = self.leapfrog(s, p, direction * eps)
            if math.isfinite(s_new.logp):
                delta = -s_new.logp + self.kinetic(p_new) - H0
            else:
                delta = math.inf
            if math.isnan(delta):
                delta = math.inf
            diverging = delta > self.cfg.delta_max
            accept = math.exp(-delta) if delta > 0 else 1.0
            return _Tree(s_new, p_new, s_new, p_new, p_new.copy(), -delta, s_new, 1, accept,
                         not diverging, diverging)
        first = self.build(s, p, direction, depth - 1, eps, H0)
        if not first.valid:
            return first
        edge = (first.s_plus, first.p_plus) if direction > 0 else (first.s_minus, first.p_minus)
        second = self.build(edge[0], edge[1], direction, depth - 1, eps, H0)
        if not second.valid:
            second.n += first.n
            second.accept += first.accept
            return second
        tree = self.merge(first, second) if direction > 0 else self.merge(second, first)
        # uniform multinomial choice within the subtree
        if math.log(self.rng.random()) < second.log_w - tree.log_w:
            tree.prop = second.prop
        else:
            tree.prop = first.prop
        return tree

    def transition(self, s: _State, eps: float):
        p0 = self.rng.standard_normal(s.q.shape[0]) / np.sqrt(self.inv_mass)
        H0 = -s.logp + self.kinetic(p0)
        tree = _Tree(s, p0, s, p0, p0.copy(), 0.0, s, 0, 0.0, True, False)
        prop = s
        sum_accept, n_steps, diverged, depth = 0.0, 0, False, 0
        for depth in range(self.cfg.max_depth):
            direction = 1 if self.rng.random() < 0.5 else -1
            if direction > 0:
                sub = self.build(tree.s_plus, tree.p_plus, 1, depth, eps, H0)
            else:
                sub = self.build(tree.s_minus, tree.p_minus, -1, depth, eps, H0)
            sum_accept += sub.accept
            n_steps += sub.n
            if not sub.valid:
                diverged = sub.diverging
                break
            # biased progressive sampling favours the new subtree
            if math.log(self.rng.random()) < sub.log_w - tree.log_w:
                prop = sub.prop
            tree = self.merge(tree, sub) if direction > 0 else self.merge(sub, tree)
            if not tree.valid:
                break
        return prop, sum_accept / max(n_steps, 1), diverged, depth + 1, n_steps

    def find_step_size(self, s: _State, eps: float) -> float:
        """Double or halve ``eps`` until a single leapfrog step crosses 50% acceptance."""
        def log_accept(e):
            p = self.rng.standard_normal(s.q.shape[0]) / np.sqrt(self.inv_mass)
            s1, p1 = self.leapfrog(s, p, e)
            if not math.isfinite(s1.logp):
                return -math.inf
            return (s1.logp - self.kinetic(p1)) - (s.logp - self.kinetic(p))

        la = log_accept(eps)
        direction = 1 if la > math.log(0.5) else -1
        for _ in range(50):
            new = eps * (2.0 ** direction)
            la = log_accept(new)
            if direction > 0 and not la > math.log(0.5):
                break
            if direction < 0 and la > math.log(0.5):
                eps = new
                break
            eps = new
            if eps < 1e-10 or eps > 1e4:
                break
        return eps


def run_chain(target, q0, rng, cfg: NutsConfig = NutsConfig(), names=None,
              inv_mass=None) -> ChainResult:
    """Warm up and sample a single chain started at ``q0``."""
    sampler = _Sampler(target, rng, cfg, names)
    dim = np.asarray(q0).shape[0]
    sampler.inv_mass = np.ones(dim) if inv_mass is None else np.asarray(inv_mass, dtype=float).copy()
    s = sampler.evaluate(np.asarray(q0, dtype=float).copy())
    if not math.isfinite(s.logp):
        raise ValueError("initial point has zero posterior density")
    eps = sampler.find_step_size(s, cfg.init_step_size)
    da = _DualAveraging(eps)
    windows = warmup_windows(cfg.warmup)
    window_ends = {end: start for start, end in windows}
    buffer = []
    warm_div = 0
    for it in range(cfg.warmup):
        s, acc, div, _, _ = sampler.transition(s, eps)
        warm_div += int(div)
        eps = da.update(acc, cfg.target_accept)
        if any(a <= it < b for a, b in windows):
            buffer.append(s.q)
        if it + 1 in window_ends:
            x = np.asarray(buffer)
            n = x.shape[0]
            var = x.var(axis=0, ddof=1) if n > 1 else np.ones(dim)
            var = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            sampler.inv_mass = var
            buffer = []
            eps = sampler.find_step_size(s, eps)
            da.restart(eps)
    if cfg.warmup > 0:
        eps = da.final

    samples = np.empty((cfg.draws, dim))
    logp = np.empty(cfg.draws)
    accept = np.empty(cfg.draws)
    depth = np.empty(cfg.draws, dtype=int)
    nleap = np.empty(cfg.draws, dtype=int)
    ndiv = 0
    for it in range(cfg.draws):
        s, acc, div, dep, nl = sampler.transition(s, eps)
        samples[it] = s.q
        logp[it] = s.logp
        accept[it] = acc
        depth[it] = dep
        nleap[it] = nl
        ndiv += int(div)
    return ChainResult(samples, logp, eps, sampler.inv_mass, ndiv, accept, depth, nleap, warm_div,
                       {"gradient_evaluations": sampler.n_grad})

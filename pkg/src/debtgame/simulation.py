"""Monte Carlo for the debt ratio reflected at a (up) and/or b (down).

The log-ratio takes exact Gaussian steps; after each step the ratio is clamped
to [a, b] and the displacement is booked as reflection cost at the end of the
step. Running costs use the left point of each step.

Several configurations can be run on the same Gaussian increments (common
random numbers): path i of every configuration in a batch sees the same
noise. Paths are grouped in fixed chunks of CHUNK (antithetic pairs when
``antithetic`` is on); each chunk draws from its own SFC64 stream keyed by
(seed, crn_tag, chunk index), so results do not depend on the number of
worker threads.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, replace

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

from .errors import ConfigError, MismatchedStreams, SimulationBudgetExceeded
from .model import ModelParams

DEFAULT_DT = 1e-3
DEFAULT_PATHS = 100_000
HORIZON_TOL = 1e-6
MAX_PATH_STEPS = 5e11
CHUNK = 1024  # paths (antithetic pairs) per random stream
STEP_BLOCK = 256


@dataclass(frozen=True)
class SimConfig:
    x0: float
    a: float | None = None
    b: float | None = None
    dt: float = DEFAULT_DT
    horizon: float | None = None  # None: from the discount rule
    n_paths: int = DEFAULT_PATHS
    seed: int = 0
    antithetic: bool = True
    crn_tag: str = "default"

    def validate(self):
        if not (self.x0 > 0 and math.isfinite(self.x0)):
            raise ConfigError("x0 must be positive and finite")
        if not 0 < self.dt <= 1e-2:
            raise ConfigError("dt must lie in (0, 1e-2]")
        if self.a is not None and not self.a > 0:
            raise ConfigError("a must be positive")
        if self.b is not None and not self.b > 0:
            raise ConfigError("b must be positive")
        if self.a is not None and self.b is not None and not self.a < self.b:
            raise ConfigError("need a < b (degenerate or inverted band)")
        if self.n_paths < 2:
            raise ConfigError("need at least two paths")
        if self.antithetic and self.n_paths % 2:
            raise ConfigError("antithetic sampling needs an even path count")
        if self.horizon is not None and not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    std_error: float
    n_paths: int
    dt: float
    horizon: float
    tail_bound: float
    seed: int
    tail_heuristic: bool = False

    def z_score(self, exact: float) -> float:
        return (self.mean - exact) / self.std_error if self.std_error > 0 else math.inf


def default_horizon(params: ModelParams, tol: float = HORIZON_TOL) -> float:
    return -math.log(tol) / min(params.rho, params.lam)


def worker_count(n: int | None = None) -> int:
    """Threads to use: n, else DEBTGAME_THREADS, else the CPU count."""
    if n is None:
        env = os.environ.get("DEBTGAME_THREADS")
        n = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(n))


# streams --------------------------------------------------------------------

def _stream_key(seed: int, tag: str) -> int:
    h = int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")
    return (seed ^ h) & 0xFFFFFFFFFFFFFFFF


def _chunk_rng(key: int, chunk: int) -> np.random.Generator:
    # independent stream per chunk of paths; the chunk layout is fixed, so
    # path i always sees the same normals whatever the thread count
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(key, spawn_key=(chunk,))))


# kernel ---------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _advance(gf, ga, X, acc_g, acc_l, las, lbs, dr, dl, dt, alpha, m, c1, c2, kappa):
    S, P = gf.shape
    K, reps = X.shape[0], X.shape[1]
    for s in range(S):
        d0, d1, e0, e1 = dr[s], dr[s + 1], dl[s], dl[s + 1]
        for k in range(K):
            a, b = las[k], lbs[k]
            for j in range(reps):
                g = gf[s] if j == 0 else ga[s]
                xk, ag, al = X[k, j], acc_g[k, j], acc_l[k, j]
                for p in range(P):
                    x = xk[p]
                    xn = x * g[p]
                    up = max(a - xn, 0.0)
                    dn = max(xn - b, 0.0)
                    xk[p] = xn + up - dn
                    ag[p] += d0 * 0.5 * x * x * dt - d1 * c2 * up + d1 * c1 * dn
                    al[p] += e0 * alpha * max(x - m, 0.0) * dt + e1 * kappa * dn


# driver ---------------------------------------------------------------------

def _common(configs):
    c0 = configs[0]
    for c in configs[1:]:
        if (c.seed, c.crn_tag) != (c0.seed, c0.crn_tag):
            raise MismatchedStreams("configs in one batch must share seed and crn_tag")
        if (c.dt, c.horizon, c.n_paths, c.antithetic) != (c0.dt, c0.horizon, c0.n_paths, c0.antithetic):
            raise ConfigError("configs in one batch must share dt, horizon, n_paths and antithetic")
    return c0


def tail_bounds(config: SimConfig, params: ModelParams, T: float):
    """Analytic bounds on the cost ignored beyond the horizon T.

    With both barriers the ratio stays in [a, b]; reflection is bounded
    through Ito's formula for (Y - ln a)^2 (resp. (ln b - Y)^2), which gives
    E int_T^inf e^{-rT} dL <= e^{-rT} [(|nu| + sigma^2/(2w)) / r + w/2] with
    w = ln(b/a). One-sided cases use moment growth rates and are flagged as
    heuristic.
    """
    p = config
    mu, s2 = params.mu, params.sigma**2
    nu = mu - 0.5 * s2
    rho, lam = params.rho, params.lam
    if p.a is not None and p.b is not None:
        w = math.log(p.b / p.a)

        def lt(r):
            return math.exp(-r * T) * ((abs(nu) + s2 / (2 * w)) / r + 0.5 * w)

        g = math.exp(-rho * T) * 0.5 * p.b**2 / rho + params.c1 * p.b * lt(rho) + params.c2 * p.a * lt(rho)
        l_ = math.exp(-lam * T) * params.alpha * max(p.b - params.m, 0.0) / lam + params.kappa * p.b * lt(lam)
        return g, l_, False
    top = max(p.x0, p.a or 0.0)
    if p.b is not None:
        top = min(top, p.b)
    eps, ell = params.rho_margin, params.lam_margin
    # E X_t^2 grows at most like e^{(2mu+sigma^2)t} (times a reflection factor)
    g = 4.0 * top**2 * math.exp(-eps * T) / (2 * eps)
    l_ = 2.0 * params.alpha * top * math.exp(-ell * T) / ell
    if p.a is not None:
        g += params.c2 * p.a * math.exp(-rho * T) * (abs(nu) + params.sigma) / rho
    if p.b is not None:
        g += params.c1 * p.b * math.exp(-rho * T) * (abs(nu) + params.sigma) / rho
        l_ += params.kappa * p.b * math.exp(-lam * T) * (abs(nu) + params.sigma) / lam
    return g, l_, True


def _initial(configs, params, reps, P):
    # t = 0 jump into [a, b], booked at discount 1
    K = len(configs)
    X = np.empty((K, reps, P))
    g0 = np.zeros(K)
    l0 = np.zeros(K)
    for k, c in enumerate(configs):
        x = c.x0
        if c.a is not None and x < c.a:
            g0[k] = -params.c2 * (c.a - x)
            x = c.a
        elif c.b is not None and x > c.b:
            g0[k] = params.c1 * (x - c.b)
            l0[k] = params.kappa * (x - c.b)
            x = c.b
        X[k] = x
    return X, g0, l0


def _run_chunk(chunk, n_in, configs, params, key, reps, n_steps, dt, las, lbs, wmin):
    P = CHUNK
    nu = (params.mu - 0.5 * params.sigma**2) * dt
    sd = params.sigma * math.sqrt(dt)
    g2 = math.exp(2.0 * nu)
    rng = _chunk_rng(key, chunk)
    X, g0, l0 = _initial(configs, params, reps, P)
    K = len(configs)
    tot_g = np.zeros((K, reps, P))
    tot_l = np.zeros((K, reps, P))
    acc_g = np.empty((K, reps, P))
    acc_l = np.empty((K, reps, P))
    for s0 in range(0, n_steps, STEP_BLOCK):
        S = min(STEP_BLOCK, n_steps - s0)
        inc = rng.standard_normal((S, P))
        inc *= sd
        inc += nu
        if np.abs(inc).max() >= wmin:
            raise ConfigError("a single step spans the whole band; reduce dt")
        gf = np.exp(inc)
        ga = g2 / gf if reps == 2 else gf
        t = dt * np.arange(s0, s0 + S + 1)
        dr, dl = np.exp(-params.rho * t), np.exp(-params.lam * t)
        acc_g.fill(0.0)
        acc_l.fill(0.0)
        _advance(gf, ga, X, acc_g, acc_l, las, lbs, dr, dl, dt,
                 params.alpha, params.m, params.c1, params.c2, params.kappa)
        tot_g += acc_g
        tot_l += acc_l
    out_g = tot_g.mean(axis=1) + g0[:, None]
    out_l = tot_l.mean(axis=1) + l0[:, None]
    return out_g[:, :n_in], out_l[:, :n_in]


def simulate_paths(configs, params: ModelParams, max_path_steps: float = MAX_PATH_STEPS,
                   threads: int | None = None):
    """Per-path (per antithetic pair) discounted costs for a CRN batch.

    Returns (gov, leg, T) with arrays of shape (len(configs), n_units).
    """
    configs = list(configs)
    if not configs:
        raise ConfigError("no configurations given")
    for c in configs:
        c.validate()
    c0 = _common(configs)
    T = c0.horizon if c0.horizon is not None else default_horizon(params)
    n_steps = int(math.ceil(T / c0.dt - 1e-9))
    reps = 2 if c0.antithetic else 1
    n_units = c0.n_paths // reps
    cost = float(n_steps) * c0.n_paths * len(configs)
    if cost > max_path_steps:
        raise SimulationBudgetExceeded(f"{cost:.3g} path-steps exceed the budget {max_path_steps:.3g}")
    las = np.array([c.a if c.a is not None else 0.0 for c in configs], dtype=float)
    lbs = np.array([c.b if c.b is not None else np.inf for c in configs], dtype=float)
    # a step wider than the narrowest band would touch both barriers at once
    w = np.log(lbs / np.where(las > 0, las, 1e-300))
    wmin = float(w.min()) if np.isfinite(w).any() else np.inf
    key = _stream_key(c0.seed, c0.crn_tag)
    chunks = [(i, min(CHUNK, n_units - i * CHUNK)) for i in range(-(-n_units // CHUNK))]

    def work(ch):
        return _run_chunk(ch[0], ch[1], configs, params, key, reps, n_steps, c0.dt, las, lbs, wmin)

    n_workers = worker_count(threads)
    if n_workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(n_workers) as ex:
            parts = list(ex.map(work, chunks))
    else:
        parts = [work(ch) for ch in chunks]
    out_g = np.concatenate([p[0] for p in parts], axis=1)
    out_l = np.concatenate([p[1] for p in parts], axis=1)
    return out_g, out_l, n_steps * c0.dt


def _estimate(sample, config, T, tail, heuristic):
    n = sample.shape[0]
    return SimEstimate(
        mean=float(np.mean(sample)), std_error=float(np.std(sample, ddof=1) / math.sqrt(n)),
        n_paths=config.n_paths, dt=config.dt, horizon=T, tail_bound=tail, seed=config.seed,
        tail_heuristic=heuristic,
    )


def simulate_batch(configs, params: ModelParams, max_path_steps: float = MAX_PATH_STEPS,
                   threads: int | None = None):
    """(government, legislator) SimEstimate for each config, on common random numbers."""
    configs = list(configs)
    out_g, out_l, T = simulate_paths(configs, params, max_path_steps, threads)
    res = []
    for k, c in enumerate(configs):
        tg, tl, heur = tail_bounds(c, params, T)
        res.append((_estimate(out_g[k], c, T, tg, heur), _estimate(out_l[k], c, T, tl, heur)))
    return res


def simulate_cost_pair(config: SimConfig, params: ModelParams, max_path_steps: float = MAX_PATH_STEPS,
                       threads: int | None = None):
    """(government, legislator) cost estimates for a single configuration."""
    return simulate_batch([config], params, max_path_steps, threads)[0]


@dataclass(frozen=True)
class PairedDifference:
    """Estimates of cost(dev) - cost(base) from common random numbers."""

    gov_mean: float
    gov_se: float
    leg_mean: float
    leg_se: float
    gov_se_independent: float
    leg_se_independent: float
    n_units: int


def _paired(out_g, out_l, i, j):
    n = out_g.shape[1]
    dg, dl = out_g[j] - out_g[i], out_l[j] - out_l[i]
    ind_g = math.sqrt((np.var(out_g[i], ddof=1) + np.var(out_g[j], ddof=1)) / n)
    ind_l = math.sqrt((np.var(out_l[i], ddof=1) + np.var(out_l[j], ddof=1)) / n)
    return PairedDifference(
        gov_mean=float(dg.mean()), gov_se=float(dg.std(ddof=1) / math.sqrt(n)),
        leg_mean=float(dl.mean()), leg_se=float(dl.std(ddof=1) / math.sqrt(n)),
        gov_se_independent=ind_g, leg_se_independent=ind_l, n_units=n,
    )


def crn_compare(config_base: SimConfig, config_dev: SimConfig, params: ModelParams,
                max_path_steps: float = MAX_PATH_STEPS, threads: int | None = None) -> PairedDifference:
    """Paired difference dev - base on identical Gaussian increments."""
    if (config_base.seed, config_base.crn_tag) != (config_dev.seed, config_dev.crn_tag):
        raise MismatchedStreams("paired comparison needs equal seed and crn_tag")
    out_g, out_l, _ = simulate_paths([config_base, config_dev], params, max_path_steps, threads)
    return _paired(out_g, out_l, 0, 1)


def crn_compare_many(config_base: SimConfig, devs, params: ModelParams,
                     max_path_steps: float = MAX_PATH_STEPS, threads: int | None = None):
    """Paired differences of several deviations against one base, in one batch."""
    devs = list(devs)
    for d in devs:
        if (d.seed, d.crn_tag) != (config_base.seed, config_base.crn_tag):
            raise MismatchedStreams("paired comparison needs equal seed and crn_tag")
    out_g, out_l, _ = simulate_paths([config_base] + devs, params, max_path_steps, threads)
    return [_paired(out_g, out_l, 0, k + 1) for k in range(len(devs))]


def with_thresholds(config: SimConfig, **kw) -> SimConfig:
    return replace(config, **kw)

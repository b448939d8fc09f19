"""Normal CDF and the semi-infinite time integrals of the legislator's problem.

All integrals run over t in (0, inf) with integrands decaying like
exp(-(lambda - (r-g)) t). They are computed with QUADPACK after the
substitution t = s^2, which removes the 1/sqrt(t) endpoint singularity of
the density integral and smooths the t -> 0 behaviour of Phi(d1(x, t)).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DomainError, QuadratureFailure
from .model import ModelParams, char_roots

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureSettings:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000
    t_floor: float = 50.0

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.max_subdivisions > 0):
            raise DomainError("quadrature tolerances and subdivision count must be positive")

    def t_max(self, decay: float) -> float:
        """Truncation horizon for an integrand decaying like exp(-decay t).

        Long enough that the tail bound exp(-decay t)/decay sits two orders
        below rel_tol.
        """
        return max(self.t_floor, -math.log(1e-2 * self.rel_tol * min(1.0, decay)) / decay)


DEFAULT_QUAD = QuadratureSettings()


def std_normal_cdf(z):
    """Standard normal CDF through erfc (accurate in the lower tail)."""
    if np.ndim(z) == 0:
        return 0.5 * math.erfc(-float(z) / SQRT2)
    return special.ndtr(np.asarray(z, dtype=float))


def d1_d2(x: float, t: float, params: ModelParams):
    if not (x > 0 and t > 0):
        raise DomainError("d1/d2 need x > 0 and t > 0")
    st = params.sigma * math.sqrt(t)
    d1 = (math.log(x / params.m) + (params.mu + 0.5 * params.sigma**2) * t) / st
    return d1, d1 - st


def _phi_d1(x, s, p: ModelParams, logxm):
    # Phi(d1(x, s^2)), with the right limit at s = 0
    if s == 0.0:
        return 1.0 if logxm > 0 else (0.5 if logxm == 0 else 0.0)
    d1 = (logxm + (p.mu + 0.5 * p.sigma**2) * s * s) / (p.sigma * s)
    return 0.5 * math.erfc(-d1 / SQRT2)


def _crossing(x, p: ModelParams):
    # s at which d1 changes sign (only exists for x < m); helps the subdivision
    drift = p.mu + 0.5 * p.sigma**2
    logxm = math.log(x / p.m)
    if logxm < 0 and drift > 0:
        return math.sqrt(-logxm / drift)
    return None


def _quad(fn, s_max, points, settings: QuadratureSettings, tail: float, what: str):
    pts = [q for q in (points or []) if q is not None and 0.0 < q < s_max] or None
    res = integrate.quad(
        fn, 0.0, s_max, epsabs=settings.abs_tol, epsrel=settings.rel_tol,
        limit=settings.max_subdivisions, points=pts, full_output=1,
    )
    val, err = res[0], res[1]
    if len(res) > 3 and err > max(settings.abs_tol, settings.rel_tol * abs(val)):
        raise QuadratureFailure(f"{what}: {res[3].splitlines()[0]} (err={err:.3g})")
    return val, err + tail


@functools.lru_cache(maxsize=65536)
def _integral(kind: str, x: float, p: ModelParams, settings: QuadratureSettings):
    if not x > 0:
        raise DomainError("x must be positive")
    ell = p.lam_margin
    if not ell > 0:
        raise DomainError("lambda must exceed r - g")
    t_max = settings.t_max(ell)
    s_max = math.sqrt(t_max)
    logxm = math.log(x / p.m)
    pts = [_crossing(x, p)]
    decay = math.exp(-ell * t_max)

    if kind == "phi":
        # int_0^inf exp(-ell t) Phi(d1(x,t)) dt
        def fn(s):
            return 2.0 * s * math.exp(-ell * s * s) * _phi_d1(x, s, p, logxm)

        tail = decay / ell
    elif kind == "dens":
        # int_0^inf exp(-ell t) phi(d1(x,t)) / (sigma sqrt t) dt
        drift = p.mu + 0.5 * p.sigma**2

        def fn(s):
            if s == 0.0:
                return 2.0 * INV_SQRT_2PI / p.sigma if logxm == 0 else 0.0
            d1 = (logxm + drift * s * s) / (p.sigma * s)
            return 2.0 * math.exp(-ell * s * s - 0.5 * d1 * d1) * INV_SQRT_2PI / p.sigma

        tail = decay / (ell * p.sigma * math.sqrt(2.0 * math.pi * t_max))
    elif kind == "H":
        lam, sig = p.lam, p.sigma

        def fn(s):
            t = s * s
            if s == 0.0:
                return 0.0
            st = sig * s
            d1 = (logxm + (p.mu + 0.5 * sig * sig) * t) / st
            c1 = 0.5 * math.erfc(-d1 / SQRT2)
            c2 = 0.5 * math.erfc(-(d1 - st) / SQRT2)
            return 2.0 * s * (x * math.exp(-ell * t) * c1 - p.m * math.exp(-lam * t) * c2)

        tail = p.alpha * x * decay / ell
        val, err = _quad(fn, s_max, pts, settings, 0.0, "H")
        return p.alpha * val, p.alpha * err + tail
    else:  # pragma: no cover
        raise ValueError(kind)
    return _quad(fn, s_max, pts, settings, tail, kind)


def H(x: float, params: ModelParams, settings: QuadratureSettings = DEFAULT_QUAD) -> float:
    """Expected discounted cost alpha (X - m)^+ of the uncontrolled ratio from x."""
    return _integral("H", float(x), params, settings)[0]


def H_prime(x: float, params: ModelParams, settings: QuadratureSettings = DEFAULT_QUAD) -> float:
    return params.alpha * _integral("phi", float(x), params, settings)[0]


def H_second(x: float, params: ModelParams, settings: QuadratureSettings = DEFAULT_QUAD) -> float:
    return params.alpha * _integral("dens", float(x), params, settings)[0] / x


def phi_integral(x: float, params: ModelParams, settings: QuadratureSettings = DEFAULT_QUAD):
    """(value, error bound) of int_0^inf exp(-(lambda-(r-g)) t) Phi(d1(x,t)) dt."""
    return _integral("phi", float(x), params, settings)


def density_integral(x: float, params: ModelParams, settings: QuadratureSettings = DEFAULT_QUAD):
    """(value, error bound) of int_0^inf exp(-(lambda-(r-g)) t) phi(d1(x,t)) / (sigma sqrt t) dt."""
    return _integral("dens", float(x), params, settings)


def H_with_error(x: float, params: ModelParams, settings: QuadratureSettings = DEFAULT_QUAD):
    return _integral("H", float(x), params, settings)


def Dbar2(a: float, params: ModelParams, settings: QuadratureSettings = DEFAULT_QUAD) -> float:
    """Coefficient of x^theta2 in the no-ceiling legislator value."""
    th2 = char_roots(params, params.lam).neg
    return -params.alpha / th2 * a ** (1.0 - th2) * phi_integral(a, params, settings)[0]


def D3_D4(b: float, params: ModelParams, settings: QuadratureSettings = DEFAULT_QUAD):
    """Homogeneous coefficients of the legislator value on (a, b).

    Fixed by U' (b) = kappa and U''(b) = 0; they do not depend on a.
    """
    rp = char_roots(params, params.lam)
    t1, t2 = rp.pos, rp.neg
    k = params.kappa - params.alpha * phi_integral(b, params, settings)[0]
    dens = params.alpha * density_integral(b, params, settings)[0]
    D3 = b ** (1.0 - t1) * ((1.0 - t2) * k - dens) / (t1 * (t1 - t2))
    D4 = b ** (1.0 - t2) * ((t1 - 1.0) * k + dens) / (t2 * (t1 - t2))
    return D3, D4


def clear_cache():
    _integral.cache_clear()

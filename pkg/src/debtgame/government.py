"""Government best responses.

Case I (no ceiling): closed-form threshold a_bar and value V1_bar.
Case II (ceiling b): the threshold a(b), the unique zero of F(., b), and the
three-piece value U1(.; b).

F and its partials are written with plain arithmetic so the same code runs on
floats and on mpmath numbers. F cancels badly for b >> a (terms of size
(b/a)^(delta1-1) against an O(1) result), so roots are located in float64 and
then polished with Newton steps at MP_DPS digits; the reported residual is the
extended-precision value of F at the polished root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np
from scipy import optimize

from .errors import BracketFailure, DomainError, PeakNotFound
from .model import MP_DPS, ModelParams, char_roots, mp_params

BRACKET_EPS = 1e-10


def _consts(p: ModelParams):
    rp = char_roots(p, p.rho)
    return rp.pos, rp.neg, p.rho_margin, p.c1, p.c2


def _mp_consts(p: ModelParams):
    P = mp_params(p)
    return P["d1"], P["d2"], P["eps"], P["c1"], P["c2"]


# generic kernels: arguments may be floats or mpf

def _F(a, b, d1, d2, eps, c1, c2):
    q = b / a
    t1 = ((2 - d2) * a - c2 * (1 - d2) * eps) * q ** (d1 - 1)
    t2 = ((d1 - 2) * a - c2 * (d1 - 1) * eps) * q ** (d2 - 1)
    return t1 + t2 - (d1 - d2) * (b - c1 * eps)


def _dF_da(a, b, d1, d2, eps, c1, c2):
    q = b / a
    k = c2 * (d1 - 1) * (1 - d2) * eps - (d1 - 2) * (2 - d2) * a
    return (q ** (d1 - 1) - q ** (d2 - 1)) * k / a


def _dF_db(a, b, d1, d2, eps, c1, c2):
    q = b / a
    t1 = ((2 - d2) * a - c2 * (1 - d2) * eps) * q ** (d1 - 1)
    t2 = ((d1 - 2) * a - c2 * (d1 - 1) * eps) * q ** (d2 - 1)
    return ((d1 - 1) * t1 + (d2 - 1) * t2) / b - (d1 - d2)


def _check_ab(a, b):
    if not (a > 0 and b > 0 and a <= b):
        raise DomainError(f"F needs 0 < a <= b, got a={a!r}, b={b!r}")


def F(a: float, b: float, params: ModelParams) -> float:
    """Smooth-fit residual whose zero in a is the government threshold a(b)."""
    _check_ab(a, b)
    return _F(a, b, *_consts(params))


def dF_da(a: float, b: float, params: ModelParams) -> float:
    _check_ab(a, b)
    return _dF_da(a, b, *_consts(params))


def dF_db(a: float, b: float, params: ModelParams) -> float:
    _check_ab(a, b)
    return _dF_db(a, b, *_consts(params))


def F_mp(a, b, params: ModelParams):
    """F evaluated at MP_DPS digits (a, b may be floats or mpf)."""
    _check_ab(a, b)
    with mpmath.workdps(MP_DPS):
        return _F(mpmath.mpf(a), mpmath.mpf(b), *_mp_consts(params))


def F_diag(params: ModelParams) -> float:
    """F(b, b), the same for every b."""
    d1, d2, eps, c1, c2 = _consts(params)
    return (d1 - d2) * (c1 - c2) * eps


def a_tilde(params: ModelParams) -> float:
    return params.c2 * (params.rho - params.mu)


def D1_D2(a: float, params: ModelParams):
    """Coefficients of x^delta1, x^delta2 fixed by u'(a) = c2 and u''(a) = 0."""
    d1, d2, eps, c1, c2 = _consts(params)
    D1 = ((d2 - 2) * a - c2 * (d2 - 1) * eps) / (d1 * (d1 - d2) * eps * a ** (d1 - 1))
    D2 = -((d1 - 2) * a - c2 * (d1 - 1) * eps) / (d2 * (d1 - d2) * eps * a ** (d2 - 1))
    return D1, D2


@dataclass(frozen=True)
class GovNoCeilingSolution:
    a_bar: float
    D1_bar: float
    value: Callable[[float], float] = field(repr=False, compare=False)


def abar(params: ModelParams) -> GovNoCeilingSolution:
    """Closed-form threshold and value when the ceiling is never imposed."""
    d1, d2, eps, c1, c2 = _consts(params)
    a = (1 - d2) * c2 * eps / (2 - d2)
    D1b = -1.0 / (eps * d2 * (d2 - 1) * a ** (d2 - 2))
    lvl = D1b * a**d2 + a * a / (2 * eps)

    def value(x):
        x = float(x)
        if x <= 0:
            raise DomainError("x must be positive")
        if x < a:
            return lvl - c2 * (a - x)
        return D1b * x**d2 + x * x / (2 * eps)

    return GovNoCeilingSolution(a_bar=a, D1_bar=D1b, value=value)


def Vbar1(x: float, params: ModelParams) -> float:
    return abar(params).value(x)


@dataclass(frozen=True)
class GovBestResponse:
    b: float
    a_of_b: float
    residual: float
    dF_da: float
    D1: float
    D2: float
    bracket: tuple
    root_mp: object = field(default=None, repr=False, compare=False)


def _polish(fn, dfn, x0, lo, hi, steps=8):
    # Newton at MP_DPS digits, kept inside the bracket
    with mpmath.workdps(MP_DPS):
        x = mpmath.mpf(x0)
        lo, hi = mpmath.mpf(lo), mpmath.mpf(hi)
        tol = mpmath.mpf(10) ** (-(MP_DPS - 15))
        for _ in range(steps):
            step = fn(x) / dfn(x)
            xn = x - step
            if not lo <= xn <= hi:
                break
            x = xn
            if abs(step) <= tol * abs(x):
                break
        return x


def _bisect(fn, lo, hi, flo, rtol=1e-14):
    # plain bisection; fn is monotone on the bracket so sign noise only
    # matters inside the float64 rounding band around the root
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_a_of_b(b: float, params: ModelParams) -> GovBestResponse:
    """Government threshold a(b) for the imposed ceiling b."""
    b = float(b)
    if not (b > 0 and math.isfinite(b)):
        raise DomainError("b must be positive and finite")
    cs = _consts(params)
    hi = min(b, a_tilde(params))
    lo = BRACKET_EPS * hi
    f_lo, f_hi = _F(lo, b, *cs), _F(hi, b, *cs)
    if not (f_lo < 0 < f_hi):
        raise BracketFailure(f"F(., {b}) has no sign change on [{lo}, {hi}]: {f_lo}, {f_hi}")
    a0 = _bisect(lambda a: _F(a, b, *cs), lo, hi, f_lo)

    mcs = _mp_consts(params)
    with mpmath.workdps(MP_DPS):
        bm = mpmath.mpf(b)
        root = _polish(lambda a: _F(a, bm, *mcs), lambda a: _dF_da(a, bm, *mcs), a0, lo, hi)
        resid = abs(_F(root, bm, *mcs))
        slope = _dF_da(root, bm, *mcs)
    a = float(root)
    D1, D2 = D1_D2(a, params)
    return GovBestResponse(
        b=b, a_of_b=a, residual=float(resid), dF_da=float(slope), D1=D1, D2=D2,
        bracket=(lo, hi), root_mp=root,
    )


def a_of_b(b: float, params: ModelParams) -> float:
    return solve_a_of_b(b, params).a_of_b


def U1_from(br: GovBestResponse, params: ModelParams) -> Callable[[float], float]:
    """Value function U1(.; b) for an already solved best response."""
    eps, c1, c2 = params.rho_margin, params.c1, params.c2
    d1, d2 = _consts(params)[:2]
    a, b, D1, D2 = br.a_of_b, br.b, br.D1, br.D2

    def mid(x):
        return D1 * x**d1 + D2 * x**d2 + x * x / (2 * eps)

    ua, ub = mid(a), mid(b)

    def u(x):
        x = float(x)
        if x <= 0:
            raise DomainError("x must be positive")
        if x <= a:
            return ua - c2 * (a - x)
        if x < b:
            return mid(x)
        return ub + c1 * (x - b)

    return u


def U1(x: float, b: float, params: ModelParams) -> float:
    """Government cost under the best response to the ceiling b."""
    return U1_from(solve_a_of_b(b, params), params)(x)


def policy_cost_gov(x: float, a, b, params: ModelParams) -> float:
    """Government cost when X is reflected at a (if given) and b (if given).

    Solves the Neumann problem u'(a) = c2, u'(b) = c1 for the general
    solution A x^delta1 + B x^delta2 + x^2/(2 eps); missing barriers drop the
    power that would blow up at 0 or infinity.
    """
    d1, d2, eps, c1, c2 = _consts(params)
    x = float(x)
    if a is not None and b is not None and not 0 < a < b:
        raise DomainError("need 0 < a < b")

    def dp(y):
        return y / eps

    A = B = 0.0
    if a is not None and b is not None:
        M = np.array([[d1 * a ** (d1 - 1), d2 * a ** (d2 - 1)],
                      [d1 * b ** (d1 - 1), d2 * b ** (d2 - 1)]])
        A, B = np.linalg.solve(M, [c2 - dp(a), c1 - dp(b)])
    elif a is not None:
        B = (c2 - dp(a)) / (d2 * a ** (d2 - 1))
    elif b is not None:
        A = (c1 - dp(b)) / (d1 * b ** (d1 - 1))

    def u(y):
        return A * y**d1 + B * y**d2 + y * y / (2 * eps)

    if a is not None and x < a:
        return u(a) - c2 * (a - x)
    if b is not None and x > b:
        return u(b) + c1 * (x - b)
    return u(x)


def hat_b_diagnostic(params: ModelParams, n_grid: int = 400):
    """Location (b_hat, a(b_hat)) of the peak of b -> a(b)."""
    lo, hi = 1e-3 * params.m, 1e4 * params.m
    grid = np.geomspace(lo, hi, n_grid)
    vals = np.array([a_of_b(b, params) for b in grid])
    k = int(np.argmax(vals))
    if k == 0 or k == n_grid - 1:
        raise PeakNotFound(f"a(b) is monotone on [{lo}, {hi}]")
    res = optimize.minimize_scalar(
        lambda lb: -a_of_b(math.exp(lb), params),
        bracket=(math.log(grid[k - 1]), math.log(grid[k]), math.log(grid[k + 1])),
        method="golden", tol=1e-10,
    )
    b_hat = math.exp(res.x)
    return b_hat, a_of_b(b_hat, params)

"""Legislator best responses.

Case I (lambda above the regime boundary): the legislator never intervenes and
its cost is V2_bar(.; a). Case II: the ceiling b(a), the unique zero of
G(a, .) above a, with value U2(.; a); plus the closed-form lower bound b0 and
the slope q_tilde of the linear branch b(a) = a / q_tilde for a > m.

G cancels like F does (terms of size (b/a)^(1-theta2)), so roots are located
in float64 and polished at MP_DPS digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np

from . import special
from .errors import BoundaryRegime, BracketFailure, DomainError
from .government import _bisect, _polish
from .model import MP_DPS, ModelParams, RegimeTag, char_roots, classify_regime, mp_params

B_CAP_FACTOR = 1e8


def _consts(p: ModelParams):
    rp = char_roots(p, p.lam)
    return rp.pos, rp.neg, p.lam_margin, p.alpha, p.kappa, p.m


def _mp_consts(p: ModelParams):
    P = mp_params(p)
    return P["t1"], P["t2"], P["ell"], P["alpha"], P["kappa"], P["m"]


# generic kernels (floats or mpf)

def _G(a, b, t1, t2, ell, alpha, kappa, m):
    th = t1 - t2
    q = b / a
    P = (t1 - 1) * q ** (1 - t2) + (1 - t2) * q ** (1 - t1)
    out = P * kappa / th
    if b >= m:
        out -= P * alpha / (th * ell)
        if a < m:
            # closed at b = m so that G is continuous across b = m
            out += alpha / (th * ell) * ((1 - t2) * (m / a) ** (1 - t1) + (t1 - 1) * (m / a) ** (1 - t2))
    if a >= m:
        out += alpha / ell
    return out


def _dG_db(a, b, t1, t2, ell, alpha, kappa, m):
    q = b / a
    k = kappa * ell - (alpha if b >= m else 0)
    return (q ** (1 - t2) - q ** (1 - t1)) * (t1 - 1) * (1 - t2) * k / ((t1 - t2) * ell * b)


def _dG_da(a, b, t1, t2, ell, alpha, kappa, m):
    th = t1 - t2
    q = b / a
    k = kappa * ell - (alpha if b >= m else 0)
    s = (q ** (1 - t2) - q ** (1 - t1)) * k / (th * ell)
    if b >= m and a < m:
        s += alpha / (th * ell) * ((m / a) ** (1 - t2) - (m / a) ** (1 - t1))
    return -(t1 - 1) * (1 - t2) / a * s


def _check_ab(a, b):
    if not (a > 0 and b > 0 and a <= b):
        raise DomainError(f"G needs 0 < a <= b, got a={a!r}, b={b!r}")


def G(a: float, b: float, params: ModelParams) -> float:
    """Smooth-fit residual whose zero in b is the ceiling b(a)."""
    _check_ab(a, b)
    return _G(a, b, *_consts(params))


def dG_db(a: float, b: float, params: ModelParams) -> float:
    _check_ab(a, b)
    return _dG_db(a, b, *_consts(params))


def dG_da(a: float, b: float, params: ModelParams) -> float:
    _check_ab(a, b)
    return _dG_da(a, b, *_consts(params))


def G_mp(a, b, params: ModelParams):
    _check_ab(a, b)
    with mpmath.workdps(MP_DPS):
        return _G(mpmath.mpf(a), mpmath.mpf(b), *_mp_consts(params))


def _require_intervenes(params: ModelParams):
    reg = classify_regime(params)
    if reg.tag is RegimeTag.BOUNDARY:
        raise BoundaryRegime(f"lambda sits on the regime boundary (margin {reg.margin:.3g})")
    if reg.tag is not RegimeTag.LEGISLATOR_INTERVENES:
        raise DomainError("the legislator abstains for these parameters (no finite ceiling)")


def b0(params: ModelParams) -> float:
    """Closed-form lower bound of the ceiling map."""
    t1, t2, ell, alpha, kappa, m = _consts(params)
    den = alpha - kappa * ell
    if not den > 0:
        raise DomainError("b0 needs alpha > kappa (lambda - (r-g))")
    return (alpha / den) ** (1.0 / (1.0 - t2)) * m


def _Q(q, t1, t2, ell, alpha, kappa):
    c = kappa * ell - alpha
    return (1 - t2) * c * q ** (t1 - 1) + (t1 - 1) * c * q ** (t2 - 1) + alpha * (t1 - t2)


def _dQ(q, t1, t2, ell, alpha, kappa):
    c = kappa * ell - alpha
    return (1 - t2) * (t1 - 1) * c * (q ** (t1 - 2) - q ** (t2 - 2))


@dataclass(frozen=True)
class QTilde:
    value: float
    residual: float
    root_mp: object = field(default=None, repr=False, compare=False)


def qtilde(params: ModelParams) -> QTilde:
    """Ratio a / b(a) on the linear branch a > m."""
    _require_intervenes(params)
    cs = _consts(params)[:5]
    # smallest q whose power q^(theta2 - 1) stays well inside float range
    lo, hi = 10.0 ** (-250.0 / (1.0 - cs[1])), 1.0
    # Q is increasing on (0, 1) with Q(0+) = -inf and Q(1) > 0
    flo = _Q(lo, *cs)
    if not (flo < 0 < _Q(hi, *cs)):
        raise BracketFailure("q_tilde equation has no sign change on (0, 1)")
    # bisect in log q: the root can be tiny near the regime boundary
    lq = _bisect(lambda s: _Q(math.exp(s), *cs), math.log(lo), 0.0, flo, rtol=0.0)
    q0 = math.exp(lq)
    mcs = _mp_consts(params)[:5]
    with mpmath.workdps(MP_DPS):
        root = _polish(lambda q: _Q(q, *mcs), lambda q: _dQ(q, *mcs), q0, 0, 1)
        resid = abs(_Q(root, *mcs))
    return QTilde(value=float(root), residual=float(resid), root_mp=root)


@dataclass(frozen=True)
class LegisBestResponse:
    a: float
    b_of_a: float
    residual: float
    dG_db: float
    b0: float
    D3: float
    D4: float
    bracket: tuple
    root_mp: object = field(default=None, repr=False, compare=False)


def solve_b_of_a(a: float, params: ModelParams, settings=special.DEFAULT_QUAD,
                 with_coefficients: bool = True) -> LegisBestResponse:
    """Legislator ceiling b(a) for the government threshold a."""
    a = float(a)
    if not (a > 0 and math.isfinite(a)):
        raise DomainError("a must be positive and finite")
    _require_intervenes(params)
    cs = _consts(params)
    m = params.m
    lb0 = b0(params)
    lo = max(a, m, lb0 * (1 - 1e-12))
    g_lo = _G(a, lo, *cs)
    if not g_lo > 0:
        raise BracketFailure(f"G({a}, {lo}) = {g_lo} is not positive at the lower end")
    hi, cap = 2 * lo, B_CAP_FACTOR * m
    while _G(a, hi, *cs) >= 0:
        if hi >= cap:
            raise BracketFailure(f"G({a}, .) stays positive up to the cap {cap}")
        lo, hi = hi, min(2 * hi, cap)
    b_start = _bisect(lambda b: _G(a, b, *cs), lo, hi, _G(a, lo, *cs))

    mcs = _mp_consts(params)
    with mpmath.workdps(MP_DPS):
        am = mpmath.mpf(a)
        root = _polish(lambda b: _G(am, b, *mcs), lambda b: _dG_db(am, b, *mcs), b_start, lo, hi)
        resid = abs(_G(am, root, *mcs))
        slope = _dG_db(am, root, *mcs)
    b = float(root)
    D3 = D4 = float("nan")
    if with_coefficients:
        D3, D4 = special.D3_D4(b, params, settings)
    return LegisBestResponse(
        a=a, b_of_a=b, residual=float(resid), dG_db=float(slope), b0=lb0, D3=D3, D4=D4,
        bracket=(lo, hi), root_mp=root,
    )


def b_of_a(a: float, params: ModelParams) -> float:
    return solve_b_of_a(a, params, with_coefficients=False).b_of_a


def U2_from(br: LegisBestResponse, params: ModelParams,
            settings=special.DEFAULT_QUAD) -> Callable[[float], float]:
    """Value function U2(.; a) for an already solved best response."""
    t1, t2 = _consts(params)[:2]
    a, b, D3, D4 = br.a, br.b_of_a, br.D3, br.D4
    if math.isnan(D3):
        D3, D4 = special.D3_D4(b, params, settings)

    def mid(x):
        return D3 * x**t1 + D4 * x**t2 + special.H(x, params, settings)

    ua, ub = mid(a), mid(b)

    def u(x):
        x = float(x)
        if x <= 0:
            raise DomainError("x must be positive")
        if x <= a:
            return ua
        if x < b:
            return mid(x)
        return ub + params.kappa * (x - b)

    return u


def U2(x: float, a: float, params: ModelParams, settings=special.DEFAULT_QUAD) -> float:
    """Legislator cost under the best response to the threshold a."""
    return U2_from(solve_b_of_a(a, params, settings), params, settings)(x)


def Vbar2(x: float, a: float, params: ModelParams, settings=special.DEFAULT_QUAD) -> float:
    """Legislator cost when it never intervenes (lambda above the boundary)."""
    reg = classify_regime(params)
    if reg.tag is not RegimeTag.LEGISLATOR_ABSTAINS:
        raise DomainError("V2_bar is the legislator value only when it abstains")
    return policy_cost_leg(x, a, None, params, settings)


def policy_cost_leg(x: float, a, b, params: ModelParams, settings=special.DEFAULT_QUAD) -> float:
    """Legislator cost when X is reflected at a (if given) and b (if given).

    Solves u'(a) = 0, u'(b) = kappa for A x^theta1 + B x^theta2 + H(x);
    missing barriers drop the power that would blow up at 0 or infinity.
    """
    t1, t2 = _consts(params)[:2]
    kappa = params.kappa
    x = float(x)
    if a is not None and b is not None and not 0 < a < b:
        raise DomainError("need 0 < a < b")
    A = B = 0.0
    if a is not None and b is not None:
        M = np.array([[t1 * a ** (t1 - 1), t2 * a ** (t2 - 1)],
                      [t1 * b ** (t1 - 1), t2 * b ** (t2 - 1)]])
        A, B = np.linalg.solve(M, [-special.H_prime(a, params, settings),
                                   kappa - special.H_prime(b, params, settings)])
    elif a is not None:
        B = -special.H_prime(a, params, settings) / (t2 * a ** (t2 - 1))
    elif b is not None:
        A = (kappa - special.H_prime(b, params, settings)) / (t1 * b ** (t1 - 1))

    def u(y):
        return A * y**t1 + B * y**t2 + special.H(y, params, settings)

    if a is not None and x < a:
        return u(a)
    if b is not None and x > b:
        return u(b) + kappa * (x - b)
    return u(x)

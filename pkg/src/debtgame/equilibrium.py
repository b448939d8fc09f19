"""Nash equilibrium of the threshold game.

Case I (legislator abstains): the equilibrium is the government's no-ceiling
threshold a_bar. Case II: b* is the root of Psi(b) = G(a(b), b) above b0 and
a* = a(b*). The scalar root is bracketed by a log-grid scan, narrowed by
bisection, and the pair is then polished jointly on F = G = 0 at extended
precision. Best-response iteration is an independent cross-check.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import government as gov
from . import legislator as leg
from . import special
from .errors import BoundaryRegime, BracketFailure, MultipleRoots, SolverError
from .model import MP_DPS, ModelParams, Regime, RegimeTag, classify_regime, validate_params

log = logging.getLogger(__name__)

DEFAULT_B_CAP = 1e6  # in units of m
N_SCAN = 160


class CapExceeded(SolverError):
    """Psi stays positive up to the cap: b* lies beyond it (or does not exist)."""

    def __init__(self, cap):
        super().__init__(f"b* exceeds cap {cap:.6g}")
        self.cap = cap


@dataclass(frozen=True)
class NashOutcome:
    tag: str  # "Ceiling" or "NoCeiling"
    regime: Regime
    a_bar: float
    a_star: float
    b_star: float | None = None
    F_resid: float | None = None
    G_resid: float | None = None
    b0: float | None = None
    qtilde: float | None = None
    a_star_mp: object = field(default=None, repr=False, compare=False)
    b_star_mp: object = field(default=None, repr=False, compare=False)
    params: ModelParams | None = field(default=None, repr=False, compare=False)

    @property
    def is_ceiling(self) -> bool:
        return self.tag == "Ceiling"

    def value_gov(self):
        """Government value along the equilibrium (U1(.; b*) or V1_bar)."""
        if self.is_ceiling:
            return gov.U1_from(gov.solve_a_of_b(self.b_star, self.params), self.params)
        return gov.abar(self.params).value

    def value_leg(self, settings=special.DEFAULT_QUAD):
        """Legislator value along the equilibrium (U2(.; a*) or V2_bar(.; a_bar))."""
        p = self.params
        if self.is_ceiling:
            return leg.U2_from(leg.solve_b_of_a(self.a_star, p, settings), p, settings)
        return lambda x: leg.Vbar2(x, self.a_bar, p, settings)


def _a_fast(b, cs, a_t):
    # float-only a(b), good enough for sign scans
    hi = min(b, a_t)
    lo = gov.BRACKET_EPS * hi
    return gov._bisect(lambda a: gov._F(a, b, *cs), lo, hi, gov._F(lo, b, *cs))


def psi(b: float, params: ModelParams) -> float:
    """G(a(b), b); its zero above b0 is the equilibrium ceiling."""
    cs = gov._consts(params)
    a = _a_fast(b, cs, gov.a_tilde(params))
    return leg._G(a, b, *leg._consts(params))


def _scan(params, lo, hi, n):
    cs_g, cs_l, a_t = gov._consts(params), leg._consts(params), gov.a_tilde(params)
    grid = np.geomspace(lo, hi, n)
    vals = []
    for b in grid:
        vals.append(leg._G(_a_fast(b, cs_g, a_t), b, *cs_l))
    vals = np.array(vals)
    sign = np.sign(vals)
    idx = [i for i in range(n - 1) if sign[i] > 0 and sign[i + 1] <= 0 or sign[i] < 0 and sign[i + 1] >= 0]
    return grid, vals, idx


def _polish_pair(a0, b0_, params, steps=12):
    # joint Newton on (F, G) = 0 at MP_DPS digits
    gcs, lcs = gov._mp_consts(params), leg._mp_consts(params)
    with mpmath.workdps(MP_DPS):
        a, b = mpmath.mpf(a0), mpmath.mpf(b0_)
        tol = mpmath.mpf(10) ** (-(MP_DPS - 15))
        for _ in range(steps):
            f, g = gov._F(a, b, *gcs), leg._G(a, b, *lcs)
            J = mpmath.matrix([[gov._dF_da(a, b, *gcs), gov._dF_db(a, b, *gcs)],
                               [leg._dG_da(a, b, *lcs), leg._dG_db(a, b, *lcs)]])
            da, db = mpmath.lu_solve(J, mpmath.matrix([f, g]))
            if not (0 < a - da < b - db):
                break
            a, b = a - da, b - db
            if abs(da) <= tol * a and abs(db) <= tol * b:
                break
        return a, b, abs(gov._F(a, b, *gcs)), abs(leg._G(a, b, *lcs))


def solve_nash(params: ModelParams, b_cap: float = DEFAULT_B_CAP, n_scan: int = N_SCAN,
               check: bool = True) -> NashOutcome:
    """Equilibrium thresholds for the given parameters.

    ``b_cap`` bounds the scan for b* in units of m.
    """
    reg = classify_regime(params)
    a_bar = gov.abar(params).a_bar
    if reg.tag is RegimeTag.BOUNDARY:
        raise BoundaryRegime(f"lambda is on the regime boundary (margin {reg.margin:.3g})")
    if reg.tag is RegimeTag.LEGISLATOR_ABSTAINS:
        return NashOutcome(tag="NoCeiling", regime=reg, a_bar=a_bar, a_star=a_bar, params=params)

    lb0 = leg.b0(params)
    qt = leg.qtilde(params).value
    lo, hi = lb0 * (1 + 1e-9), b_cap * params.m
    if not hi > lo:
        raise CapExceeded(hi)
    grid, vals, idx = _scan(params, lo, hi, n_scan)
    log.debug("Psi(b0+) = %.6g, Psi(cap) = %.6g", vals[0], vals[-1])
    if len(idx) > 1:
        cands = [float(grid[i]) for i in idx]
        raise MultipleRoots(f"Psi changes sign {len(idx)} times", cands)
    if not idx:
        if vals[0] > 0 and vals[-1] > 0:
            raise CapExceeded(hi)
        raise BracketFailure(f"Psi has no sign change on [{lo:.6g}, {hi:.6g}]")
    i = idx[0]
    blo, bhi = float(grid[i]), float(grid[i + 1])
    b_start = gov._bisect(lambda b: psi(b, params), blo, bhi, float(vals[i]))
    a_start = gov.a_of_b(b_start, params)
    am, bm, fr, gr = _polish_pair(a_start, b_start, params)
    a_star, b_star = float(am), float(bm)
    if not (0 < a_star < b_star and b_star > lb0):
        raise SolverError(f"equilibrium polish left the admissible set: a={a_star}, b={b_star}")
    out = NashOutcome(
        tag="Ceiling", regime=reg, a_bar=a_bar, a_star=a_star, b_star=b_star,
        F_resid=float(fr), G_resid=float(gr), b0=lb0, qtilde=qt,
        a_star_mp=am, b_star_mp=bm, params=params,
    )
    if check:
        cross = consistency(out)
        if cross["b_of_a_star"] > 1e-8 or cross["a_of_b_star"] > 1e-8:
            raise SolverError(f"best-response cross-check failed: {cross}")
    return out


def consistency(out: NashOutcome) -> dict:
    """Relative gaps |b(a*) - b*| / b* and |a(b*) - a*| / max(a*, m)."""
    p = out.params
    bb = leg.b_of_a(out.a_star, p)
    aa = gov.a_of_b(out.b_star, p)
    return {
        "b_of_a_star": abs(bb - out.b_star) / out.b_star,
        "a_of_b_star": abs(aa - out.a_star) / max(out.a_star, p.m),
    }


def best_response_iteration(params: ModelParams, a0: float | None = None, tol: float = 1e-13,
                            max_iter: int = 1000):
    """Iterate a -> a(b(a)) from a0 (default a_bar). Returns (a, b, iterations)."""
    a = gov.abar(params).a_bar if a0 is None else float(a0)
    for it in range(1, max_iter + 1):
        b = leg.b_of_a(a, params)
        a_new = gov.a_of_b(b, params)
        if abs(a_new - a) <= tol * max(a, 1e-300):
            return a_new, leg.b_of_a(a_new, params), it
        a = a_new
    raise SolverError(f"best-response iteration did not converge in {max_iter} steps")


def boundary_grid(lo: float, hi: float, n: int, closest: float = 1e-4) -> np.ndarray:
    """Points in [lo, hi) whose distance to hi shrinks geometrically.

    Starts at the midpoint and ends ``closest * (hi - lo)`` short of hi.
    """
    if n < 2:
        return np.array([0.5 * (lo + hi)])
    w = hi - lo
    k = np.arange(n)
    return hi - 0.5 * w * (2 * closest) ** (k / (n - 1))


@dataclass(frozen=True)
class LimitRow:
    lam: float
    a_star: float | None
    b_star: float | None
    a_gap: float | None
    qtilde: float | None
    F_resid: float | None
    G_resid: float | None
    status: str


def lambda_limit_diagnostic(params: ModelParams, lambda_grid, b_cap: float = DEFAULT_B_CAP):
    """Equilibrium along a lambda grid approaching the regime boundary.

    Returns (rows, checks) where checks records whether b* is increasing and
    whether |a* - a_bar| decreases along the solved rows.
    """
    a_bar = gov.abar(params).a_bar
    rows = []
    for lam in lambda_grid:
        p = validate_params(params.as_dict(), **{"lambda": float(lam)})
        try:
            out = solve_nash(p, b_cap=b_cap)
        except CapExceeded:
            rows.append(LimitRow(float(lam), None, None, None, None, None, None, "b_star_exceeds_cap"))
            continue
        except SolverError as e:
            rows.append(LimitRow(float(lam), None, None, None, None, None, None, type(e).__name__))
            continue
        if out.is_ceiling:
            rows.append(LimitRow(float(lam), out.a_star, out.b_star, abs(out.a_star - a_bar),
                                 out.qtilde, out.F_resid, out.G_resid, "ok"))
        else:
            rows.append(LimitRow(float(lam), out.a_star, None, 0.0, None, None, None, "no_ceiling"))
    solved = [r for r in rows if r.b_star is not None]
    bs = [r.b_star for r in solved]
    gaps = [r.a_gap for r in solved]
    checks = {
        "b_star_increasing": all(x < y for x, y in zip(bs, bs[1:])),
        "a_gap_decreasing": all(x > y for x, y in zip(gaps, gaps[1:])),
        "cap_rows_trailing": all(r.status == "b_star_exceeds_cap"
                                 for r in rows[len(solved):]) if solved else True,
    }
    return rows, checks


@dataclass(frozen=True)
class DeviationRow:
    player: str  # "government" or "legislator"
    epsilon: float
    threshold: float
    diff: float  # cost(deviation) - cost(equilibrium), paired
    paired_se: float
    independent_se: float
    ok: bool


@dataclass(frozen=True)
class DeviationReport:
    a_star: float
    b_star: float
    x0: float
    n_paths: int
    rows: list

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)


def deviation_certificate(params: ModelParams, outcome: NashOutcome,
                          epsilons=(-0.10, -0.05, 0.05, 0.10), x0: float | None = None,
                          n_paths: int = 20_000, dt: float = 1e-3, seed: int = 0,
                          crn_tag: str = "deviation", max_path_steps: float | None = None,
                          threads: int | None = None) -> DeviationReport:
    """Check unilateral threshold deviations by common-random-number Monte Carlo.

    Each relative perturbation moves a* (government) or b* (legislator)
    while the opponent keeps its equilibrium threshold; a deviation passes
    when it does not lower the deviating player's simulated cost by more than
    two paired standard errors.
    """
    from . import simulation as sim

    if not outcome.is_ceiling:
        raise ValueError("deviation certificate needs a Ceiling outcome")
    a, b = outcome.a_star, outcome.b_star
    x0 = 0.5 * (a + b) if x0 is None else float(x0)
    base = sim.SimConfig(x0=x0, a=a, b=b, dt=dt, n_paths=n_paths, seed=seed, crn_tag=crn_tag)
    devs = [("government", e, sim.with_thresholds(base, a=a * (1 + e))) for e in epsilons]
    devs += [("legislator", e, sim.with_thresholds(base, b=b * (1 + e))) for e in epsilons]
    kw = {} if max_path_steps is None else {"max_path_steps": max_path_steps}
    diffs = sim.crn_compare_many(base, [d[2] for d in devs], params, threads=threads, **kw)
    rows = []
    for (who, e, cfg), d in zip(devs, diffs):
        if who == "government":
            mean, se, ind, thr = d.gov_mean, d.gov_se, d.gov_se_independent, cfg.a
        else:
            mean, se, ind, thr = d.leg_mean, d.leg_se, d.leg_se_independent, cfg.b
        rows.append(DeviationRow(who, e, thr, mean, se, ind, mean >= -2.0 * se))
    return DeviationReport(a_star=a, b_star=b, x0=x0, n_paths=n_paths, rows=rows)

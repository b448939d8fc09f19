"""Model parameters, assumption checks, regime split and characteristic roots."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace

import mpmath

from .errors import AssumptionViolation, DomainError, NonFinite

# working precision for extended-precision root polishing
MP_DPS = 60

PARAM_KEYS = ("r", "g", "sigma", "rho", "lambda", "alpha", "kappa", "m", "c1", "c2")


@dataclass(frozen=True)
class ModelParams:
    """The ten scalar model parameters.

    Only instances built through :func:`validate_params` should be passed
    to the solvers; the dataclass itself does not re-check anything.
    """

    r: float
    g: float
    sigma: float
    rho: float
    lam: float
    alpha: float
    kappa: float
    m: float
    c1: float
    c2: float

    @property
    def mu(self) -> float:
        """Net drift r - g of the debt ratio."""
        return self.r - self.g

    @property
    def rho_margin(self) -> float:
        """rho - 2(r-g) - sigma^2, positive under the standing assumptions."""
        return self.rho - 2.0 * self.mu - self.sigma**2

    @property
    def lam_margin(self) -> float:
        """lambda - (r-g), positive under the standing assumptions."""
        return self.lam - self.mu

    @property
    def lambda_boundary(self) -> float:
        return self.mu + self.alpha / self.kappa

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["lambda"] = d.pop("lam")
        return {k: d[k] for k in PARAM_KEYS}

    def with_(self, **changes) -> "ModelParams":
        """Copy with some values replaced (``lambda`` is accepted as a key).

        The result is *not* validated; pass it through :func:`validate_params`.
        """
        if "lambda" in changes:
            changes["lam"] = changes.pop("lambda")
        return replace(self, **changes)


TABLE_PARAMS = dict(
    rho=0.3, sigma=0.2, r=0.025, g=0.02, alpha=0.15, m=0.6, c1=2.0, c2=1.25, kappa=0.6
)


def validate_params(raw=None, **kwargs) -> ModelParams:
    """Build a :class:`ModelParams`, checking every standing assumption.

    Accepts a mapping with the keys ``r, g, sigma, rho, lambda, alpha,
    kappa, m, c1, c2`` (``lam`` is accepted as an alias of ``lambda``),
    or the same as keyword arguments. Every failed inequality is collected
    and reported together; nothing is clamped.
    """
    vals = dict(raw or {})
    vals.update(kwargs)
    if "lam" in vals and "lambda" not in vals:
        vals["lambda"] = vals.pop("lam")
    missing = [k for k in PARAM_KEYS if k not in vals]
    if missing:
        raise DomainError(f"missing parameters: {missing}")
    unknown = sorted(set(vals) - set(PARAM_KEYS))
    if unknown:
        raise DomainError(f"unknown parameters: {unknown}")

    num = {}
    bad = []
    for k in PARAM_KEYS:
        try:
            v = float(vals[k])
        except (TypeError, ValueError):
            raise DomainError(f"parameter {k} is not a number: {vals[k]!r}") from None
        if not math.isfinite(v):
            bad.append(k)
        num[k] = v
    if bad:
        raise NonFinite(f"non-finite parameters: {bad}")

    r, g, s = num["r"], num["g"], num["sigma"]
    mu = r - g
    checks = [
        ("c1>c2", num["c1"], num["c2"]),
        ("c2>0", num["c2"], 0.0),
        ("rho>2(r-g)+sigma^2", num["rho"], 2.0 * mu + s * s),
        ("lambda>r-g", num["lambda"], mu),
        ("m>0", num["m"], 0.0),
        ("alpha>0", num["alpha"], 0.0),
        ("kappa>0", num["kappa"], 0.0),
        ("sigma>0", s, 0.0),
        # rho > 0 and lambda > 0 keep the characteristic discriminant positive
        ("rho>0", num["rho"], 0.0),
        ("lambda>0", num["lambda"], 0.0),
    ]
    violations = [(n, lhs, rhs) for n, lhs, rhs in checks if not lhs > rhs]
    if violations:
        raise AssumptionViolation(violations)

    p = ModelParams(
        r=r, g=g, sigma=s, rho=num["rho"], lam=num["lambda"], alpha=num["alpha"],
        kappa=num["kappa"], m=num["m"], c1=num["c1"], c2=num["c2"],
    )
    gov = char_roots(p, p.rho)
    assert gov.pos > 2.0, "government positive root must exceed 2"
    return p


@dataclass(frozen=True)
class RootPair:
    """Positive and negative roots of (s^2/2) x (x-1) + (r-g) x - discount = 0."""

    pos: float
    neg: float
    discount: float


def _stable_roots(A, B, C, sqrt):
    # larger-magnitude root first, the other through the Vieta product
    disc = sqrt(B * B - 4 * A * C)
    q = -(B + disc) / 2 if B >= 0 else -(B - disc) / 2
    x1, x2 = q / A, C / q
    return (x1, x2) if x1 > x2 else (x2, x1)


def char_roots(params: ModelParams, discount: float) -> RootPair:
    """Characteristic roots for the given discount rate (rho or lambda)."""
    if not discount > 0:
        raise DomainError("discount rate must be positive")
    s2 = params.sigma**2
    pos, neg = _stable_roots(0.5 * s2, params.mu - 0.5 * s2, -discount, math.sqrt)
    return RootPair(pos=pos, neg=neg, discount=discount)


def root_residual(params: ModelParams, x: float, discount: float) -> float:
    s2 = params.sigma**2
    return 0.5 * s2 * x * (x - 1.0) + params.mu * x - discount


def mp_params(params: ModelParams) -> dict:
    """Exact mpf images of the (binary) parameter values plus derived roots at MP_DPS digits."""
    with mpmath.workdps(MP_DPS):
        P = {k: mpmath.mpf(v) for k, v in params.as_dict().items()}
        P["mu"] = P["r"] - P["g"]
        s2 = P["sigma"] ** 2
        A, B = s2 / 2, P["mu"] - s2 / 2
        P["d1"], P["d2"] = _stable_roots(A, B, -P["rho"], mpmath.sqrt)
        P["t1"], P["t2"] = _stable_roots(A, B, -P["lambda"], mpmath.sqrt)
        P["eps"] = P["rho"] - 2 * P["mu"] - s2
        P["ell"] = P["lambda"] - P["mu"]
    return P


class RegimeTag(str, enum.Enum):
    LEGISLATOR_INTERVENES = "LegislatorIntervenes"
    LEGISLATOR_ABSTAINS = "LegislatorAbstains"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    margin: float  # lambda - (r - g + alpha/kappa)


def classify_regime(params: ModelParams) -> Regime:
    margin = params.lam - params.lambda_boundary
    tol = 1e-12 * max(1.0, params.alpha / params.kappa)
    if abs(margin) <= tol:
        tag = RegimeTag.BOUNDARY
    elif margin > 0:
        tag = RegimeTag.LEGISLATOR_ABSTAINS
    else:
        tag = RegimeTag.LEGISLATOR_INTERVENES
    return Regime(tag=tag, margin=margin)


def table_params(**overrides) -> ModelParams:
    """Comparative-statics base parameters, with lambda defaulting to 0.1."""
    raw = dict(TABLE_PARAMS, **{"lambda": 0.1})
    raw.update(overrides)
    return validate_params(raw)

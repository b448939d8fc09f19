import math

import pytest
from hypothesis import given, settings, strategies as st

from debtgame.errors import AssumptionViolation, DomainError, NonFinite
from debtgame.model import (PARAM_KEYS, RegimeTag, char_roots, classify_regime, mp_params,
                            root_residual, table_params, validate_params)

TABLE = {"rho": 0.3, "sigma": 0.2, "r": 0.025, "g": 0.02, "alpha": 0.15, "m": 0.6,
         "c1": 2.0, "c2": 1.25, "kappa": 0.6, "lambda": 0.1}


def test_table_parameters_are_valid():
    p = validate_params(TABLE)
    assert p.lam == 0.1 and p.mu == pytest.approx(0.005)
    assert p.as_dict() == TABLE


def test_c2_above_c1_is_named():
    with pytest.raises(AssumptionViolation) as ei:
        validate_params(dict(TABLE, c2=2.5))
    assert ei.value.names == ["c1>c2"]


def test_small_rho_is_named():
    with pytest.raises(AssumptionViolation) as ei:
        validate_params(dict(TABLE, rho=0.04))
    assert "rho>2(r-g)+sigma^2" in ei.value.names
    name, lhs, rhs = ei.value.violations[0]
    assert lhs == 0.04 and rhs == pytest.approx(0.05)


def test_all_violations_are_collected():
    with pytest.raises(AssumptionViolation) as ei:
        validate_params(dict(TABLE, c2=-1.0, m=-0.1, kappa=0.0))
    assert set(ei.value.names) >= {"c2>0", "m>0", "kappa>0"}


def test_lambda_below_drift_rejected():
    with pytest.raises(AssumptionViolation) as ei:
        validate_params(dict(TABLE, **{"lambda": 0.004}))
    assert "lambda>r-g" in ei.value.names


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite(bad):
    with pytest.raises(NonFinite):
        validate_params(dict(TABLE, sigma=bad))


def test_missing_and_unknown_keys():
    raw = dict(TABLE)
    del raw["m"]
    with pytest.raises(DomainError):
        validate_params(raw)
    with pytest.raises(DomainError):
        validate_params(dict(TABLE, mu=0.1))
    with pytest.raises(DomainError):
        validate_params(dict(TABLE, r="abc"))


def test_lam_alias():
    raw = dict(TABLE)
    raw["lam"] = raw.pop("lambda")
    assert validate_params(raw) == validate_params(TABLE)


def test_roots_table_values(params):
    d = char_roots(params, params.rho)
    assert d.pos == pytest.approx(4.266, abs=1e-3)
    assert d.neg == pytest.approx(-3.516, abs=1e-3)
    # independent oracle: quadratic 0.02 x^2 - 0.015 x - 0.3 = 0 solved in mpmath
    import mpmath
    with mpmath.workdps(40):
        r = sorted(mpmath.polyroots([mpmath.mpf("0.02"), mpmath.mpf("-0.015"), mpmath.mpf("-0.3")]))
    assert d.neg == pytest.approx(float(r[0]), rel=1e-14)
    assert d.pos == pytest.approx(float(r[1]), rel=1e-14)
    assert d.pos > 2


def test_mp_roots_match_float_roots(params):
    P = mp_params(params)
    for key, rate in (("d", params.rho), ("t", params.lam)):
        rp = char_roots(params, rate)
        assert float(P[key + "1"]) == pytest.approx(rp.pos, rel=1e-15)
        assert float(P[key + "2"]) == pytest.approx(rp.neg, rel=1e-15)


valid_params = st.fixed_dictionaries({
    "r": st.floats(0.0, 0.1), "g": st.floats(0.0, 0.1), "sigma": st.floats(0.01, 1.0),
    "rho_extra": st.floats(1e-3, 1.0), "lam_extra": st.floats(1e-3, 1.0),
    "alpha": st.floats(0.01, 1.0), "kappa": st.floats(0.01, 5.0), "m": st.floats(0.1, 2.0),
    "c2": st.floats(0.1, 3.0), "c_gap": st.floats(0.01, 3.0),
})


def build(d):
    mu = d["r"] - d["g"]
    return validate_params(
        r=d["r"], g=d["g"], sigma=d["sigma"], rho=max(2 * mu + d["sigma"] ** 2, 0.0) + d["rho_extra"],
        alpha=d["alpha"], kappa=d["kappa"], m=d["m"], c2=d["c2"], c1=d["c2"] + d["c_gap"],
        **{"lambda": max(mu, 0.0) + d["lam_extra"]},
    )


@settings(max_examples=200, deadline=None)
@given(valid_params)
def test_root_properties(d):
    p = build(d)
    s2 = p.sigma**2
    for rate in (p.rho, p.lam):
        rp = char_roots(p, rate)
        assert rp.neg < 0 < rp.pos
        assert rp.pos > 1
        assert abs(root_residual(p, rp.pos, rate)) <= 1e-12 * max(1.0, rate) * max(1.0, rp.pos**2 * s2)
        assert abs(root_residual(p, rp.neg, rate)) <= 1e-12 * max(1.0, rate) * max(1.0, rp.neg**2 * s2)
        assert rp.pos * rp.neg == pytest.approx(-2 * rate / s2, rel=1e-12)
        assert rp.pos + rp.neg == pytest.approx(1 - 2 * p.mu / s2, rel=1e-9, abs=1e-9)
    assert char_roots(p, p.rho).pos > 2


def test_regime_examples():
    assert classify_regime(table_params(**{"lambda": 0.3})).tag is RegimeTag.LEGISLATOR_ABSTAINS
    assert classify_regime(table_params()).tag is RegimeTag.LEGISLATOR_INTERVENES
    reg = classify_regime(table_params(**{"lambda": 0.255}))
    assert reg.tag is RegimeTag.BOUNDARY
    assert abs(reg.margin) < 1e-15


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-9, 0.2))
def test_regime_flips_across_boundary(delta):
    lo = classify_regime(table_params(**{"lambda": 0.255 - delta}))
    hi = classify_regime(table_params(**{"lambda": 0.255 + delta}))
    assert lo.tag is RegimeTag.LEGISLATOR_INTERVENES
    assert hi.tag is RegimeTag.LEGISLATOR_ABSTAINS
    assert lo.margin == pytest.approx(-hi.margin, abs=1e-15)


def test_param_keys_order():
    assert PARAM_KEYS == ("r", "g", "sigma", "rho", "lambda", "alpha", "kappa", "m", "c1", "c2")

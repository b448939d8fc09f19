"""Command-line front end.

Subcommands: check, roots, nash, sweep, simulate, deviation. The config is a
flat JSON object with the ten model parameters and optional "quadrature",
"simulation" and "sweep" sub-objects.

Exit codes: 0 ok, 1 I/O or parse error, 2 invalid parameters or settings,
3 solver failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from . import equilibrium as eq
from . import government as gov
from . import legislator as leg
from . import simulation as sim
from . import special
from .errors import (AssumptionViolation, ConfigError, DebtGameError, DomainError, NonFinite,
                     QuadratureFailure, SimulationBudgetExceeded, SolverError)
from .model import (PARAM_KEYS, ModelParams, RegimeTag, char_roots, classify_regime,
                    root_residual, validate_params)

log = logging.getLogger("debtgame")

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3, 4

SWEEP_COLUMNS = ("a_star", "b_star", "a_bar", "b0", "qtilde", "F_resid", "G_resid", "status")
NASH_COLUMNS = ("tag", "a_star", "b_star", "a_bar", "b0", "qtilde", "F_resid", "G_resid")
SPACINGS = ("linear", "log", "geometric-to-boundary")

_SECTIONS = {
    "quadrature": {"abs_tol", "rel_tol", "max_subdivisions", "t_floor"},
    "simulation": {"x0", "a", "b", "dt", "horizon", "n_paths", "seed", "antithetic", "crn_tag",
                   "epsilons", "max_path_steps"},
    "sweep": {"vary", "values", "lo", "hi", "n", "spacing", "b_cap"},
}


class ParseError(DebtGameError):
    """Unreadable or malformed configuration (exit 1)."""


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ParseError(f"{path} is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise ParseError("config must be a JSON object")
    unknown = sorted(set(raw) - set(PARAM_KEYS) - set(_SECTIONS))
    if unknown:
        raise ParseError(f"unknown config keys: {unknown}")
    for name, allowed in _SECTIONS.items():
        sec = raw.get(name, {})
        if not isinstance(sec, dict):
            raise ParseError(f'"{name}" must be an object')
        bad = sorted(set(sec) - allowed)
        if bad:
            raise ParseError(f'unknown keys in "{name}": {bad}')
    return raw


def params_from(raw) -> ModelParams:
    return validate_params({k: raw[k] for k in PARAM_KEYS if k in raw})


def quad_from(raw) -> special.QuadratureSettings:
    return special.QuadratureSettings(**raw.get("quadrature", {}))


def fmt(x) -> str:
    """Round-trip scientific notation; empty for undefined values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".16e")


def csv_line(fields) -> str:
    return ",".join(fields) + "\n"


# rows -----------------------------------------------------------------------

def nash_record(params: ModelParams, b_cap: float = eq.DEFAULT_B_CAP) -> dict:
    """Equilibrium summary as a plain record; solver errors are raised."""
    out = eq.solve_nash(params, b_cap=b_cap)
    rec = dict(tag=out.tag, a_star=out.a_star, b_star=out.b_star, a_bar=out.a_bar,
               b0=out.b0, qtilde=out.qtilde, F_resid=out.F_resid, G_resid=out.G_resid)
    return rec


def sweep_row(base: dict, vary: str, value: float, b_cap: float) -> dict:
    row = dict.fromkeys(SWEEP_COLUMNS)
    try:
        p = validate_params(dict(base, **{vary: value}))
    except AssumptionViolation as e:
        row["status"] = "AssumptionViolation:" + "|".join(e.names)
        return row
    except (DomainError, NonFinite) as e:
        row["status"] = type(e).__name__
        return row
    row["a_bar"] = gov.abar(p).a_bar
    reg = classify_regime(p)
    if reg.tag is RegimeTag.LEGISLATOR_INTERVENES:
        row["b0"] = leg.b0(p)
        try:
            row["qtilde"] = leg.qtilde(p).value
        except SolverError:
            pass
    try:
        rec = nash_record(p, b_cap)
    except eq.CapExceeded:
        row["status"] = "b_star_exceeds_cap"
        return row
    except (SolverError, QuadratureFailure) as e:
        row["status"] = type(e).__name__
        return row
    for k in ("a_star", "b_star", "F_resid", "G_resid"):
        row[k] = rec[k]
    row["status"] = "ok" if rec["tag"] == "Ceiling" else "no_ceiling"
    return row


def sweep_values(sweep_cfg: dict, params: ModelParams):
    if sweep_cfg.get("values") is not None:
        vals = [float(v) for v in sweep_cfg["values"]]
        if not vals:
            raise ConfigError("sweep values list is empty")
        return vals
    for k in ("lo", "hi", "n"):
        if sweep_cfg.get(k) is None:
            raise ConfigError(f"sweep needs either values or lo/hi/n (missing {k})")
    lo, hi, n = float(sweep_cfg["lo"]), float(sweep_cfg["hi"]), int(sweep_cfg["n"])
    spacing = sweep_cfg.get("spacing") or "linear"
    if n < 1 or not hi > lo:
        raise ConfigError("sweep needs n >= 1 and hi > lo")
    if spacing == "linear":
        return list(np.linspace(lo, hi, n))
    if spacing == "log":
        if lo <= 0:
            raise ConfigError("log spacing needs lo > 0")
        return list(np.geomspace(lo, hi, n))
    if spacing == "geometric-to-boundary":
        return list(eq.boundary_grid(lo, hi, n))
    raise ConfigError(f"unknown spacing {spacing!r}; choose from {SPACINGS}")


def run_sweep(raw: dict, sweep_cfg: dict):
    vary = sweep_cfg.get("vary")
    if vary not in PARAM_KEYS:
        raise ConfigError(f"sweep variable must be one of {PARAM_KEYS}, got {vary!r}")
    base = {k: raw[k] for k in PARAM_KEYS if k in raw}
    params = validate_params(base)
    values = sweep_values(sweep_cfg, params)
    b_cap = float(sweep_cfg.get("b_cap") or eq.DEFAULT_B_CAP)
    # serial on purpose: mpmath's working precision is process-global, so
    # threads running workdps blocks would clobber each other's precision
    rows = [sweep_row(base, vary, v, b_cap) for v in values]
    return vary, values, rows


def sweep_csv(vary, values, rows) -> str:
    lines = [csv_line((vary,) + SWEEP_COLUMNS)]
    for v, row in zip(values, rows):
        fields = [fmt(v)] + [fmt(row[k]) for k in SWEEP_COLUMNS[:-1]] + [row["status"]]
        lines.append(csv_line(fields))
    return "".join(lines)


# commands -------------------------------------------------------------------

def _emit(text, out):
    if out:
        try:
            with open(out, "w", newline="") as fh:
                fh.write(text)
        except OSError as e:
            raise ParseError(f"cannot write {out}: {e}") from None
    else:
        sys.stdout.write(text)


def cmd_check(args, raw):
    p = params_from(raw)
    reg = classify_regime(p)
    print("parameters: valid")
    print(f"regime: {reg.tag.value}")
    print(f"margin: {fmt(reg.margin)}")
    return EXIT_OK


def cmd_roots(args, raw):
    p = params_from(raw)
    for name, rate in (("delta", p.rho), ("theta", p.lam)):
        rp = char_roots(p, rate)
        print(f"{name}1={fmt(rp.pos)} residual={fmt(root_residual(p, rp.pos, rate))}")
        print(f"{name}2={fmt(rp.neg)} residual={fmt(root_residual(p, rp.neg, rate))}")
    print(f"a_bar={fmt(gov.abar(p).a_bar)}")
    print(f"a_tilde={fmt(gov.a_tilde(p))}")
    reg = classify_regime(p)
    print(f"regime={reg.tag.value}")
    if reg.tag is RegimeTag.LEGISLATOR_INTERVENES:
        print(f"b0={fmt(leg.b0(p))}")
        print(f"qtilde={fmt(leg.qtilde(p).value)}")
    return EXIT_OK


def cmd_nash(args, raw):
    p = params_from(raw)
    b_cap = float(raw.get("sweep", {}).get("b_cap") or eq.DEFAULT_B_CAP)
    rec = nash_record(p, b_cap)
    text = csv_line(NASH_COLUMNS) + csv_line([rec["tag"]] + [fmt(rec[k]) for k in NASH_COLUMNS[1:]])
    _emit(text, args.out)
    return EXIT_OK


def cmd_sweep(args, raw):
    sweep_cfg = dict(raw.get("sweep", {}))
    for k in ("vary", "lo", "hi", "n", "spacing"):
        v = getattr(args, k)
        if v is not None:
            sweep_cfg[k] = v
            if k in ("lo", "hi", "n"):
                sweep_cfg.pop("values", None)
    vary, values, rows = run_sweep(raw, sweep_cfg)
    _emit(sweep_csv(vary, values, rows), args.out)
    return EXIT_OK


def _sim_settings(args, raw):
    s = dict(raw.get("simulation", {}))
    if args.seed is not None:
        s["seed"] = args.seed
    if args.paths is not None:
        s["n_paths"] = args.paths
    if args.dt is not None:
        s["dt"] = args.dt
    return s


def _sim_config(s, x0, a, b):
    return sim.SimConfig(
        x0=x0, a=a, b=b, dt=float(s.get("dt", sim.DEFAULT_DT)), horizon=s.get("horizon"),
        n_paths=int(s.get("n_paths", sim.DEFAULT_PATHS)), seed=int(s.get("seed", 0)),
        antithetic=bool(s.get("antithetic", True)), crn_tag=str(s.get("crn_tag", "default")),
    )


def cmd_simulate(args, raw):
    p = params_from(raw)
    qs = quad_from(raw)
    s = _sim_settings(args, raw)
    if "a" in s or "b" in s:
        a, b = s.get("a"), s.get("b")
        if a is not None and b is not None and not a < b:
            raise ConfigError("explicit thresholds need a < b (degenerate band)")

        def exact_g(x):
            return gov.policy_cost_gov(x, a, b, p)

        def exact_l(x):
            return leg.policy_cost_leg(x, a, b, p, qs)
    else:
        out = eq.solve_nash(p)
        a, b = out.a_star, out.b_star
        exact_g, exact_l = out.value_gov(), out.value_leg(qs)
    if "x0" in s:
        x0 = float(s["x0"])
    elif a is not None and b is not None:
        x0 = 0.5 * (a + b)
    else:
        x0 = a if a is not None else (b if b is not None else p.m)
    cfg = _sim_config(s, x0, a, b)
    kw = {"max_path_steps": float(s["max_path_steps"])} if "max_path_steps" in s else {}
    eg, el = sim.simulate_cost_pair(cfg, p, **kw)
    worst = 0.0
    print("player,x0,a,b,analytic,mc_mean,mc_se,z,tail_bound")
    for name, est, exact in (("government", eg, exact_g(x0)), ("legislator", el, exact_l(x0))):
        z = est.z_score(exact)
        worst = max(worst, abs(z))
        print(",".join([name, fmt(x0), fmt(a), fmt(b), fmt(exact), fmt(est.mean),
                        fmt(est.std_error), fmt(z), fmt(est.tail_bound)]))
    return EXIT_VERIFY if worst > 4 else EXIT_OK


def cmd_deviation(args, raw):
    p = params_from(raw)
    s = _sim_settings(args, raw)
    out = eq.solve_nash(p)
    if not out.is_ceiling:
        raise ConfigError("deviation check needs an equilibrium with a ceiling")
    kw = dict(n_paths=int(s.get("n_paths", 20_000)), dt=float(s.get("dt", sim.DEFAULT_DT)),
              seed=int(s.get("seed", 0)), crn_tag=str(s.get("crn_tag", "deviation")))
    if "epsilons" in s:
        kw["epsilons"] = tuple(float(e) for e in s["epsilons"])
    if "x0" in s:
        kw["x0"] = float(s["x0"])
    if "max_path_steps" in s:
        kw["max_path_steps"] = float(s["max_path_steps"])
    rep = eq.deviation_certificate(p, out, **kw)
    print("player,epsilon,threshold,cost_difference,paired_se,independent_se,ok")
    for r in rep.rows:
        print(",".join([r.player, fmt(r.epsilon), fmt(r.threshold), fmt(r.diff), fmt(r.paired_se),
                        fmt(r.independent_se), "1" if r.ok else "0"]))
    return EXIT_OK if rep.ok else EXIT_VERIFY


COMMANDS = {
    "check": cmd_check, "roots": cmd_roots, "nash": cmd_nash, "sweep": cmd_sweep,
    "simulate": cmd_simulate, "deviation": cmd_deviation,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="debtgame", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--paths", type=int, help="Monte Carlo path count")
        sp.add_argument("--dt", type=float, help="Monte Carlo time step")
        sp.add_argument("--vary", help="parameter to sweep")
        sp.add_argument("--lo", type=float)
        sp.add_argument("--hi", type=float)
        sp.add_argument("--n", type=int)
        sp.add_argument("--spacing", choices=SPACINGS)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = load_config(args.config)
        return COMMANDS[args.command](args, raw)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except AssumptionViolation as e:
        for name, lhs, rhs in e.violations:
            print(f"violation: {name} ({lhs!r} vs {rhs!r})", file=sys.stderr)
        return EXIT_INVALID
    except (DomainError, NonFinite, ConfigError, SimulationBudgetExceeded) as e:
        print(f"invalid: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (SolverError, QuadratureFailure) as e:
        print(f"solver failure ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

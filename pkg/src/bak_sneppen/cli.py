"""Command-line front end.

Every command prints (or writes to ``--out``) a document whose header holds
the schema name, package version and the resolved configuration, followed by
result rows.  Nothing time- or machine-dependent goes into the output, so a
repeated command with the same configuration and seed is byte-identical.

Exit codes: 0 success, 1 a verification failed, 2 bad arguments.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Optional, Sequence

from . import __version__
from .bound_lab import (SyntheticWalk, check_geometric_domination, moment_bound_constants,
                        potential_constants, renewal_moment_check, trace_renewals,
                        verify_fmm_on_walk)
from .drift_analysis import (EndCase, drift_closed_form, drift_enumerate, optimize_refined,
                             refined_case_drifts, solve_threshold, worst_drift)
from .exact_solver import build_kernel, exhaustive_lemma_check, mu_exact, stationary
from .mc_engine import scan_critical, simulate, SimulationPlan
from .model_core import PotentialParams, RefinedParams

SCHEMA_VERSION = 1
COMMANDS = ("simulate", "exact", "drift", "threshold", "optimize", "scan", "verify-lemmas",
            "verify-bounds")


class UsageError(Exception):
    pass


def _floats(s: str) -> list:
    return [float(v) for v in str(s).replace(",", " ").split()]


def _ints(s: str) -> list:
    return [int(v) for v in str(s).replace(",", " ").split()]


# option name -> (type, default); None defaults are filled per command
OPTIONS = {
    "n": (int, None),
    "n_list": (_ints, None),
    "p": (float, None),
    "p_grid": (_floats, None),
    "beta": (float, None),
    "alpha": (float, None),
    "gamma": (float, None),
    "budget": (int, None),
    "seed": (int, None),
    "tol": (float, 1e-12),
    "window": (int, 4),
    "out": (str, None),
    "format": (str, "json"),
    "threads": (int, None),
}
# keys that never influence results and stay out of the header
NON_RESULT_KEYS = {"out", "format", "threads", "config"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bak-sneppen", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        for key in OPTIONS:
            flag = "--" + key.replace("_", "-")
            # parse as strings so config-file values and flags share the converters
            sp.add_argument(flag, dest=key, default=None)
        sp.add_argument("--config", default=None, help="file of 'key = value' lines")
    return parser


def read_config_file(path: str) -> dict:
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def resolve(ns: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (flags win) and convert types."""
    raw = read_config_file(ns.config) if ns.config else {}
    for key in OPTIONS:
        v = getattr(ns, key)
        if v is not None:
            raw[key] = v
    if "seed" not in raw:
        raw["seed"] = os.environ.get("BS_SEED", "0")
    cfg = {}
    for key, (conv, default) in OPTIONS.items():
        if key in raw:
            try:
                cfg[key] = conv(raw[key])
            except ValueError as exc:
                raise UsageError(f"bad value for {key}: {raw[key]!r}") from exc
        else:
            cfg[key] = default
    if cfg["format"] not in ("csv", "json"):
        raise UsageError("format must be csv or json")
    cfg["command"] = ns.command
    return cfg


def _need(cfg: dict, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError(f"{cfg['command']} needs --" + ", --".join(
            k.replace("_", "-") for k in missing))


def _default(cfg: dict, key: str, value):
    if cfg.get(key) is None:
        cfg[key] = value


def _beta(cfg: dict) -> float:
    _default(cfg, "beta", solve_threshold().beta_diamond)
    return cfg["beta"]


def _p_values(cfg: dict) -> list:
    if cfg.get("p_grid"):
        return cfg["p_grid"]
    _need(cfg, "p")
    return [cfg["p"]]


def cmd_simulate(cfg):
    _need(cfg, "n")
    _default(cfg, "budget", 10**6)
    beta = _beta(cfg)
    rows = []
    for p in _p_values(cfg):
        st = simulate(SimulationPlan(cfg["n"], p, cfg["budget"], cfg["seed"], beta=beta))
        row = st.row()
        row.update(potential_stderr=st.potential_stderr, nu_first_half=st.nu_first_half,
                   nu_second_half=st.nu_second_half)
        rows.append(row)
    return rows, {}, True


def cmd_exact(cfg):
    _need(cfg, "n")
    rows = []
    for p in _p_values(cfg):
        kernel = build_kernel(cfg["n"], p)
        sol = stationary(kernel)
        row = {"n": cfg["n"], "p": p, "nu": sol.nu, "residual": sol.residual,
               "method": sol.method}
        if cfg.get("beta") is not None:
            row["mean_potential"] = mu_exact(kernel, PotentialParams(cfg["beta"]))
        rows.append(row)
    return rows, {}, True


def _refined_drift(cfg, p_values):
    params = RefinedParams(cfg["alpha"], cfg["beta"], cfg["gamma"])
    rows = []
    for p in p_values:
        for pat, val in sorted(refined_case_drifts(p, params, cfg["window"]).items()):
            rows.append({"p": p, "pattern": "".join(map(str, pat)), "drift": val})
    summary = {repr(p): max(r["drift"] for r in rows if r["p"] == p) for p in p_values}
    return rows, {"worst": summary}, True


def cmd_drift(cfg):
    """Four case drifts with their enumeration oracle, or refined drifts given --alpha/--gamma."""
    p_values = _p_values(cfg)
    if cfg.get("alpha") is not None or cfg.get("gamma") is not None:
        _need(cfg, "alpha", "beta", "gamma")
        return _refined_drift(cfg, p_values)
    beta = _beta(cfg)
    rows = []
    ok = True
    for p in p_values:
        for case in EndCase:
            closed = float(drift_closed_form(case, p, beta))
            oracle = float(drift_enumerate(case, p, beta))
            same = abs(closed - oracle) <= 1e-12
            ok &= same
            rows.append({"p": p, "beta": beta, "case": case.label, "closed_form": closed,
                         "oracle": oracle, "agree": same})
    summary = {p: worst_drift(p, beta).as_dict() for p in p_values}
    return rows, {"worst": {repr(k): v for k, v in summary.items()}}, ok


def cmd_threshold(cfg):
    sol = solve_threshold(tolerance=cfg["tol"])
    row = {"p_diamond": sol.p_diamond, "beta_diamond": sol.beta_diamond,
           "residual": sol.residual, "iterations": sol.iterations, "p_star": sol.p_star,
           "p_c_estimate": sol.p_c_estimate}
    return [row], {}, 0.45 < sol.p_diamond < 0.46


def cmd_optimize(cfg):
    _default(cfg, "budget", 80)
    sol = optimize_refined(search_budget=cfg["budget"], window=cfg["window"])
    row = {"p_threshold": sol.p_threshold, "epsilon_margin": sol.epsilon_margin,
           "converged": sol.converged, "evaluations": sol.evaluations, "window": sol.window,
           "alpha": sol.params.alpha if sol.params else None,
           "beta": sol.params.beta if sol.params else None,
           "gamma": sol.params.gamma if sol.params else None}
    return [row], {}, sol.converged


def cmd_scan(cfg):
    _need(cfg, "n_list", "p_grid")
    _default(cfg, "budget", 10**6)
    res = scan_critical(cfg["n_list"], cfg["p_grid"], cfg["budget"], cfg["seed"],
                        threads=cfg["threads"] or os.cpu_count())
    summary = {"crossing": res.crossing,
               "slopes": {repr(p): s for p, s in res.slopes.items()},
               "monotonicity_warnings": [list(w) for w in res.monotonicity_warnings]}
    return res.rows, summary, True


def cmd_verify_lemmas(cfg):
    _default(cfg, "n_list", list(range(7, 13)))
    betas = [cfg["beta"]] if cfg.get("beta") is not None else [
        0.1, 0.3, solve_threshold().beta_diamond]
    rows = []
    ok = True
    for n in cfg["n_list"]:
        for beta in betas:
            rep = exhaustive_lemma_check(n, PotentialParams(beta))
            s = rep.summary()
            s["flip_breakdown"] = json.dumps(s["flip_breakdown"], sort_keys=True)
            rows.append(s)
            ok &= rep.passed
    return rows, {}, ok


def cmd_verify_bounds(cfg):
    _default(cfg, "n", 128)
    _default(cfg, "p", 0.6)
    _default(cfg, "budget", 10**6)
    params = PotentialParams(_beta(cfg))
    trace = trace_renewals(cfg["n"], cfg["p"], params, cfg["budget"], cfg["seed"])
    dom = check_geometric_domination(trace)
    drift, drift_se, drift_n = trace.renewal_drift()
    band, band_se, band_n = trace.renewal_drift(band=True)
    walk_c = moment_bound_constants(8, 1, 0.4, 1)
    walk = verify_fmm_on_walk(SyntheticWalk.reflected(0.3), walk_c, cfg["budget"], cfg["seed"])
    rows = [{"check": "constancy", "value": trace.constancy_violations, "bound": 0,
             "passed": trace.constancy_violations == 0},
            {"check": "upstep_from_positive", "value": trace.max_upstep_positive, "bound": 2,
             "passed": trace.max_upstep_positive <= 2},
            {"check": "entry_jumps", "value": trace.entry_jumps, "bound": None, "passed": True},
            {"check": "geometric_domination", "value": len(dom.gap_bins), "bound": None,
             "passed": dom.passed},
            {"check": "renewal_drift_above_8", "value": drift, "bound": 0,
             "passed": not (drift > 3 * drift_se)},
            {"check": "renewal_drift_band_6_8", "value": band, "bound": None, "passed": True},
            {"check": "walk_mean", "value": walk.mean_power, "bound": walk.R_p,
             "passed": walk.passed},
            {"check": "walk_exp_moment", "value": walk.mean_exp, "bound": walk.exp_bound,
             "passed": walk.passed}]
    if cfg["p"] > solve_threshold().p_diamond:
        mom = renewal_moment_check(trace, potential_constants(cfg["p"], params))
        rows.append({"check": "renewal_mean", "value": mom.mean_power, "bound": mom.R_p,
                     "passed": mom.passed})
    summary = {"renewals": trace.renewal_count, "flips": trace.flip_count,
               "drift_samples": drift_n, "band_samples": band_n,
               "walk_constants": walk_c.as_dict(), "domination": dom.as_dict()}
    return rows, summary, all(r["passed"] for r in rows)


HANDLERS = {
    "simulate": cmd_simulate,
    "exact": cmd_exact,
    "drift": cmd_drift,
    "threshold": cmd_threshold,
    "optimize": cmd_optimize,
    "scan": cmd_scan,
    "verify-lemmas": cmd_verify_lemmas,
    "verify-bounds": cmd_verify_bounds,
}


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if hasattr(v, "item"):
        return _clean(v.item())
    return v


def header(cfg: dict) -> dict:
    config = {k: v for k, v in sorted(cfg.items()) if k not in NON_RESULT_KEYS}
    return {"schema": f"bak-sneppen/{cfg['command']}/v{SCHEMA_VERSION}",
            "version": __version__, "seed": cfg["seed"], "config": _clean(config)}


def render(cfg: dict, rows: list, summary: dict, passed: bool) -> str:
    head = header(cfg)
    if cfg["format"] == "json":
        doc = dict(head, passed=passed, rows=_clean(rows), summary=_clean(summary))
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    for key in ("schema", "version", "seed"):
        buf.write(f"# {key}: {head[key]}\n")
    buf.write(f"# config: {json.dumps(head['config'], sort_keys=True)}\n")
    buf.write(f"# passed: {str(passed).lower()}\n")
    fields = list(rows[0].keys()) if rows else []
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if x is None else x) for k, x in _clean(row).items()})
    return buf.getvalue()


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        cfg = resolve(ns)
        rows, summary, passed = HANDLERS[cfg["command"]](cfg)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    except ValueError as exc:
        return _fail("invalid-parameter", str(exc), 2)
    text = render(cfg, rows, summary, passed)
    if cfg["out"]:
        with open(cfg["out"], "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if passed else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Acceptance criteria 1-11, each at its stated tolerance and time limit.

Every test records a one-line PASS/FAIL verdict, shown in the pytest terminal
summary.  Running this file directly prints the same lines.
"""

import time

import numpy as np
import pytest

from bak_sneppen.bound_lab import (SyntheticWalk, check_geometric_domination,
                                   moment_bound_constants, trace_renewals, verify_fmm_on_walk)
from bak_sneppen.cli import run
from bak_sneppen.drift_analysis import (REFERENCE_REFINED_PARAMS, EndCase, drift_closed_form,
                                        drift_enumerate, monotonicity_check, optimize_refined,
                                        refined_worst_drift, solve_threshold, threshold_polynomial,
                                        worst_drift)
from bak_sneppen.exact_solver import build_kernel, exhaustive_lemma_check, stationary
from bak_sneppen.mc_engine import estimate_nu
from bak_sneppen.model_core import PotentialParams

GRID_P = np.round(np.arange(1, 20) * 0.05, 12)
GRID_BETA = np.round(np.arange(1, 10) * 0.05, 12)


def criterion_1():
    t0 = time.perf_counter()
    gap = 0.0
    for p in GRID_P:
        for beta in GRID_BETA:
            for case in EndCase:
                gap = max(gap, abs(drift_closed_form(case, p, beta)
                                   - drift_enumerate(case, p, beta)))
    elapsed = time.perf_counter() - t0
    return gap <= 1e-12 and elapsed < 1.0, f"max gap {gap:.2e}, {elapsed:.2f}s"


def criterion_2():
    t0 = time.perf_counter()
    sol = solve_threshold(tolerance=1e-12)
    rep = worst_drift(sol.p_diamond, sol.beta_diamond)
    elapsed = time.perf_counter() - t0
    checks = {
        "p_diamond": 0.45 < sol.p_diamond < 0.46,
        "residual": abs(threshold_polynomial(sol.p_diamond)) <= 1e-12,
        "beta_diamond": abs(sol.beta_diamond - 0.34656) <= 1e-5,
        "t00_t11": abs(rep.t00) <= 1e-9 and abs(rep.t11) <= 1e-9,
        "t01": abs(rep.t01 - (-0.0669)) <= 5e-4,
        "t10": abs(rep.t10 - (-0.106)) <= 1e-3,
        "time": elapsed < 1.0,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = (f"p={sol.p_diamond:.8f} beta={sol.beta_diamond:.8f} t00={rep.t00:.1e} "
              f"t11={rep.t11:.1e} t01={rep.t01:.4f} t10={rep.t10:.4f}")
    if failed:
        detail += " failed: " + ",".join(failed)
    return not failed, detail


def criterion_3():
    rep = monotonicity_check(GRID_P, GRID_BETA)
    derivative = [v for v in rep.violations if v[0] == "derivative"]
    return not derivative, f"{rep.points_checked} points, {len(derivative)} violations"


def criterion_4():
    t0 = time.perf_counter()
    worst = refined_worst_drift(0.4196, REFERENCE_REFINED_PARAMS)
    sol = optimize_refined()
    elapsed = time.perf_counter() - t0
    ok = worst <= -1e-8 and sol.converged and sol.p_threshold <= 0.4196 and elapsed < 300
    return ok, f"worst drift {worst:.3e}, optimiser threshold {sol.p_threshold:.8f}, {elapsed:.1f}s"


def criterion_5():
    t0 = time.perf_counter()
    n3 = max(abs(stationary(build_kernel(3, p)).nu - p) for p in np.round(np.arange(1, 10) * 0.1, 12))
    agree = 0.0
    rot = 0.0
    for n in range(4, 11):
        k = build_kernel(n, 0.5)
        a, b = stationary(k, "solve"), stationary(k, "power")
        agree = max(agree, abs(a.nu - b.nu))
        nus = [a.nu_at(i) for i in range(n)]
        rot = max(rot, max(nus) - min(nus))
    elapsed = time.perf_counter() - t0
    ok = n3 <= 1e-12 and agree <= 1e-10 and rot <= 1e-10 and elapsed < 60
    return ok, f"n=3 gap {n3:.1e}, solve/power {agree:.1e}, rotation {rot:.1e}, {elapsed:.1f}s"


def criterion_6():
    t0 = time.perf_counter()
    beta_d = solve_threshold().beta_diamond
    bad = []
    total = 0
    for n in range(7, 13):
        for beta in (0.1, 0.3, beta_d):
            rep = exhaustive_lemma_check(n, PotentialParams(beta))
            total += rep.flip_violations + rep.interior_violations
            if not rep.passed:
                bad.append(f"n={n}/b={beta:.3f}")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 120
    return ok, f"{total} counterexamples in {len(bad)} of 18 cases, {elapsed:.1f}s"


def criterion_7():
    t0 = time.perf_counter()
    parts = []
    ok = True
    for p in (0.3, 0.5, 0.7):
        est = estimate_nu(10, p, 10**7, seed=0)
        exact = stationary(build_kernel(10, p)).nu
        z = (est.nu_hat - exact) / est.stderr
        ok &= abs(z) <= 3
        parts.append(f"p={p}: z={z:+.2f}")
    elapsed = time.perf_counter() - t0
    return ok and elapsed < 120, ", ".join(parts) + f", {elapsed:.1f}s"


def criterion_8():
    t0 = time.perf_counter()
    ests = [estimate_nu(n, 0.6, 10**7, seed=0) for n in (64, 128, 256)]
    masses = [e.zero_mass for e in ests]
    ratios = [b / a for a, b in zip(masses, masses[1:])]
    pots = [e.mean_potential for e in ests]
    growth = max(pots) / min(pots)
    low = estimate_nu(256, 0.2, 10**7, seed=0)
    elapsed = time.perf_counter() - t0
    ok = (all(0.5 <= r <= 2 for r in ratios) and growth <= 2 and 1 - low.nu_hat >= 0.05
          and elapsed < 600)
    detail = (f"zero-mass ratios {ratios[0]:.3f},{ratios[1]:.3f}; M growth {growth:.3f}; "
              f"1-nu at p=0.2 {1 - low.nu_hat:.3f}; {elapsed:.1f}s")
    return ok, detail


def criterion_9():
    beta_d = solve_threshold().beta_diamond
    trace = trace_renewals(128, 0.6, PotentialParams(beta_d), 10**7, seed=0)
    rep = check_geometric_domination(trace, min_hazard_samples=10**4)
    hazard = [b for b in rep.hazard_bins if not b["underpowered"]]
    gaps = [b for b in rep.gap_bins if not b["underpowered"]]
    ok = (trace.constancy_violations == 0 and all(b["passed"] for b in hazard)
          and all(b["passed"] for b in gaps))
    return ok, (f"constancy violations {trace.constancy_violations}, "
                f"{len(hazard)} hazard bins, {len(gaps)} gap bins, passed={rep.passed}")


def criterion_10():
    t0 = time.perf_counter()
    c = moment_bound_constants(8, 1, 0.4, 1)
    rep = verify_fmm_on_walk(SyntheticWalk.reflected(0.3), c, 10**7, seed=0)
    elapsed = time.perf_counter() - t0
    ok = (rep.mean_power <= c.R_1 and rep.mean_exp <= c.exp_bound + 3 * rep.exp_stderr
          and elapsed < 60)
    return ok, (f"E[Y]={rep.mean_power:.4f} <= R_1={c.R_1:.1f}, "
                f"E[exp(hY)]={rep.mean_exp:.4f} <= {c.exp_bound:.2f}, {elapsed:.1f}s")


DETERMINISM_COMMANDS = [
    ["simulate", "--n", "32", "--p", "0.5", "--budget", "300000", "--format", "csv"],
    ["simulate", "--n", "16", "--p-grid", "0.3,0.6", "--budget", "200000"],
    ["exact", "--n", "8", "--p", "0.4", "--beta", "0.3"],
    ["drift", "--p", "0.5", "--beta", "0.3"],
    ["threshold", "--tol", "1e-12"],
    ["optimize"],
    ["scan", "--n-list", "16,32", "--p-grid", "0.3,0.6", "--budget", "200000"],
    ["verify-lemmas", "--n-list", "7", "--beta", "0.3", "--format", "csv"],
    ["verify-bounds", "--n", "32", "--budget", "200000"],
]


def criterion_11(tmp_dir):
    mismatched = []
    for k, argv in enumerate(DETERMINISM_COMMANDS):
        blobs = []
        for rep in range(2):
            path = tmp_dir / f"cmd{k}_{rep}.out"
            run(argv + ["--seed", "123", "--out", str(path)])
            blobs.append(path.read_bytes())
        if blobs[0] != blobs[1] or not blobs[0]:
            mismatched.append(argv[0])
    return not mismatched, f"{len(DETERMINISM_COMMANDS)} commands, mismatched: {mismatched or 'none'}"


def _record(log, number, result):
    ok, detail = result
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    log.append(line)
    assert ok, line


def test_criterion_1_drift_algebra(acceptance_log):
    _record(acceptance_log, 1, criterion_1())


def test_criterion_2_threshold_constants(acceptance_log):
    _record(acceptance_log, 2, criterion_2())


def test_criterion_3_monotonicity(acceptance_log):
    _record(acceptance_log, 3, criterion_3())


def test_criterion_4_refined_parameters(acceptance_log):
    _record(acceptance_log, 4, criterion_4())


def test_criterion_5_exact_solver(acceptance_log):
    _record(acceptance_log, 5, criterion_5())


def test_criterion_6_exhaustive_lemmas(acceptance_log):
    _record(acceptance_log, 6, criterion_6())


@pytest.mark.slow
def test_criterion_7_mc_vs_exact(acceptance_log):
    _record(acceptance_log, 7, criterion_7())


@pytest.mark.slow
def test_criterion_8_supercritical_scaling(acceptance_log):
    _record(acceptance_log, 8, criterion_8())


@pytest.mark.slow
def test_criterion_9_renewal_structure(acceptance_log):
    _record(acceptance_log, 9, criterion_9())


def test_criterion_10_moment_bounds(acceptance_log):
    _record(acceptance_log, 10, criterion_10())


def test_criterion_11_determinism(acceptance_log, tmp_path, monkeypatch):
    monkeypatch.delenv("BS_SEED", raising=False)
    _record(acceptance_log, 11, criterion_11(tmp_path))


if __name__ == "__main__":
    import pathlib
    import tempfile

    with tempfile.TemporaryDirectory() as d:
        for k, fn in enumerate([criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                                criterion_6, criterion_7, criterion_8, criterion_9,
                                criterion_10], 1):
            ok, detail = fn()
            print(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
        ok, detail = criterion_11(pathlib.Path(d))
        print(f"CRITERION 11: {'PASS' if ok else 'FAIL'} {detail}")

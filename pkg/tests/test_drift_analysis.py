from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from bak_sneppen.drift_analysis import (REFERENCE_REFINED_PARAMS, EndCase, beta_diamond_of,
                                        boundary_drift, drift_closed_form, drift_closed_form_dp,
                                        drift_enumerate, monotonicity_check, optimize_refined,
                                        oracle_gap, refined_case_drifts, refined_minimax,
                                        refined_worst_drift, solve_threshold,
                                        threshold_polynomial, worst_drift)
from bak_sneppen.model_core import RefinedParams


def test_closed_form_equals_enumeration_exactly():
    for p in (Fraction(1, 10), Fraction(1, 2), Fraction(7, 9)):
        for beta in (Fraction(1, 20), Fraction(1, 3), Fraction(9, 20)):
            for case in EndCase:
                assert drift_closed_form(case, p, beta) == drift_enumerate(case, p, beta)


def test_oracle_gap_on_float_grid():
    grid = np.round(np.arange(1, 20) * 0.05, 12)
    betas = np.round(np.arange(1, 10) * 0.05, 12)
    assert oracle_gap(grid, betas) <= 1e-12


def test_derivative_matches_symbolic():
    p, b = sympy.symbols("p b")
    for case in EndCase:
        f = sympy.diff(_symbolic(case, p, b), p)
        for pv, bv in ((0.2, 0.1), (0.5, 0.3), (0.9, 0.45)):
            assert float(f.subs({p: pv, b: bv})) == pytest.approx(
                drift_closed_form_dp(case, pv, bv), abs=1e-12)


def _symbolic(case, p, b):
    # the closed forms use only arithmetic, so they evaluate on sympy symbols
    q = 1 - p
    s = p * p + p + 1
    t11 = -(2 * p - 1) * s - b * q ** 2 * (1 + p)
    return {
        EndCase.CASE11: t11,
        EndCase.CASE00: (-(p ** 3 + p ** 2 + p - 1 + b * q) / 3
                         - (p * s + b * (p + 1) * q ** 2) / 3 - b * q / 3 + b),
        EndCase.CASE01: t11 / 2 - (p * s + b * (1 + p) * q ** 2) / 2 + b,
        EndCase.CASE10: -(p ** 3 + p ** 2 + p - 1 + b * q) / 2 - b * q / 2,
    }[case]


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.49))
def test_closed_form_matches_symbolic_expression(p, beta):
    ps, bs = sympy.symbols("p b")
    for case in EndCase:
        ref = float(_symbolic(case, ps, bs).subs({ps: p, bs: beta}))
        assert drift_closed_form(case, p, beta) == pytest.approx(ref, abs=1e-12)


def test_drift_domain_errors():
    with pytest.raises(ValueError):
        drift_closed_form(EndCase.CASE00, 1.5, 0.2)
    with pytest.raises(ValueError):
        drift_closed_form(EndCase.CASE00, 0.5, 0.6)


def test_threshold_constants():
    sol = solve_threshold()
    assert 0.45 < sol.p_diamond < 0.46
    assert abs(threshold_polynomial(sol.p_diamond)) <= 1e-12
    assert sol.beta_diamond == pytest.approx(0.34656, abs=1e-5)
    assert beta_diamond_of(sol.p_diamond) == sol.beta_diamond
    rep = worst_drift(sol.p_diamond, sol.beta_diamond)
    assert abs(rep.t00) < 1e-9 and abs(rep.t11) < 1e-9
    # case (0, 1) is the more negative of the two mixed cases
    assert rep.t01 == pytest.approx(-0.1064, abs=1e-3)
    assert rep.t10 == pytest.approx(-0.0669, abs=5e-4)


def test_worst_drift_sign():
    assert worst_drift(0.6, 0.3).worst < 0 < worst_drift(0.3, 0.3).worst
    assert worst_drift(0.6, 0.3).margin == -worst_drift(0.6, 0.3).worst


def test_boundary_drifts():
    assert boundary_drift("full_circle", 0.5) == pytest.approx(-(1 - 0.125))
    assert boundary_drift("full_minus_one", 0.5) == pytest.approx(-0.5 * (5 - 0.25) / 2)
    with pytest.raises(ValueError):
        boundary_drift("nope", 0.5)


def test_monotonicity_on_grid():
    grid = np.round(np.arange(1, 20) * 0.05, 12)
    betas = np.round(np.arange(1, 10) * 0.05, 12)
    rep = monotonicity_check(grid, betas)
    assert rep.passed and rep.points_checked == 19 * 9 * 4


def test_refined_reference_parameters():
    val = refined_worst_drift(0.4196, REFERENCE_REFINED_PARAMS)
    assert val <= -1e-8
    assert len(refined_case_drifts(0.4196, REFERENCE_REFINED_PARAMS)) == 16


def test_refined_minimax_decreases_in_p():
    assert refined_minimax(0.42)[0] <= refined_minimax(0.41)[0]


def test_refined_minimax_dominates_fixed_weights():
    value, weights = refined_minimax(0.43)
    assert value <= refined_worst_drift(0.43, REFERENCE_REFINED_PARAMS) + 1e-12
    assert refined_worst_drift(0.43, RefinedParams(*weights)) == pytest.approx(value, abs=1e-9)


def test_optimize_refined():
    sol = optimize_refined()
    assert sol.converged and sol.p_threshold <= 0.4196
    assert refined_worst_drift(sol.p_margin, sol.params) < 0


def test_optimize_refined_budget_exhaustion():
    sol = optimize_refined(search_budget=4)
    assert not sol.converged and sol.params is None

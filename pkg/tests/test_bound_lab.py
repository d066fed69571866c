import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bak_sneppen import _kernels as K
from bak_sneppen.bound_lab import (RenewalTrace, SyntheticWalk, cesaro_bound_check,
                                   check_geometric_domination, moment_bound, moment_bound_constants,
                                   potential_constants, record_trajectory, renewal_moment_check,
                                   renewal_times, trace_renewals, verify_fmm_on_walk)
from bak_sneppen.model_core import PotentialParams, RingConfig

PARAMS = PotentialParams(0.3)


def test_constants_example():
    c = moment_bound_constants(8, 2, 0.1, 1)
    assert c.h == pytest.approx(0.00625)
    assert c.contraction == pytest.approx(0.9996875)
    assert c.R_tilde == pytest.approx(c.r * (c.R_1 + c.R_2))


def test_moment_bound_arithmetic():
    assert moment_bound(1, 0.01, 8, 2, 0.1) == pytest.approx(2 * math.exp(0.1) / 1e-5)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.5, 50), st.floats(0.1, 5), st.floats(0.01, 2), st.integers(1, 4))
def test_constants_algebra(C, b, eps, order):
    c = moment_bound_constants(C, b, eps, order)
    assert 0 < c.contraction < 1
    assert c.h < 1 / b and c.h * b * b < eps / 2
    expected = 2 * math.factorial(order) * math.exp(c.h * (C + b)) / (eps * c.h ** (order + 1))
    assert c.R_p == pytest.approx(expected, rel=1e-12)


def test_constants_validation():
    with pytest.raises(ValueError):
        moment_bound_constants(8, 2, -0.1)
    with pytest.raises(ValueError):
        moment_bound_constants(8, 2, 0.1, 0)
    with pytest.raises(ValueError):
        moment_bound_constants(8, 2, 0.1, h=0.4)


def test_every_step_is_a_renewal_on_short_rings():
    # on six sites the end set covers the whole span
    traj = record_trajectory(RingConfig.all_zeros(6), 0.5, 300, seed=1)
    trace = renewal_times(traj, PARAMS)
    assert np.array_equal(trace.taus, np.arange(300))
    rep = check_geometric_domination(trace, min_gap_samples=1)
    assert all(b["mean_gap"] == 1.0 for b in rep.gap_bins)


def test_reference_replay_is_constant_between_renewals():
    traj = record_trajectory(RingConfig.all_ones(64), 0.6, 5000, seed=2)
    trace = renewal_times(traj, PARAMS)
    assert trace.constancy_violations == 0
    assert trace.max_upstep_positive <= 2
    assert trace.counting(trace.taus[-1]) == len(trace.taus) - 1


def test_all_zero_start_renewals_are_sparser():
    traj = record_trajectory(RingConfig.all_zeros(64), 0.6, 3000, seed=3)
    trace = renewal_times(traj, PARAMS)
    assert trace.renewal_count < 3000
    assert trace.constancy_violations == 0


def test_compiled_renewals_match_reference():
    traj = record_trajectory(RingConfig.all_zeros(40), 0.55, 4000, seed=4)
    ref = renewal_times(traj, PARAMS)
    bits = traj[0][0].to_array()
    zlist, zpos, nz = K.zero_index(bits)
    u = np.empty(len(traj) - 1)
    eta = np.empty((len(traj) - 1, 3), np.uint8)
    work = bits.copy()
    for t, (_, _, out) in enumerate(traj[:-1]):
        i = out.chosen_index
        u[t] = (zpos[i] + 0.5) / nz if nz else (i + 0.5) / len(bits)
        eta[t] = out.draws
        nz = K.apply_move(work, zlist, zpos, nz, i, *out.draws)
    zlist, zpos, nz = K.zero_index(bits)
    l, r, d, _ = K.span_of(bits, 0, 0, False)
    state = np.array([nz, l, r, d], np.int64)
    taus = np.empty(len(u), np.int64)
    vals = np.empty(len(u))
    nren = np.zeros(1, np.int64)
    stats = np.zeros(3, np.int64)
    up = np.zeros(2)
    sbd = np.zeros(41, np.int64)
    hbd = np.zeros(41, np.int64)
    K.renewal_chunk(bits, zlist, zpos, state, u, eta, 0.3, 0, taus, vals, nren, stats, up,
                    sbd, hbd)
    k = int(nren[0])
    assert np.array_equal(taus[:k], ref.taus[1:])
    assert np.allclose(vals[:k], ref.sampled_values[1:])
    assert stats[0] == ref.constancy_violations and stats[2] == ref.flip_count


def test_trace_invariants():
    with pytest.raises(ValueError):
        RenewalTrace(np.array([0, 3, 3]), np.zeros(3), 10)
    with pytest.raises(ValueError):
        RenewalTrace(np.array([0, 3]), np.array([0.0, -1.0]), 10)


def test_compiled_trace_and_domination():
    trace = trace_renewals(64, 0.6, PARAMS, 500_000, seed=1, max_stored=1000)
    assert trace.constancy_violations == 0
    assert trace.truncated and len(trace.taus) == 1000
    assert trace.max_upstep_positive <= 2
    rep = check_geometric_domination(trace)
    assert rep.passed
    mean, se, count = trace.renewal_drift()
    assert count > 0 and mean <= 3 * se


def test_renewal_moments_within_bound():
    trace = trace_renewals(64, 0.6, PARAMS, 300_000, seed=2)
    rep = renewal_moment_check(trace, potential_constants(0.6, PARAMS))
    assert rep.passed and rep.mean_power < rep.R_p


def test_reflected_walk_respects_bounds():
    c = moment_bound_constants(8, 1, 0.4, 1)
    rep = verify_fmm_on_walk(SyntheticWalk.reflected(0.3), c, 1_000_000, seed=1)
    assert rep.upstep_ok and rep.drift_ok and rep.passed
    # stationary law of the reflected walk is geometric with ratio 3/7
    assert rep.mean_power == pytest.approx(0.75, abs=0.02)


def test_decreasing_walk_settles_at_zero():
    c = moment_bound_constants(8, 1, 0.4, 1)
    rep = verify_fmm_on_walk(SyntheticWalk.decreasing(100.0), c, 10_000)
    assert rep.passed and rep.mean_power == 0.0


def test_walk_with_wrong_drift_is_reported():
    c = moment_bound_constants(8, 1, 0.4, 1)
    rep = verify_fmm_on_walk(SyntheticWalk.reflected(0.45), c, 10_000)
    assert not rep.drift_ok and not rep.passed


def test_cesaro_check_supercritical():
    rep = cesaro_bound_check([32, 64], 0.6, PARAMS, 300_000, seed=1)
    assert rep.theory_applies and rep.passed and rep.growth_ratio <= 2


def test_cesaro_check_warns_below_threshold():
    with pytest.warns(UserWarning):
        rep = cesaro_bound_check([32, 64], 0.2, PARAMS, 200_000, seed=1)
    assert rep.growth_ratio > 1.5

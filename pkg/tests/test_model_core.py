import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bak_sneppen import _kernels as K
from bak_sneppen.model_core import (PotentialParams, RefinedParams, RingConfig, ZeroSpan,
                                    apply_move, detect_flip, make_rng, minimal_arcs, potential,
                                    refined_potential, step, zero_span)


def cfg(s):
    return RingConfig.from_string(s)


def test_ring_config_validation():
    with pytest.raises(ValueError):
        RingConfig((0, 1))
    with pytest.raises(ValueError):
        RingConfig((0, 1, 2))
    c = cfg("0110")
    assert c.n == 4 and c[-1] == 0 and c[5] == 1
    assert RingConfig.from_int(c.to_int(), 4) == c
    assert c.zeros() == [0, 3] and c.zero_count == 2


def test_apply_move_wraps_around():
    c = RingConfig.all_ones(5)
    out = apply_move(c, 0, (0, 0, 0))
    assert out.bits == (0, 0, 1, 1, 0)


def test_step_fallback_and_absorption():
    rng = make_rng(1)
    c, outcome = step(RingConfig.all_ones(6), 1.0, rng)
    assert outcome.all_ones_fallback and c == RingConfig.all_ones(6)
    c, outcome = step(cfg("110111"), 1.0, rng)
    assert outcome.chosen_index == 2 and not outcome.all_ones_fallback
    assert c == RingConfig.all_ones(6)
    c, _ = step(cfg("110111"), 0.0, rng)
    assert c.bits == (1, 0, 0, 0, 1, 1)


def test_span_basic():
    s = zero_span(cfg("1101011111"))
    assert (s.l, s.r, s.diameter, s.zero_count) == (2, 4, 3, 2)
    s = zero_span(cfg("0111111100"))
    assert (s.l, s.r, s.diameter) == (8, 0, 3)
    ones = zero_span(RingConfig.all_ones(7))
    assert ones.all_one and ones.diameter == 0 and (ones.l, ones.r) == (0, 0)
    zeros = zero_span(RingConfig.all_zeros(7))
    assert zeros.all_zero and zeros.diameter == 7 and zeros.r == 6


def test_span_tie_rule():
    c = cfg("01110111")  # zeros at 0 and 4, two arcs of length 5
    assert minimal_arcs(c) == [(0, 4), (4, 0)]
    assert (zero_span(c).l, zero_span(c).r) == (0, 4)
    keep = ZeroSpan(8, 4, 0, 5, 2)
    assert (zero_span(c, keep).l, zero_span(c, keep).r) == (4, 0)
    share = ZeroSpan(8, 4, 2, 7, 3)
    assert (zero_span(c, share).l, zero_span(c, share).r) == (4, 0)
    other = ZeroSpan(8, 1, 3, 3, 2)
    nxt = zero_span(c, other)
    assert (nxt.l, nxt.r) == (0, 4) and detect_flip(other, nxt)


def test_all_zero_span_keeps_left_end():
    prev = ZeroSpan(6, 3, 1, 5, 4)
    s = zero_span(RingConfig.all_zeros(6), prev)
    assert (s.l, s.r) == (3, 2) and not detect_flip(prev, s)


def test_end_set():
    s = zero_span(cfg("1" + "0" * 8 + "111"))
    assert s.end_set == frozenset({1, 2, 3, 6, 7, 8})
    assert s.in_end_set(3) and not s.in_end_set(4) and not s.in_end_set(0)
    small = zero_span(cfg("1001111"))
    assert all(small.in_end_set(i) for i in (1, 2))
    assert zero_span(RingConfig.all_ones(5)).in_end_set(3)


def test_potential_values():
    params = PotentialParams(0.3)
    c = cfg("100101101111")  # span 1..7, D = 7, x_2 = 0, x_6 = 1
    s = zero_span(c)
    assert s.diameter == 7
    assert potential(c, s, params) == pytest.approx(7 - 0.3)
    small = cfg("100111111111")
    assert potential(small, zero_span(small), params) == 0.0
    z = RingConfig.all_zeros(9)
    assert potential(z, zero_span(z), params) == pytest.approx(9 - 0.6)
    with pytest.raises(ValueError):
        PotentialParams(0.5)


def test_refined_potential_labels():
    params = RefinedParams(0.3, 0.1, 0.2)
    # span 0..8; left pattern (x1, x2) = (1, 0), right pattern (x7, x6) = (0, 1)
    c = cfg("01011110011111")
    s = zero_span(c)
    assert (s.l, s.r, s.diameter) == (0, 8, 9)
    assert refined_potential(c, s, params) == pytest.approx(9 - 0.1 - 0.1)
    assert refined_potential(c, s, params, mirrored=True) == pytest.approx(9 - 0.1 - 0.2)
    short = cfg("0001111111")
    assert refined_potential(short, zero_span(short), params) == 0.0


bits_strategy = st.integers(6, 24).flatmap(
    lambda n: st.lists(st.integers(0, 1), min_size=n, max_size=n))


@settings(max_examples=300, deadline=None)
@given(bits_strategy, st.integers(0, 10**6), st.booleans())
def test_compiled_span_matches_reference(bits, salt, use_prev):
    c = RingConfig(tuple(bits))
    n = c.n
    prev = None
    if use_prev:
        l = salt % n
        d = 1 + (salt // n) % n
        prev = ZeroSpan(n, l, (l + d - 1) % n, d, 1)
    ref = zero_span(c, prev)
    arr = c.to_array()
    pl, pr = (prev.l, prev.r) if prev else (0, 0)
    l, r, d, x = K.span_of(arr, pl, pr, prev is not None)
    assert (l, r, d, x) == (ref.l, ref.r, ref.diameter, ref.zero_count)
    params = PotentialParams(0.3)
    m = potential(c, ref, params)
    assert K.potential_of(arr, l, r, d, x, 0.3) == pytest.approx(m)
    assert m >= 0
    assert ref.zero_count <= ref.diameter <= n


@settings(max_examples=100, deadline=None)
@given(bits_strategy, st.lists(st.tuples(st.floats(0, 0.999), st.integers(0, 7)), max_size=40))
def test_zero_index_stays_consistent(bits, moves):
    arr = np.array(bits, dtype=np.uint8)
    zlist, zpos, nz = K.zero_index(arr)
    n = len(arr)
    for u, draw in moves:
        i = K.choose_site(zlist, nz, n, u)
        if nz:
            assert arr[i] == 0
        nz = K.apply_move(arr, zlist, zpos, nz, i, draw & 1, (draw >> 1) & 1, (draw >> 2) & 1)
        zeros = set(np.nonzero(arr == 0)[0].tolist())
        assert nz == len(zeros) and set(zlist[:nz].tolist()) == zeros
        assert all(zpos[zlist[k]] == k for k in range(nz))

"""Drift bounds for the potential near one end of the zero span.

Everything here is a pure function of ``p`` and the potential weights.  The
closed forms in :func:`drift_closed_form` are checked against
:func:`drift_enumerate`, which rebuilds them from scratch by listing the
eight replacement outcomes for every zero near the left end.

Frame used by the enumerators: the left end is placed at index 2, so a case
is the prefix ``(1, 1, 0, w_1, ..., w_k)`` followed by unknown sites.  Any
site the window does not show is completed in the way that makes the new
potential largest.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .model_core import RefinedParams

P_STAR = 0.54
"""Earlier, non-rigorous threshold ``p_* = 0.54...``."""

P_C_ESTIMATE = 0.36
"""Critical point suggested by simulations."""

REFERENCE_REFINED_PARAMS = RefinedParams(alpha=0.3764287, beta=0.078811, gamma=0.423494)
REFERENCE_REFINED_THRESHOLD = 0.419533
REFERENCE_REFINED_MARGIN = 3.6e-8

BASE_WINDOW = 2
REFINED_WINDOW = 4


class EndCase(enum.Enum):
    """The two sites after the left end: ``(x_{l+1}, x_{l+2})``."""

    CASE00 = (0, 0)
    CASE01 = (0, 1)
    CASE10 = (1, 0)
    CASE11 = (1, 1)

    @property
    def label(self) -> str:
        return "t" + "".join(map(str, self.value))


def _check_domain(p, beta):
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if not 0 < beta < Fraction(1, 2):
        raise ValueError(f"beta must lie in (0, 1/2), got {beta}")


# -- closed forms ---------------------------------------------------------

def drift_closed_form(case: EndCase, p, beta):
    """Upper bound on the conditional drift for ``case``, as printed.

    Works with floats or :class:`fractions.Fraction`.
    """
    _check_domain(p, beta)
    q = 1 - p
    s = p * p + p + 1
    if case is EndCase.CASE11:
        return _t11(p, beta)
    if case is EndCase.CASE00:
        return (-(p ** 3 + p ** 2 + p - 1 + beta * q) / 3
                - (p * s + beta * (p + 1) * q ** 2) / 3
                - beta * q / 3 + beta)
    if case is EndCase.CASE01:
        return _t11(p, beta) / 2 - (p * s + beta * (1 + p) * q ** 2) / 2 + beta
    if case is EndCase.CASE10:
        return -(p ** 3 + p ** 2 + p - 1 + beta * q) / 2 - beta * q / 2
    raise ValueError(f"unknown case {case!r}")


def _t11(p, beta):
    return -(2 * p - 1) * (p * p + p + 1) - beta * (1 - p) ** 2 * (1 + p)


def drift_closed_form_dp(case: EndCase, p, beta):
    """Derivative in ``p`` of :func:`drift_closed_form`."""
    _check_domain(p, beta)
    g = 3 * p * p + 2 * p + 1  # d/dp of p^3 + p^2 + p
    h = (1 - p) * (1 + 3 * p)  # minus d/dp of (1 + p)(1 - p)^2
    d11 = -(6 * p * p + 2 * p + 1) + beta * h
    if case is EndCase.CASE11:
        return d11
    if case is EndCase.CASE00:
        return -2 * g / 3 + beta * (2 + h) / 3
    if case is EndCase.CASE01:
        return d11 / 2 - (g - beta * h) / 2
    if case is EndCase.CASE10:
        return -g / 2 + beta
    raise ValueError(f"unknown case {case!r}")


# -- enumeration oracle -----------------------------------------------------

@dataclass(frozen=True)
class _Outcome:
    site: int
    draws: tuple
    delta_d: int
    patterns: tuple  # every completion of the new end pattern


def _end_outcomes(window: Sequence[int], choose_depth: int, pattern_len: int):
    """All (site, draws) outcomes for the zeros among the first sites.

    ``window`` holds ``x_{l+1}, ..., x_{l+k}``; zeros at offsets
    ``0 .. choose_depth - 1`` from ``l`` are the candidates.  Returns the
    candidate sites and the list of outcomes.
    """
    known = [1, 1, 0, *window]
    sites = [i for i in range(2, 2 + choose_depth) if i < len(known) and known[i] == 0]
    outcomes = []
    for i in sites:
        for draws in itertools.product((0, 1), repeat=3):
            cells = list(known) + [None] * max(0, i + 2 - len(known))
            cells[i - 1:i + 2] = draws
            new_l = None
            first_unknown = len(cells)
            for j in range(1, len(cells)):
                if cells[j] is None:
                    first_unknown = j
                    break
                if cells[j] == 0:
                    new_l = j
                    break
            if new_l is None:
                # the new left end lies somewhere in the unseen part; the
                # nearest possibility with no deduction is the worst case
                delta_d = 2 - first_unknown
                pats = tuple(itertools.product((0, 1), repeat=pattern_len))
            else:
                delta_d = 2 - new_l
                seen = [cells[j] if j < len(cells) else None
                        for j in range(new_l + 1, new_l + 1 + pattern_len)]
                free = [k for k, v in enumerate(seen) if v is None]
                pats = set()
                for fill in itertools.product((0, 1), repeat=len(free)):
                    pat = list(seen)
                    for k, v in zip(free, fill):
                        pat[k] = v
                    pats.add(tuple(pat))
                pats = tuple(sorted(pats))
            outcomes.append(_Outcome(i, draws, delta_d, pats))
    return sites, outcomes


def _draw_prob(draws, p):
    prob = 1
    for v in draws:
        prob = prob * (p if v else 1 - p)
    return prob


def _window_drift(window, p, deduction: Callable, choose_depth: int, pattern_len: int):
    sites, outcomes = _end_outcomes(window, choose_depth, pattern_len)
    old = deduction(tuple(window[:pattern_len]))
    total = 0
    for o in outcomes:
        worst = max(o.delta_d + old - deduction(pat) for pat in o.patterns)
        total = total + _draw_prob(o.draws, p) * worst
    return total / len(sites)


def drift_enumerate(case: EndCase, p, beta):
    """Drift bound for ``case`` recomputed by listing all outcomes.

    Conditions on a uniform choice among the zeros at ``l, l+1, l+2`` and
    averages the change of the potential over the eight replacement triples.
    Exact with :class:`fractions.Fraction` inputs.
    """
    _check_domain(p, beta)

    def deduction(pat):
        return beta if pat[0] == 0 else 0

    return _window_drift(case.value, p, deduction, choose_depth=3, pattern_len=1)


@dataclass(frozen=True)
class DriftReport:
    t00: float
    t01: float
    t10: float
    t11: float
    worst: float
    margin: float

    def as_dict(self) -> dict:
        return {"t00": self.t00, "t01": self.t01, "t10": self.t10,
                "t11": self.t11, "worst": self.worst, "margin": self.margin}


def worst_drift(p: float, beta: float) -> DriftReport:
    """All four case bounds and their maximum; ``margin`` is ``-worst`` if negative."""
    t = {c: float(drift_closed_form(c, p, beta)) for c in EndCase}
    worst = max(t.values())
    return DriftReport(t[EndCase.CASE00], t[EndCase.CASE01], t[EndCase.CASE10],
                       t[EndCase.CASE11], worst, max(0.0, -worst))


def boundary_drift(kind: str, p: float) -> float:
    """Drift when the span covers the whole ring (``full_circle``) or all but one site."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if kind == "full_circle":
        return -(1 - (1 - p) ** 3)
    if kind == "full_minus_one":
        return -p * (5 - p * p) / 2
    raise ValueError(f"kind must be 'full_circle' or 'full_minus_one', got {kind!r}")


# -- threshold ------------------------------------------------------------------

def threshold_polynomial(p: float) -> float:
    """``p^5 + 4p^4 + 2p^3 + 3p^2 - 1`` (Horner form)."""
    return ((((p + 4) * p + 2) * p + 3) * p) * p - 1


def beta_diamond_of(p: float) -> float:
    """The weight that makes the two extreme cases vanish together at ``p``."""
    return -(4 * p ** 3 + p ** 2 + p - 2) / (2 * p ** 3 - 2 * p ** 2 + 3)


@dataclass(frozen=True)
class ThresholdSolution:
    p_diamond: float
    beta_diamond: float
    residual: float
    iterations: int
    p_star: float = P_STAR
    p_c_estimate: float = P_C_ESTIMATE


def solve_threshold(tolerance: float = 1e-12, max_iter: int = 200) -> ThresholdSolution:
    """Bisect the threshold polynomial on ``[0, 1]``.

    Stops when ``|f(p)| <= tolerance`` or the bracket can no longer shrink.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    lo, hi = 0.0, 1.0  # f(0) = -1, f(1) = 10
    mid = 0.5
    it = 0
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        f = threshold_polynomial(mid)
        if abs(f) <= tolerance or mid in (lo, hi):
            break
        if f < 0:
            lo = mid
        else:
            hi = mid
    return ThresholdSolution(mid, beta_diamond_of(mid), abs(threshold_polynomial(mid)), it)


# -- monotonicity ---------------------------------------------------------------

@dataclass
class MonotonicityReport:
    points_checked: int = 0
    pairs_checked: int = 0
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def default_grid(step: float = 0.01, upper: float = 1.0) -> np.ndarray:
    k = int(round(upper / step))
    return np.round(np.arange(1, k) * step, 12)


def monotonicity_check(p_grid: Optional[Iterable[float]] = None,
                       beta_grid: Optional[Iterable[float]] = None) -> MonotonicityReport:
    """Check every case bound is strictly decreasing in ``p``.

    Uses the analytic derivative at each grid point and the sign of the
    difference between neighbouring grid points in each ``beta`` column.
    """
    p_grid = default_grid(0.01, 1.0) if p_grid is None else np.sort(np.asarray(list(p_grid), float))
    beta_grid = default_grid(0.01, 0.5) if beta_grid is None else np.asarray(list(beta_grid), float)
    report = MonotonicityReport()
    for beta in beta_grid:
        for case in EndCase:
            prev = None
            for p in p_grid:
                report.points_checked += 1
                d = drift_closed_form_dp(case, p, beta)
                if not d < 0:
                    report.violations.append(("derivative", case.label, float(p), float(beta), float(d)))
                val = drift_closed_form(case, p, beta)
                if prev is not None:
                    report.pairs_checked += 1
                    if not val < prev[1]:
                        report.violations.append(("difference", case.label, float(p), float(beta),
                                                  float(val - prev[1])))
                prev = (p, val)
    return report


# -- refined potential ----------------------------------------------------------

_REFINED_SLOT = {(0, 0): 0, (1, 0): 1, (0, 1): 2}


def _refined_deduction(params: Sequence[float]):
    def deduction(pat):
        k = _REFINED_SLOT.get(tuple(pat))
        return 0 if k is None else params[k]
    return deduction


def refined_case_drifts(p: float, params: RefinedParams, window: int = REFINED_WINDOW,
                        choose_depth: int = 4) -> dict:
    """Drift bound of the refined potential for every window pattern.

    Keys are the tuples ``(x_{l+1}, ..., x_{l+window})``.  The candidate
    zeros are those at ``l .. l+choose_depth-1``.
    """
    ded = _refined_deduction(params.as_tuple())
    return {bits: float(_window_drift(bits, p, ded, choose_depth, 2))
            for bits in itertools.product((0, 1), repeat=window)}


def refined_worst_drift(p: float, params: RefinedParams, window: int = REFINED_WINDOW,
                        choose_depth: int = 4) -> float:
    return max(refined_case_drifts(p, params, window, choose_depth).values())


def _slot_vector(pat) -> np.ndarray:
    v = np.zeros(3)
    k = _REFINED_SLOT.get(tuple(pat))
    if k is not None:
        v[k] = 1.0
    return v


def refined_minimax(p: float, window: int = REFINED_WINDOW, choose_depth: int = 4):
    """Minimise over the three weights the largest refined case drift at ``p``.

    The case drifts are expectations of maxima of functions linear in the
    weights, so this is a linear programme.  Returns ``(value, weights)``.
    """
    rows, rhs = [], []
    case_rows = []
    n_aux = 0
    for bits in itertools.product((0, 1), repeat=window):
        sites, outcomes = _end_outcomes(bits, choose_depth, 2)
        old = _slot_vector(bits[:2])
        weights = []
        for o in outcomes:
            for pat in o.patterns:
                # aux >= delta_d + old.w - new.w
                rows.append((old - _slot_vector(pat), n_aux))
                rhs.append(-o.delta_d)
            weights.append((n_aux, _draw_prob(o.draws, p) / len(sites)))
            n_aux += 1
        case_rows.append(weights)
    nv = 4 + n_aux
    a_ub = np.zeros((len(rows) + len(case_rows), nv))
    b_ub = np.zeros(len(rows) + len(case_rows))
    for k, (coef, aux) in enumerate(rows):
        a_ub[k, :3] = coef
        a_ub[k, 4 + aux] = -1.0
        b_ub[k] = rhs[k]
    for k, weights in enumerate(case_rows):
        row = len(rows) + k
        a_ub[row, 3] = -1.0
        for aux, w in weights:
            a_ub[row, 4 + aux] = w
    c = np.zeros(nv)
    c[3] = 1.0
    bounds = [(0.0, 1.0)] * 3 + [(None, None)] * (1 + n_aux)
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"linear programme failed at p={p}: {res.message}")
    return float(res.fun), tuple(float(v) for v in res.x[:3])


@dataclass(frozen=True)
class RefinedSolution:
    params: Optional[RefinedParams]
    p_threshold: float
    epsilon_margin: float
    converged: bool
    evaluations: int
    window: int
    p_margin: float = float("nan")


def optimize_refined(search_budget: int = 80, window: int = REFINED_WINDOW,
                     bracket: tuple = (0.3, 0.6), xtol: float = 1e-9,
                     margin_offset: float = 1e-6) -> RefinedSolution:
    """Smallest ``p`` at which some weights make every refined case drift non-positive.

    Bisects on ``p`` using :func:`refined_minimax`; ``search_budget`` caps
    the number of linear programmes solved.  The returned weights and margin
    are those at ``p_threshold + margin_offset``.
    """
    if search_budget <= 0:
        raise ValueError("search_budget must be positive")
    lo, hi = bracket
    evals = 0

    def f(p):
        nonlocal evals
        evals += 1
        return refined_minimax(p, window)[0]

    if not (f(lo) > 0 and f(hi) <= 0):
        return RefinedSolution(None, float("nan"), float("nan"), False, evals, window)
    while hi - lo > xtol:
        if evals >= search_budget - 1:
            return RefinedSolution(None, hi, float("nan"), False, evals, window)
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    p_margin = hi + margin_offset
    value, weights = refined_minimax(p_margin, window)
    evals += 1
    tiny = 1e-12
    params = RefinedParams(*(min(max(w, tiny), 1 - tiny) for w in weights))
    return RefinedSolution(params, hi, -value, value < 0, evals, window, p_margin)


# -- exact cross-check ----------------------------------------------------------

def oracle_gap(p_values: Iterable, beta_values: Iterable) -> float:
    """Largest ``|closed form - enumeration|`` over a grid (0 for exact inputs)."""
    gap = 0
    for p in p_values:
        for beta in beta_values:
            for case in EndCase:
                d = abs(drift_closed_form(case, p, beta) - drift_enumerate(case, p, beta))
                gap = max(gap, d)
    return gap

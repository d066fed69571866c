"""Exact stationary quantities for small rings and exhaustive lemma checks.

States are encoded as ``n``-bit integers with bit ``i`` holding ``x_i``.
For ``n <= 12`` the transition matrix is materialised as a sparse CSR
matrix; above that the kernel is applied on the fly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.sparse.linalg import spsolve

from ._kernels import potential_of, span_of
from .model_core import (
    PotentialParams,
    RingConfig,
    apply_move,
    minimal_arcs,
    potential,
    ZeroSpan,
)

MAX_N = 20
MATERIALIZE_MAX_N = 12


class ConvergenceError(RuntimeError):
    pass


@njit(cache=True)
def _successors(n, p, s, out_t, out_w):
    """Fill successor states/weights of ``s``; returns how many were written."""
    full = (1 << n) - 1
    zeros = 0
    for i in range(n):
        if (s >> i) & 1 == 0:
            zeros += 1
    k = 0
    for i in range(n):
        if zeros > 0 and (s >> i) & 1 == 1:
            continue
        w_site = 1.0 / (zeros if zeros > 0 else n)
        a = (i - 1) % n
        c = (i + 1) % n
        base = s & (full ^ ((1 << a) | (1 << i) | (1 << c)))
        for o in range(8):
            ones = (o & 1) + ((o >> 1) & 1) + ((o >> 2) & 1)
            w = w_site * p ** ones * (1.0 - p) ** (3 - ones)
            if w == 0.0:
                continue
            t = base
            if o & 1:
                t |= 1 << a
            if (o >> 1) & 1:
                t |= 1 << i
            if (o >> 2) & 1:
                t |= 1 << c
            out_t[k] = t
            out_w[k] = w
            k += 1
    return k


@njit(cache=True)
def _coo_entries(n, p):
    size = 1 << n
    cap = size * 8 * n
    rows = np.empty(cap, np.int64)
    cols = np.empty(cap, np.int64)
    vals = np.empty(cap, np.float64)
    tt = np.empty(8 * n, np.int64)
    ww = np.empty(8 * n, np.float64)
    k = 0
    for s in range(size):
        m = _successors(n, p, s, tt, ww)
        for j in range(m):
            rows[k] = s
            cols[k] = tt[j]
            vals[k] = ww[j]
            k += 1
    return rows[:k], cols[:k], vals[:k]


@njit(cache=True)
def _apply_kernel(n, p, pi, out):
    out[:] = 0.0
    tt = np.empty(8 * n, np.int64)
    ww = np.empty(8 * n, np.float64)
    for s in range(pi.shape[0]):
        mass = pi[s]
        if mass == 0.0:
            continue
        m = _successors(n, p, s, tt, ww)
        for j in range(m):
            out[tt[j]] += mass * ww[j]


@dataclass
class KernelMatrix:
    """Row-stochastic kernel on ``{0,1}^n``; ``matrix`` is None when not materialised."""

    n: int
    p: float
    matrix: Optional[sp.csr_matrix] = None

    @property
    def size(self) -> int:
        return 1 << self.n

    def apply(self, pi: np.ndarray) -> np.ndarray:
        """Row vector times kernel."""
        if self.matrix is not None:
            return self.matrix.T @ pi
        out = np.empty_like(pi)
        _apply_kernel(self.n, self.p, pi, out)
        return out

    def row_sums(self) -> np.ndarray:
        if self.matrix is None:
            raise ValueError("kernel not materialised")
        return np.asarray(self.matrix.sum(axis=1)).ravel()


def build_kernel(n: int, p: float, materialize: Optional[bool] = None) -> KernelMatrix:
    if not 3 <= n <= MAX_N:
        raise ValueError(f"n must lie in [3, {MAX_N}], got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if materialize is None:
        materialize = n <= MATERIALIZE_MAX_N
    if not materialize:
        return KernelMatrix(n, float(p))
    rows, cols, vals = _coo_entries(n, float(p))
    size = 1 << n
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    mat.sum_duplicates()
    return KernelMatrix(n, float(p), mat)


@dataclass
class StationarySolution:
    pi: np.ndarray
    nu: float
    residual: float
    method: str
    iterations: int = 0
    mu: Optional[float] = None

    def nu_at(self, i: int) -> float:
        """Stationary probability that site ``i`` is 1."""
        states = np.arange(self.pi.shape[0])
        return float(self.pi[(states >> i) & 1 == 1].sum())


def _popcounts(n: int) -> np.ndarray:
    states = np.arange(1 << n)
    return sum((states >> i) & 1 for i in range(n))


def _nu(pi: np.ndarray, n: int) -> float:
    return float(pi @ _popcounts(n)) / n


def _residual(kernel: KernelMatrix, pi: np.ndarray) -> float:
    return float(np.abs(kernel.apply(pi) - pi).sum())


def _solve_linear(mat: sp.csr_matrix) -> np.ndarray:
    size = mat.shape[0]
    a = (mat.T - sp.identity(size, format="csr")).tolil()
    a[0, :] = np.ones(size)
    b = np.zeros(size)
    b[0] = 1.0
    pi = spsolve(a.tocsc(), b)
    return pi / pi.sum()


def stationary(kernel: KernelMatrix, method: str = "auto", tol: float = 1e-13,
               max_iter: int = 1_000_000) -> StationarySolution:
    """Stationary distribution by sparse linear solve or power iteration.

    For ``p`` in {0, 1} the chain is absorbed in the all-zeros (resp.
    all-ones) state and that point mass is returned.
    """
    n, size = kernel.n, kernel.size
    if kernel.p in (0.0, 1.0):
        pi = np.zeros(size)
        pi[0 if kernel.p == 0.0 else size - 1] = 1.0
        return StationarySolution(pi, _nu(pi, n), _residual(kernel, pi), "absorbing")
    if method == "auto":
        method = "solve" if kernel.matrix is not None else "power"
    if method == "solve":
        if kernel.matrix is None:
            raise ValueError("linear solve needs a materialised kernel")
        pi = _solve_linear(kernel.matrix)
        return StationarySolution(pi, _nu(pi, n), _residual(kernel, pi), "solve")
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    pi = np.full(size, 1.0 / size)
    for it in range(1, max_iter + 1):
        nxt = kernel.apply(pi)
        nxt /= nxt.sum()
        diff = float(np.abs(nxt - pi).sum())
        pi = nxt
        if diff <= tol:
            return StationarySolution(pi, _nu(pi, n), diff, "power", it)
    raise ConvergenceError(f"power iteration did not reach {tol} in {max_iter} iterations")


# -- stationary mean of the potential ---------------------------------------

@njit(cache=True)
def _bits_into(s, n, out):
    for i in range(n):
        out[i] = (s >> i) & 1


@njit(cache=True)
def _augmented_states(n):
    """Enumerate (state, l, r, D, X) pairs over every admissible span."""
    size = 1 << n
    cap = size * n
    st = np.empty(cap, np.int64)
    ls = np.empty(cap, np.int64)
    rs = np.empty(cap, np.int64)
    ds = np.empty(cap, np.int64)
    xs = np.empty(cap, np.int64)
    bits = np.empty(n, np.uint8)
    k = 0
    for s in range(size):
        _bits_into(s, n, bits)
        x = 0
        for i in range(n):
            if bits[i] == 0:
                x += 1
        if x == 0:
            st[k] = s; ls[k] = 0; rs[k] = 0; ds[k] = 0; xs[k] = 0
            k += 1
            continue
        if x == n:
            for l in range(n):
                st[k] = s; ls[k] = l; rs[k] = (l - 1) % n; ds[k] = n; xs[k] = n
                k += 1
            continue
        # every minimal arc: try each zero as the left end
        l0, r0, d, _ = span_of(bits, -1, -1, False)
        for l in range(n):
            if bits[l] == 0 and bits[(l - 1) % n] == 1:
                r = (l + d - 1) % n
                if bits[r] == 0 and bits[(r + 1) % n] == 1:
                    ok = True
                    for j in range(d, n):
                        if bits[(l + j) % n] == 0:
                            ok = False
                            break
                    if ok:
                        st[k] = s; ls[k] = l; rs[k] = r; ds[k] = d; xs[k] = x
                        k += 1
    return st[:k], ls[:k], rs[:k], ds[:k], xs[:k]


@njit(cache=True)
def _augmented_entries(n, p, st, ls, rs, ds, index):
    m = st.shape[0]
    cap = m * 8 * n
    rows = np.empty(cap, np.int64)
    cols = np.empty(cap, np.int64)
    vals = np.empty(cap, np.float64)
    tt = np.empty(8 * n, np.int64)
    ww = np.empty(8 * n, np.float64)
    bits = np.empty(n, np.uint8)
    k = 0
    for a in range(m):
        cnt = _successors(n, p, st[a], tt, ww)
        for j in range(cnt):
            _bits_into(tt[j], n, bits)
            nl, nr, nd, nx = span_of(bits, ls[a], rs[a], ds[a] > 0)
            rows[k] = a
            cols[k] = index[tt[j] * n + nl]
            vals[k] = ww[j]
            k += 1
    return rows[:k], cols[:k], vals[:k]


@dataclass
class AugmentedSolution:
    """Stationary law of the chain that also carries the span choice."""

    pi: np.ndarray
    states: np.ndarray
    lefts: np.ndarray
    potentials: np.ndarray
    mu: float

    def marginal(self, n: int) -> np.ndarray:
        out = np.zeros(1 << n)
        np.add.at(out, self.states, self.pi)
        return out


def augmented_stationary(n: int, p: float, params: PotentialParams) -> AugmentedSolution:
    """Stationary law of ``(configuration, span)`` under the tie rule.

    The span depends on history only through ties; tracking it makes the
    stationary mean of the potential match a long simulation exactly.
    """
    if not 3 <= n <= 14:
        raise ValueError(f"n must lie in [3, 14] for the span-tracking chain, got {n}")
    st, ls, rs, ds, xs = _augmented_states(n)
    index = np.full((1 << n) * n, -1, np.int64)
    index[st * n + ls] = np.arange(st.shape[0])
    bits = np.empty(n, np.uint8)
    pots = np.empty(st.shape[0])
    for a in range(st.shape[0]):
        _bits_into(st[a], n, bits)
        pots[a] = potential_of(bits, ls[a], rs[a], ds[a], xs[a], params.beta)
    m = st.shape[0]
    if p in (0.0, 1.0):
        target = 0 if p == 0.0 else (1 << n) - 1
        pi = ((st == target) & (ls == 0)).astype(float)
    else:
        rows, cols, vals = _augmented_entries(n, float(p), st, ls, rs, ds, index)
        if (cols < 0).any():
            raise RuntimeError("span-tracking chain left its state set")
        mat = sp.coo_matrix((vals, (rows, cols)), shape=(m, m)).tocsr()
        pi = _solve_linear(mat)
    return AugmentedSolution(pi, st, ls, pots, float(pi @ pots))


def mu_exact(kernel: KernelMatrix, params: PotentialParams) -> float:
    """Stationary expectation of the potential for the chain in ``kernel``."""
    return augmented_stationary(kernel.n, kernel.p, params).mu


# -- exhaustive lemma checks ------------------------------------------------

@dataclass(frozen=True)
class Counterexample:
    kind: str
    state: str
    span: tuple
    site: int
    draws: tuple
    next_state: str
    next_spans: tuple
    d_before: int
    d_after: int
    m_before: float
    m_after: float
    tie_before: bool


@dataclass
class LemmaReport:
    n: int
    beta: float
    states_checked: int = 0
    transitions_checked: int = 0
    flips: int = 0
    interior_transitions: int = 0
    flip_violations: int = 0
    interior_violations: int = 0
    interior_changes: int = 0
    flip_diameter_increases: int = 0
    flip_potential_increases: int = 0
    flip_breakdown: dict = field(default_factory=dict)
    examples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.flip_violations == 0 and self.interior_violations == 0

    def summary(self) -> dict:
        return {
            "n": self.n, "beta": self.beta,
            "states_checked": self.states_checked,
            "transitions_checked": self.transitions_checked,
            "flips": self.flips,
            "interior_transitions": self.interior_transitions,
            "flip_violations": self.flip_violations,
            "interior_violations": self.interior_violations,
            "interior_changes": self.interior_changes,
            "flip_diameter_increases": self.flip_diameter_increases,
            "flip_potential_increases": self.flip_potential_increases,
            "flip_breakdown": {"/".join(map(str, k)): v
                                 for k, v in sorted(self.flip_breakdown.items())},
            "passed": self.passed,
        }


def _span_for(config: RingConfig, arc: tuple) -> ZeroSpan:
    n = config.n
    x = config.zero_count
    if x == 0:
        return ZeroSpan(n, 0, 0, 0, 0, all_one=True)
    l, r = arc
    d = n if x == n else (r - l) % n + 1
    return ZeroSpan(n, l, r, d, x, all_zero=(x == n))


def exhaustive_lemma_check(n: int, params: PotentialParams, max_examples: int = 20,
                           tol: float = 1e-12) -> LemmaReport:
    """Check the flip and interior lemmas on every transition with ``D >= 6``.

    Every shortest arc of the current state is tried as its span, since the
    span in use depends on history.  A transition flips when no shortest arc
    of the next state shares an end with the current one.  Checked:

    * flip: ``D`` drops by at least 1 and the potential by ``1 - 2 beta``
      (for at least one admissible next span);
    * chosen site outside the end set: the potential does not increase for
      at least one admissible next span.

    ``flip_breakdown`` counts flip-property failures by (tie at time t,
    change of D, D >= n - 1).
    """
    if not 6 <= n <= 14:
        raise ValueError(f"n must lie in [6, 14], got {n}")
    beta = params.beta
    report = LemmaReport(n, beta)
    arcs_cache = {}

    def arcs_of(s):
        got = arcs_cache.get(s)
        if got is None:
            cfg = RingConfig.from_int(s, n)
            got = (cfg, minimal_arcs(cfg))
            arcs_cache[s] = got
        return got

    for s in range(1 << n):
        cfg, arcs = arcs_of(s)
        if not arcs:
            continue
        span0 = _span_for(cfg, arcs[0])
        if span0.diameter < 6:
            continue
        report.states_checked += 1
        tie = len(arcs) > 1
        for arc in arcs:
            span = _span_for(cfg, arc)
            m0 = potential(cfg, span, params)
            for i in cfg.zeros():
                interior = not span.in_end_set(i)
                for draws in itertools.product((0, 1), repeat=3):
                    nxt = apply_move(cfg, i, draws)
                    report.transitions_checked += 1
                    _, next_arcs = arcs_of(nxt.to_int())
                    sharing = [a for a in next_arcs if a[0] == span.l or a[1] == span.r]
                    flip = not sharing
                    choices = sharing if sharing else next_arcs
                    spans = [_span_for(nxt, a) for a in choices]
                    ms = [potential(nxt, sp_, params) for sp_ in spans]
                    d1 = spans[0].diameter
                    bad = None
                    if flip:
                        report.flips += 1
                        if d1 > span.diameter:
                            report.flip_diameter_increases += 1
                        if min(ms) > m0 + tol:
                            report.flip_potential_increases += 1
                        ok = d1 <= span.diameter - 1 and min(ms) <= m0 - (1 - 2 * beta) + tol
                        if not ok:
                            report.flip_violations += 1
                            key = (int(tie), d1 - span.diameter, int(span.diameter >= n - 1))
                            report.flip_breakdown[key] = report.flip_breakdown.get(key, 0) + 1
                            bad = "flip"
                    if interior:
                        report.interior_transitions += 1
                        if not flip and ms[0] != m0:
                            report.interior_changes += 1
                        if min(ms) > m0 + tol:
                            report.interior_violations += 1
                            bad = "interior"
                    if bad and len(report.examples) < max_examples:
                        report.examples.append(Counterexample(
                            bad, str(cfg), (span.l, span.r), i, draws, str(nxt),
                            tuple((sp_.l, sp_.r) for sp_ in spans), span.diameter, d1,
                            m0, min(ms), tie))
    return report

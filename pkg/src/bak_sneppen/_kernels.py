"""Compiled inner loops shared by the simulation, exact and renewal code.

Configurations are ``uint8`` arrays (1 = fit, 0 = unfit).  The zero set is
mirrored in ``zlist``/``zpos`` so that a uniform zero can be drawn in O(1):
``zlist[:nz]`` holds the zero indices in arbitrary order and ``zpos[i]`` is
the slot of ``i`` in ``zlist`` (or -1).
"""

import numpy as np
from numba import njit

# Slots of the integer state vector carried between simulation chunks.
S_NZ, S_L, S_R, S_D = 0, 1, 2, 3
STATE_LEN = 4


@njit(cache=True, nogil=True)
def span_of(bits, prev_l, prev_r, has_prev):
    """Minimal zero-covering arc ``(l, r, D, X)`` with the tie rule.

    Among arcs of minimal length, one sharing both ends with the previous
    arc wins, then one sharing ``l`` or ``r`` (smallest ``l``), then the
    smallest ``l`` overall.
    """
    n = bits.shape[0]
    x = 0
    z0 = -1
    for i in range(n):
        if bits[i] == 0:
            x += 1
            if z0 < 0:
                z0 = i
    if x == 0:
        return 0, 0, 0, 0
    if x == n:
        l = prev_l if has_prev else 0
        return l, (l - 1) % n, n, n
    best = 0
    run = 0
    for k in range(1, n + 1):
        j = (z0 + k) % n
        if bits[j] == 1:
            run += 1
        else:
            if run > best:
                best = run
            run = 0
    cl = -1
    cr = -1
    sl = -1
    sr = -1
    run = 0
    for k in range(1, n + 1):
        j = (z0 + k) % n
        if bits[j] == 1:
            run += 1
            continue
        if run == best:
            l = j
            r = (j - best - 1) % n
            if has_prev:
                if l == prev_l and r == prev_r:
                    return l, r, n - best, x
                if (l == prev_l or r == prev_r) and (sl < 0 or l < sl):
                    sl = l
                    sr = r
            if cl < 0 or l < cl:
                cl = l
                cr = r
        run = 0
    if sl >= 0:
        return sl, sr, n - best, x
    return cl, cr, n - best, x


@njit(cache=True, nogil=True)
def potential_of(bits, l, r, d, x, beta):
    n = bits.shape[0]
    if x == n:
        return n - 2.0 * beta
    if d < 6:
        return 0.0
    m = float(d)
    if bits[(l + 1) % n] == 0:
        m -= beta
    if bits[(r - 1) % n] == 0:
        m -= beta
    return m


@njit(cache=True, nogil=True)
def in_end_set(i, l, d, n):
    # d == 0 is the all-ones fallback; for d <= 6 the six end points cover the arc
    if d == 0:
        return True
    k = (i - l) % n
    return k <= 2 or k >= d - 3


@njit(cache=True, nogil=True)
def _set_bit(bits, zlist, zpos, nz, j, v):
    if bits[j] == v:
        return nz
    bits[j] = v
    if v == 0:
        zlist[nz] = j
        zpos[j] = nz
        return nz + 1
    k = zpos[j]
    last = zlist[nz - 1]
    zlist[k] = last
    zpos[last] = k
    zpos[j] = -1
    return nz - 1


@njit(cache=True, nogil=True)
def apply_move(bits, zlist, zpos, nz, i, a, b, c):
    n = bits.shape[0]
    nz = _set_bit(bits, zlist, zpos, nz, (i - 1) % n, a)
    nz = _set_bit(bits, zlist, zpos, nz, i, b)
    nz = _set_bit(bits, zlist, zpos, nz, (i + 1) % n, c)
    return nz


@njit(cache=True, nogil=True)
def choose_site(zlist, nz, n, u):
    if nz > 0:
        k = int(u * nz)
        if k >= nz:
            k = nz - 1
        return zlist[k]
    k = int(u * n)
    if k >= n:
        k = n - 1
    return k


def zero_index(bits):
    """Build ``(zlist, zpos, nz)`` for a configuration array."""
    n = bits.shape[0]
    zlist = np.full(n, -1, dtype=np.int64)
    zpos = np.full(n, -1, dtype=np.int64)
    nz = 0
    for i in range(n):
        if bits[i] == 0:
            zlist[nz] = i
            zpos[i] = nz
            nz += 1
    return zlist, zpos, nz


@njit(cache=True, nogil=True)
def simulate_chunk(bits, zlist, zpos, state, u, eta, beta, t0, burn, batch_len,
                   nbatch, track, ones_acc, pot_acc, drift_sum, drift_cnt,
                   counters, series, stride):
    """Advance the chain ``len(u)`` steps, accumulating batch statistics.

    ``counters`` = [flips, qualifying drift samples].  Step ``t`` contributes
    the state at time ``t + 1`` to the time averages once ``t + 1 > burn``.
    """
    n = bits.shape[0]
    nz = state[S_NZ]
    l = state[S_L]
    r = state[S_R]
    d = state[S_D]
    steps = u.shape[0]
    m_cur = potential_of(bits, l, r, d, nz, beta) if track else 0.0
    for s in range(steps):
        t = t0 + s
        i = choose_site(zlist, nz, n, u[s])
        qualifying = False
        if track and m_cur >= 8.0 and nz > 0 and in_end_set(i, l, d, n):
            qualifying = True
        nz = apply_move(bits, zlist, zpos, nz, i, eta[s, 0], eta[s, 1], eta[s, 2])
        if track:
            nl, nr, nd, _ = span_of(bits, l, r, d > 0)
            if nd > 0 and d > 0 and nl != l and nr != r:
                counters[0] += 1
            l = nl
            r = nr
            d = nd
            m_new = potential_of(bits, l, r, d, nz, beta)
        else:
            m_new = 0.0
        tt = t + 1
        if tt > burn:
            k = (tt - burn - 1) // batch_len
            if k < nbatch:
                ones_acc[k] += n - nz
                pot_acc[k] += m_new
                if qualifying:
                    drift_sum[k] += m_new - m_cur
                    drift_cnt[k] += 1
        if qualifying:
            counters[1] += 1
        if stride > 0 and tt % stride == 0:
            idx = tt // stride - 1
            if idx < series.shape[0]:
                series[idx] = nz / n
        m_cur = m_new
    state[S_NZ] = nz
    state[S_L] = l
    state[S_R] = r
    state[S_D] = d


@njit(cache=True, nogil=True)
def renewal_chunk(bits, zlist, zpos, state, u, eta, beta, t0, taus, values, nren,
                  stats, upstep, steps_by_d, hits_by_d):
    """Advance the chain and record renewal times with diagnostics.

    A renewal happens at ``t`` when the chosen site lies in the end set or
    the span flips.  For each renewal ``t > 0`` the time goes to
    ``taus[nren[0]]`` and ``M_t`` to ``values[nren[0]]``.
    ``stats`` = [constancy violations, entry jumps, flips].  ``upstep`` =
    [max M increment over steps with M_t > 0, max increment overall].
    """
    n = bits.shape[0]
    nz = state[S_NZ]
    l = state[S_L]
    r = state[S_R]
    d = state[S_D]
    m_cur = potential_of(bits, l, r, d, nz, beta)
    for s in range(u.shape[0]):
        t = t0 + s
        i = choose_site(zlist, nz, n, u[s])
        hit = in_end_set(i, l, d, n)
        if d < steps_by_d.shape[0]:
            steps_by_d[d] += 1
            if hit:
                hits_by_d[d] += 1
        nz = apply_move(bits, zlist, zpos, nz, i, eta[s, 0], eta[s, 1], eta[s, 2])
        nl, nr, nd, _ = span_of(bits, l, r, d > 0)
        flip = nd > 0 and d > 0 and nl != l and nr != r
        if flip:
            stats[2] += 1
        m_new = potential_of(bits, nl, nr, nd, nz, beta)
        dm = m_new - m_cur
        if dm > upstep[1]:
            upstep[1] = dm
        if m_cur > 0.0 and dm > upstep[0]:
            upstep[0] = dm
        if m_cur == 0.0 and dm > 2.0:
            stats[1] += 1
        if hit or flip:
            if t > 0:
                taus[nren[0]] = t
                values[nren[0]] = m_cur
                nren[0] += 1
        elif m_new != m_cur:
            stats[0] += 1
        l = nl
        r = nr
        d = nd
        m_cur = m_new
    state[S_NZ] = nz
    state[S_L] = l
    state[S_R] = r
    state[S_D] = d


@njit(cache=True, nogil=True)
def reflected_walk(y0, increments, out):
    """``out[t] = Y_{t+1}`` for ``Y_{t+1} = max(Y_t + increments[t], 0)``."""
    y = y0
    for t in range(increments.shape[0]):
        y = y + increments[t]
        if y < 0.0:
            y = 0.0
        out[t] = y
    return y

"""Compiled inner loop of the compound-Poisson path simulator.

Every path is a pure function of its counter: path ``p`` reads draw ``j``
from ``philox(p, j, slot, 0)`` under the run key, with slot 0 for the
waiting time, jump length and direction, slot 1 for Gaussian increments
and slot 2 for thinning. Results therefore do not depend on batching.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

from .rng import philox4x64, u01

_TWO_PI = 2.0 * math.pi


@nb.njit(cache=True)
def radius_from_uniform(U, kind, params, log_u, log_S, p_tail, R0, tail_rate):
    """Jump length from one uniform: tail component first, then the body."""
    if p_tail > 0.0:
        if U < p_tail:
            return R0 - math.log(U / p_tail) / tail_rate
        U = (U - p_tail) / (1.0 - p_tail)
    if kind == 0:
        alpha = params[0]
        return (alpha * U * params[2] + params[1]) ** (-1.0 / alpha)
    # tabulated: find j with log_S[j] >= ln U > log_S[j + 1]
    lU = math.log(U)
    n = log_S.shape[0]
    if lU >= log_S[0]:
        return math.exp(log_u[0])
    if lU < log_S[n - 1]:
        if R0 < np.inf:
            u_last = math.exp(log_u[n - 1])
            return R0 - (R0 - u_last) * U / math.exp(log_S[n - 1])
        return math.exp(log_u[n - 1] + (log_S[n - 1] - lU) / params[0])
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if log_S[mid] >= lU:
            lo = mid
        else:
            hi = mid
    w = (log_S[lo] - lU) / (log_S[lo] - log_S[hi])
    return math.exp(log_u[lo] + w * (log_u[hi] - log_u[lo]))


@nb.njit(cache=True)
def direction_from_uniforms(U1, U2, d, out):
    """Uniform direction on the unit sphere of ``R^d`` written into ``out``."""
    if d == 1:
        out[0] = 1.0 if U1 < 0.5 else -1.0
    elif d == 2:
        th = _TWO_PI * U1
        out[0] = math.cos(th)
        out[1] = math.sin(th)
    else:
        z = 2.0 * U1 - 1.0
        s = math.sqrt(max(0.0, 1.0 - z * z))
        ph = _TWO_PI * U2
        out[0] = s * math.cos(ph)
        out[1] = s * math.sin(ph)
        out[2] = z


@nb.njit(cache=True)
def _dist(x, c, d):
    s = 0.0
    for i in range(d):
        t = x[i] - c[i]
        s += t * t
    return math.sqrt(s)


@nb.njit(cache=True)
def _table_value(x, c, d, kind, lo, hi, tab):
    s = _dist(x, c, d) if kind == 0 else x[0]
    n = tab.shape[0]
    pos = (s - lo) / (hi - lo) * (n - 1)
    if pos <= 0.0:
        return tab[0]
    if pos >= n - 1:
        return tab[n - 1]
    i = int(pos)
    w = pos - i
    return tab[i] * (1.0 - w) + tab[i + 1] * w


@nb.njit(cache=True)
def run_paths(starts, center, radius, t_stop, path_ids, k0, k1, rate,
              kind, params, log_u, log_S, p_tail, R0, tail_rate,
              gauss_sd, thin_c0, thin_omega, project,
              g_kind, g_lo, g_hi, g_tab, max_events):
    """Simulate each start until it leaves the open ball or ``t_stop`` elapses.

    Returns exit positions, exit times, jump counts, censoring flags and the
    time integrals ``int_0^{tau ^ t} g_m(X_u) du`` of the tabulated functions.
    """
    n, d = starts.shape
    pos = np.empty((n, d))
    times = np.empty(n)
    jumps = np.zeros(n, dtype=np.int64)
    censored = np.zeros(n, dtype=np.bool_)
    m = g_tab.shape[0]
    integrals = np.zeros((n, m))
    x = np.empty(d)
    h = np.empty(d)
    zero = np.uint64(0)
    one = np.uint64(1)
    two = np.uint64(2)
    thinning = thin_c0 > 1.0
    prop_rate = rate * thin_c0 if thinning else rate
    for p in range(n):
        for i in range(d):
            x[i] = starts[p, i]
        t = 0.0
        nj = 0
        pid = np.uint64(path_ids[p])
        exited = _dist(x, center, d) >= radius
        cens = False
        j = 0
        while not exited:
            if j >= max_events:
                cens = True
                break
            cj = np.uint64(j)
            r0, r1, r2, r3 = philox4x64(pid, cj, zero, zero, k0, k1)
            w = -math.log(u01(r0)) / prop_rate
            dt = w
            if t + w >= t_stop:
                dt = t_stop - t
            for q in range(m):
                integrals[p, q] += dt * _table_value(x, center, d, g_kind[q], g_lo[q], g_hi[q], g_tab[q])
            if t + w >= t_stop:
                t = t_stop
                cens = True
                break
            t += w
            if gauss_sd > 0.0:
                a0, a1, a2, a3 = philox4x64(pid, cj, one, zero, k0, k1)
                sc = gauss_sd * math.sqrt(w)
                rad1 = math.sqrt(-2.0 * math.log(u01(a0)))
                rad2 = math.sqrt(-2.0 * math.log(u01(a2)))
                g0 = rad1 * math.cos(_TWO_PI * u01(a1))
                g1 = rad1 * math.sin(_TWO_PI * u01(a1))
                g2 = rad2 * math.cos(_TWO_PI * u01(a3))
                x[0] += sc * g0
                if d > 1:
                    x[1] += sc * g1
                if d > 2:
                    x[2] += sc * g2
                if _dist(x, center, d) >= radius:
                    exited = True
                    break
            j += 1
            if thinning:
                b0, b1, b2, b3 = philox4x64(pid, cj, two, zero, k0, k1)
                accept = thin_c0 ** math.sin(thin_omega * x[0]) / thin_c0
                if u01(b0) >= accept:
                    continue
            rho = radius_from_uniform(u01(r1), kind, params, log_u, log_S, p_tail, R0, tail_rate)
            direction_from_uniforms(u01(r2), u01(r3), d, h)
            for i in range(d):
                x[i] += rho * h[i]
            nj += 1
            if _dist(x, center, d) >= radius:
                exited = True
        if exited and project and t > 0.0:
            dist = _dist(x, center, d)
            for i in range(d):
                x[i] = center[i] + (x[i] - center[i]) * (radius / dist)
        for i in range(d):
            pos[p, i] = x[i]
        times[p] = t
        jumps[p] = nj
        censored[p] = cens
    return pos, times, jumps, censored, integrals

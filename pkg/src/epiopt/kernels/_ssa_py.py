"""Pure-Python SSA kernels (fallback backend).

The compiled backend ``_ssa_cy`` mirrors these routines statement for
statement.  Both consume raw 64-bit words from a numpy ``BitGenerator``
and turn them into doubles the same way, so the two backends produce
bit-identical trajectories, objectives, and event lists.

State layout: (S_a, S_c, I_a, I_c, R_a, R_c) as integer agent counts.
Reaction channels:

  0  S_a + I_a -> 2 I_a     rate (r_aa/N)(1-u_w)^2 * S_a * I_a
  1  S_a + I_c -> I_a + I_c rate (r_ac/N)(1-u_w/2)(1-u_s/2) * S_a * I_c
  2  S_c + I_c -> 2 I_c     rate (r_cc/N)(1-u_s)^2 * S_c * I_c
  3  S_c + I_a -> I_c + I_a rate (r_ac/N)(1-u_w/2)(1-u_s/2) * S_c * I_a
  4  I_a -> R_a             rate r_a * I_a
  5  I_c -> R_c             rate r_c * I_c
  6  R_a -> S_a             rate mu * r_a * R_a
  7  R_c -> S_c             rate mu * r_c * R_c

``coef`` holds the control-modulated per-interval coefficients
(k_aa, k_cc, k_ac), each already divided by N.  Waiting times that cross
a control-grid boundary are discarded and redrawn under the new controls,
which is exact for piecewise-constant propensities.
"""
from __future__ import annotations

import math

_INV53 = 1.0 / 9007199254740992.0  # 2**-53
_BLOCK = 1024


class _RawDraws:
    """Buffered uniform [0,1) draws from raw 64-bit generator words."""

    __slots__ = ("_bg", "_buf", "_pos")

    def __init__(self, bitgen):
        self._bg = bitgen
        self._buf = None
        self._pos = 0

    def uniform(self) -> float:
        buf = self._buf
        if buf is None or self._pos >= buf.shape[0]:
            buf = self._bg.random_raw(_BLOCK)
            self._buf = buf
            self._pos = 0
        v = int(buf[self._pos])
        self._pos += 1
        return (v >> 11) * _INV53


def ssa_objective(state0, grid, coef, r_a, r_c, mu, n_agents, i_max, bitgen):
    """Simulate one path and accumulate the health-cost integral on the fly.

    Returns (c_h, n_events, final_state_tuple).  The integrand
    I/N + exp(10 (I - I_max)/N) is constant between events, so the
    integral is exact.
    """
    draws = _RawDraws(bitgen)
    s_a = int(state0[0])
    s_c = int(state0[1])
    i_a = int(state0[2])
    i_c = int(state0[3])
    rr_a = int(state0[4])
    rr_c = int(state0[5])

    m = len(grid) - 1
    seg = 0
    kaa = float(coef[0][0])
    kcc = float(coef[0][1])
    kac = float(coef[0][2])
    mra = mu * r_a
    mrc = mu * r_c
    nd = float(n_agents)

    t = 0.0
    ch = 0.0
    events = 0
    itot = float(i_a + i_c)
    g = itot / nd + math.exp(10.0 * (itot - i_max) / nd)

    while seg < m:
        seg_end = float(grid[seg + 1])
        p0 = kaa * s_a * i_a
        p1 = kac * s_a * i_c
        p2 = kcc * s_c * i_c
        p3 = kac * s_c * i_a
        p4 = r_a * i_a
        p5 = r_c * i_c
        p6 = mra * rr_a
        p7 = mrc * rr_c
        a0 = p0 + p1 + p2 + p3 + p4 + p5 + p6 + p7
        if a0 <= 0.0:
            ch += g * (seg_end - t)
            t = seg_end
            seg += 1
            if seg < m:
                kaa = float(coef[seg][0])
                kcc = float(coef[seg][1])
                kac = float(coef[seg][2])
            continue
        tau = -math.log(1.0 - draws.uniform()) / a0
        t_next = t + tau
        if t_next >= seg_end:
            ch += g * (seg_end - t)
            t = seg_end
            seg += 1
            if seg < m:
                kaa = float(coef[seg][0])
                kcc = float(coef[seg][1])
                kac = float(coef[seg][2])
            continue
        ch += g * (t_next - t)
        t = t_next
        r2 = draws.uniform() * a0
        acc = p0
        if r2 < acc:
            s_a -= 1
            i_a += 1
        else:
            acc += p1
            if r2 < acc:
                s_a -= 1
                i_a += 1
            else:
                acc += p2
                if r2 < acc:
                    s_c -= 1
                    i_c += 1
                else:
                    acc += p3
                    if r2 < acc:
                        s_c -= 1
                        i_c += 1
                    else:
                        acc += p4
                        if r2 < acc:
                            i_a -= 1
                            rr_a += 1
                        else:
                            acc += p5
                            if r2 < acc:
                                i_c -= 1
                                rr_c += 1
                            else:
                                acc += p6
                                if r2 < acc:
                                    rr_a -= 1
                                    s_a += 1
                                else:
                                    rr_c -= 1
                                    s_c += 1
        events += 1
        itot = float(i_a + i_c)
        g = itot / nd + math.exp(10.0 * (itot - i_max) / nd)

    return ch, events, (s_a, s_c, i_a, i_c, rr_a, rr_c)


def ssa_events(state0, grid, coef, r_a, r_c, mu, bitgen, times, chans, states):
    """Simulate one path recording every reaction event.

    Fills ``times`` (float64), ``chans`` (int8), ``states`` (int64, shape
    (cap, 6)) and returns the number of events, or -1 if capacity was
    exhausted (caller re-runs with a larger buffer; paths are
    deterministic given the bit generator's key).
    """
    draws = _RawDraws(bitgen)
    s_a = int(state0[0])
    s_c = int(state0[1])
    i_a = int(state0[2])
    i_c = int(state0[3])
    rr_a = int(state0[4])
    rr_c = int(state0[5])

    m = len(grid) - 1
    cap = times.shape[0]
    seg = 0
    kaa = float(coef[0][0])
    kcc = float(coef[0][1])
    kac = float(coef[0][2])
    mra = mu * r_a
    mrc = mu * r_c

    t = 0.0
    events = 0

    while seg < m:
        seg_end = float(grid[seg + 1])
        p0 = kaa * s_a * i_a
        p1 = kac * s_a * i_c
        p2 = kcc * s_c * i_c
        p3 = kac * s_c * i_a
        p4 = r_a * i_a
        p5 = r_c * i_c
        p6 = mra * rr_a
        p7 = mrc * rr_c
        a0 = p0 + p1 + p2 + p3 + p4 + p5 + p6 + p7
        if a0 <= 0.0:
            t = seg_end
            seg += 1
            if seg < m:
                kaa = float(coef[seg][0])
                kcc = float(coef[seg][1])
                kac = float(coef[seg][2])
            continue
        tau = -math.log(1.0 - draws.uniform()) / a0
        t_next = t + tau
        if t_next >= seg_end:
            t = seg_end
            seg += 1
            if seg < m:
                kaa = float(coef[seg][0])
                kcc = float(coef[seg][1])
                kac = float(coef[seg][2])
            continue
        t = t_next
        r2 = draws.uniform() * a0
        acc = p0
        if r2 < acc:
            channel = 0
            s_a -= 1
            i_a += 1
        else:
            acc += p1
            if r2 < acc:
                channel = 1
                s_a -= 1
                i_a += 1
            else:
                acc += p2
                if r2 < acc:
                    channel = 2
                    s_c -= 1
                    i_c += 1
                else:
                    acc += p3
                    if r2 < acc:
                        channel = 3
                        s_c -= 1
                        i_c += 1
                    else:
                        acc += p4
                        if r2 < acc:
                            channel = 4
                            i_a -= 1
                            rr_a += 1
                        else:
                            acc += p5
                            if r2 < acc:
                                channel = 5
                                i_c -= 1
                                rr_c += 1
                            else:
                                acc += p6
                                if r2 < acc:
                                    channel = 6
                                    rr_a -= 1
                                    s_a += 1
                                else:
                                    channel = 7
                                    rr_c -= 1
                                    s_c += 1
        if events >= cap:
            return -1
        times[events] = t
        chans[events] = channel
        states[events, 0] = s_a
        states[events, 1] = s_c
        states[events, 2] = i_a
        states[events, 3] = i_c
        states[events, 4] = rr_a
        states[events, 5] = rr_c
        events += 1

    return events

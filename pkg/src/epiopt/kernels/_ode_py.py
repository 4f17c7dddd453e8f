"""Pure-Python RK4 forward / adjoint kernels (fallback backend).

Mirrored statement for statement by the compiled ``_ode_cy``; both must
produce bit-identical arrays.

State layout y = (S_a, S_c, I_a, I_c) as population fractions; recovered
compartments are redundant and omitted.  ``eff`` holds one row of
control-modulated rates (R_aa, R_cc, R_ac, r_a, r_c) per control
interval, and ``seg_of_step[j]`` maps integration step j (covering
[t_j, t_{j+1}]) to its control interval.
"""
from __future__ import annotations

import math

import numpy as np


def rk4_forward(y0, dt, seg_of_step, eff):
    """Classical 4th-order one-step integration on a uniform grid.

    Returns an array of shape (n_steps+1, 4) with the trajectory.
    """
    n_steps = seg_of_step.shape[0]
    out = np.empty((n_steps + 1, 4), dtype=np.float64)
    sa = float(y0[0])
    sc = float(y0[1])
    ia = float(y0[2])
    ic = float(y0[3])
    out[0, 0] = sa
    out[0, 1] = sc
    out[0, 2] = ia
    out[0, 3] = ic
    half = 0.5 * dt
    dt6 = dt / 6.0

    for j in range(n_steps):
        s = int(seg_of_step[j])
        raa = float(eff[s][0])
        rcc = float(eff[s][1])
        rac = float(eff[s][2])
        ra = float(eff[s][3])
        rc = float(eff[s][4])

        la = raa * ia + rac * ic
        lc = rcc * ic + rac * ia
        k1_0 = -(sa * la)
        k1_1 = -(sc * lc)
        k1_2 = sa * la - ra * ia
        k1_3 = sc * lc - rc * ic

        y0_ = sa + half * k1_0
        y1_ = sc + half * k1_1
        y2_ = ia + half * k1_2
        y3_ = ic + half * k1_3
        la = raa * y2_ + rac * y3_
        lc = rcc * y3_ + rac * y2_
        k2_0 = -(y0_ * la)
        k2_1 = -(y1_ * lc)
        k2_2 = y0_ * la - ra * y2_
        k2_3 = y1_ * lc - rc * y3_

        y0_ = sa + half * k2_0
        y1_ = sc + half * k2_1
        y2_ = ia + half * k2_2
        y3_ = ic + half * k2_3
        la = raa * y2_ + rac * y3_
        lc = rcc * y3_ + rac * y2_
        k3_0 = -(y0_ * la)
        k3_1 = -(y1_ * lc)
        k3_2 = y0_ * la - ra * y2_
        k3_3 = y1_ * lc - rc * y3_

        y0_ = sa + dt * k3_0
        y1_ = sc + dt * k3_1
        y2_ = ia + dt * k3_2
        y3_ = ic + dt * k3_3
        la = raa * y2_ + rac * y3_
        lc = rcc * y3_ + rac * y2_
        k4_0 = -(y0_ * la)
        k4_1 = -(y1_ * lc)
        k4_2 = y0_ * la - ra * y2_
        k4_3 = y1_ * lc - rc * y3_

        sa = sa + dt6 * (k1_0 + 2.0 * k2_0 + 2.0 * k3_0 + k4_0)
        sc = sc + dt6 * (k1_1 + 2.0 * k2_1 + 2.0 * k3_1 + k4_1)
        ia = ia + dt6 * (k1_2 + 2.0 * k2_2 + 2.0 * k3_2 + k4_2)
        ic = ic + dt6 * (k1_3 + 2.0 * k2_3 + 2.0 * k3_3 + k4_3)
        out[j + 1, 0] = sa
        out[j + 1, 1] = sc
        out[j + 1, 2] = ia
        out[j + 1, 3] = ic

    return out


def rk4_adjoint(traj, dt, seg_of_step, eff, i_max_frac):
    """Integrate the adjoint terminal-value problem backwards over ``traj``.

    Solves -lambda' = f_y(y,u)^T lambda + g'(y)^T with lambda(T)=0, where
    g(y) = I + exp(10 (I - i_max_frac)) is the health-cost integrand.
    Stage states between stored nodes come from the cubic Hermite
    interpolant, keeping the scheme 4th order.  Returns lambda at every
    node, shape (n_steps+1, 4).
    """
    n_steps = seg_of_step.shape[0]
    lam = np.empty((n_steps + 1, 4), dtype=np.float64)
    l0 = 0.0
    l1 = 0.0
    l2 = 0.0
    l3 = 0.0
    lam[n_steps, 0] = l0
    lam[n_steps, 1] = l1
    lam[n_steps, 2] = l2
    lam[n_steps, 3] = l3
    h = -dt
    h2 = 0.5 * h
    h6 = h / 6.0
    dt8 = dt / 8.0

    for j in range(n_steps - 1, -1, -1):
        s = int(seg_of_step[j])
        raa = float(eff[s][0])
        rcc = float(eff[s][1])
        rac = float(eff[s][2])
        ra = float(eff[s][3])
        rc = float(eff[s][4])

        ya0 = float(traj[j][0])
        ya1 = float(traj[j][1])
        ya2 = float(traj[j][2])
        ya3 = float(traj[j][3])
        yb0 = float(traj[j + 1][0])
        yb1 = float(traj[j + 1][1])
        yb2 = float(traj[j + 1][2])
        yb3 = float(traj[j + 1][3])

        la = raa * ya2 + rac * ya3
        lc = rcc * ya3 + rac * ya2
        fa0 = -(ya0 * la)
        fa1 = -(ya1 * lc)
        fa2 = ya0 * la - ra * ya2
        fa3 = ya1 * lc - rc * ya3
        la = raa * yb2 + rac * yb3
        lc = rcc * yb3 + rac * yb2
        fb0 = -(yb0 * la)
        fb1 = -(yb1 * lc)
        fb2 = yb0 * la - ra * yb2
        fb3 = yb1 * lc - rc * yb3

        ym0 = 0.5 * (ya0 + yb0) + dt8 * (fa0 - fb0)
        ym1 = 0.5 * (ya1 + yb1) + dt8 * (fa1 - fb1)
        ym2 = 0.5 * (ya2 + yb2) + dt8 * (fa2 - fb2)
        ym3 = 0.5 * (ya3 + yb3) + dt8 * (fa3 - fb3)

        # k1 at t_{j+1} with lambda = (l0..l3)
        la = raa * yb2 + rac * yb3
        lc = rcc * yb3 + rac * yb2
        c = 1.0 + 10.0 * math.exp(10.0 * (yb2 + yb3 - i_max_frac))
        d20 = l2 - l0
        d31 = l3 - l1
        k1_0 = -(la * d20)
        k1_1 = -(lc * d31)
        k1_2 = -(yb0 * raa * d20 + yb1 * rac * d31 - ra * l2 + c)
        k1_3 = -(yb0 * rac * d20 + yb1 * rcc * d31 - rc * l3 + c)

        # k2, k3 at the Hermite midpoint
        la = raa * ym2 + rac * ym3
        lc = rcc * ym3 + rac * ym2
        c = 1.0 + 10.0 * math.exp(10.0 * (ym2 + ym3 - i_max_frac))
        w0 = l0 + h2 * k1_0
        w1 = l1 + h2 * k1_1
        w2 = l2 + h2 * k1_2
        w3 = l3 + h2 * k1_3
        d20 = w2 - w0
        d31 = w3 - w1
        k2_0 = -(la * d20)
        k2_1 = -(lc * d31)
        k2_2 = -(ym0 * raa * d20 + ym1 * rac * d31 - ra * w2 + c)
        k2_3 = -(ym0 * rac * d20 + ym1 * rcc * d31 - rc * w3 + c)

        w0 = l0 + h2 * k2_0
        w1 = l1 + h2 * k2_1
        w2 = l2 + h2 * k2_2
        w3 = l3 + h2 * k2_3
        d20 = w2 - w0
        d31 = w3 - w1
        k3_0 = -(la * d20)
        k3_1 = -(lc * d31)
        k3_2 = -(ym0 * raa * d20 + ym1 * rac * d31 - ra * w2 + c)
        k3_3 = -(ym0 * rac * d20 + ym1 * rcc * d31 - rc * w3 + c)

        # k4 at t_j
        la = raa * ya2 + rac * ya3
        lc = rcc * ya3 + rac * ya2
        c = 1.0 + 10.0 * math.exp(10.0 * (ya2 + ya3 - i_max_frac))
        w0 = l0 + h * k3_0
        w1 = l1 + h * k3_1
        w2 = l2 + h * k3_2
        w3 = l3 + h * k3_3
        d20 = w2 - w0
        d31 = w3 - w1
        k4_0 = -(la * d20)
        k4_1 = -(lc * d31)
        k4_2 = -(ya0 * raa * d20 + ya1 * rac * d31 - ra * w2 + c)
        k4_3 = -(ya0 * rac * d20 + ya1 * rcc * d31 - rc * w3 + c)

        l0 = l0 + h6 * (k1_0 + 2.0 * k2_0 + 2.0 * k3_0 + k4_0)
        l1 = l1 + h6 * (k1_1 + 2.0 * k2_1 + 2.0 * k3_1 + k4_1)
        l2 = l2 + h6 * (k1_2 + 2.0 * k2_2 + 2.0 * k3_2 + k4_2)
        l3 = l3 + h6 * (k1_3 + 2.0 * k2_3 + 2.0 * k3_3 + k4_3)
        lam[j, 0] = l0
        lam[j, 1] = l1
        lam[j, 2] = l2
        lam[j, 3] = l3

    return lam

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 forward / adjoint kernels; twin of ``_ode_py``."""
from libc.math cimport exp

import numpy as np


def rk4_forward(y0, double dt, seg_of_step, eff):
    """See ``_ode_py.rk4_forward``."""
    cdef const long[::1] seg_v = np.ascontiguousarray(seg_of_step, dtype=np.int_)
    cdef const double[:, ::1] eff_v = np.ascontiguousarray(eff, dtype=np.float64)
    cdef Py_ssize_t n_steps = seg_v.shape[0]
    out_arr = np.empty((n_steps + 1, 4), dtype=np.float64)
    cdef double[:, ::1] out = out_arr

    cdef double sa = y0[0]
    cdef double sc = y0[1]
    cdef double ia = y0[2]
    cdef double ic = y0[3]
    out[0, 0] = sa
    out[0, 1] = sc
    out[0, 2] = ia
    out[0, 3] = ic
    cdef double half = 0.5 * dt
    cdef double dt6 = dt / 6.0

    cdef Py_ssize_t j, s
    cdef double raa, rcc, rac, ra, rc, la, lc
    cdef double k1_0, k1_1, k1_2, k1_3, k2_0, k2_1, k2_2, k2_3
    cdef double k3_0, k3_1, k3_2, k3_3, k4_0, k4_1, k4_2, k4_3
    cdef double y0_, y1_, y2_, y3_

    with nogil:
        for j in range(n_steps):
            s = seg_v[j]
            raa = eff_v[s, 0]
            rcc = eff_v[s, 1]
            rac = eff_v[s, 2]
            ra = eff_v[s, 3]
            rc = eff_v[s, 4]

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

    return out_arr


def rk4_adjoint(traj, double dt, seg_of_step, eff, double i_max_frac):
    """See ``_ode_py.rk4_adjoint``."""
    cdef const double[:, ::1] traj_v = np.ascontiguousarray(traj, dtype=np.float64)
    cdef const long[::1] seg_v = np.ascontiguousarray(seg_of_step, dtype=np.int_)
    cdef const double[:, ::1] eff_v = np.ascontiguousarray(eff, dtype=np.float64)
    cdef Py_ssize_t n_steps = seg_v.shape[0]
    lam_arr = np.empty((n_steps + 1, 4), dtype=np.float64)
    cdef double[:, ::1] lam = lam_arr

    cdef double l0 = 0.0
    cdef double l1 = 0.0
    cdef double l2 = 0.0
    cdef double l3 = 0.0
    lam[n_steps, 0] = l0
    lam[n_steps, 1] = l1
    lam[n_steps, 2] = l2
    lam[n_steps, 3] = l3
    cdef double h = -dt
    cdef double h2 = 0.5 * h
    cdef double h6 = h / 6.0
    cdef double dt8 = dt / 8.0

    cdef Py_ssize_t j, s
    cdef double raa, rcc, rac, ra, rc, la, lc, c
    cdef double ya0, ya1, ya2, ya3, yb0, yb1, yb2, yb3
    cdef double fa0, fa1, fa2, fa3, fb0, fb1, fb2, fb3
    cdef double ym0, ym1, ym2, ym3
    cdef double k1_0, k1_1, k1_2, k1_3, k2_0, k2_1, k2_2, k2_3
    cdef double k3_0, k3_1, k3_2, k3_3, k4_0, k4_1, k4_2, k4_3
    cdef double w0, w1, w2, w3, d20, d31

    with nogil:
        for j in range(n_steps - 1, -1, -1):
            s = seg_v[j]
            raa = eff_v[s, 0]
            rcc = eff_v[s, 1]
            rac = eff_v[s, 2]
            ra = eff_v[s, 3]
            rc = eff_v[s, 4]

            ya0 = traj_v[j, 0]
            ya1 = traj_v[j, 1]
            ya2 = traj_v[j, 2]
            ya3 = traj_v[j, 3]
            yb0 = traj_v[j + 1, 0]
            yb1 = traj_v[j + 1, 1]
            yb2 = traj_v[j + 1, 2]
            yb3 = traj_v[j + 1, 3]

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

            la = raa * yb2 + rac * yb3
            lc = rcc * yb3 + rac * yb2
            c = 1.0 + 10.0 * exp(10.0 * (yb2 + yb3 - i_max_frac))
            d20 = l2 - l0
            d31 = l3 - l1
            k1_0 = -(la * d20)
            k1_1 = -(lc * d31)
            k1_2 = -(yb0 * raa * d20 + yb1 * rac * d31 - ra * l2 + c)
            k1_3 = -(yb0 * rac * d20 + yb1 * rcc * d31 - rc * l3 + c)

            la = raa * ym2 + rac * ym3
            lc = rcc * ym3 + rac * ym2
            c = 1.0 + 10.0 * exp(10.0 * (ym2 + ym3 - i_max_frac))
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

            la = raa * ya2 + rac * ya3
            lc = rcc * ya3 + rac * ya2
            c = 1.0 + 10.0 * exp(10.0 * (ya2 + ya3 - i_max_frac))
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

    return lam_arr

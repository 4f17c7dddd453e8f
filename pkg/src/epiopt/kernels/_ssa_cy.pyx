# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled SSA kernels; statement-for-statement twin of ``_ssa_py``.

Draws raw 64-bit words straight from the numpy bit generator's C
interface, so results are bit-identical with the pure-Python backend.
"""
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport exp, log
from numpy.random cimport bitgen_t

import numpy as np


cdef double _INV53 = 1.0 / 9007199254740992.0

cdef const char *_CAPSULE_NAME = "BitGenerator"


cdef inline double _uniform(bitgen_t *rng) noexcept nogil:
    return <double> (rng.next_uint64(rng.state) >> 11) * _INV53


def ssa_objective(state0, grid, coef, double r_a, double r_c, double mu,
                  double n_agents, double i_max, bitgen):
    """See ``_ssa_py.ssa_objective``."""
    cdef long s_a = state0[0]
    cdef long s_c = state0[1]
    cdef long i_a = state0[2]
    cdef long i_c = state0[3]
    cdef long rr_a = state0[4]
    cdef long rr_c = state0[5]

    cdef const double[::1] grid_v = np.ascontiguousarray(grid, dtype=np.float64)
    cdef const double[:, ::1] coef_v = np.ascontiguousarray(coef, dtype=np.float64)
    cdef Py_ssize_t m = grid_v.shape[0] - 1
    cdef Py_ssize_t seg = 0
    cdef double kaa = coef_v[0, 0]
    cdef double kcc = coef_v[0, 1]
    cdef double kac = coef_v[0, 2]
    cdef double mra = mu * r_a
    cdef double mrc = mu * r_c
    cdef double nd = n_agents

    capsule = bitgen.capsule
    if not PyCapsule_IsValid(capsule, _CAPSULE_NAME):
        raise ValueError("invalid BitGenerator capsule")
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(capsule, _CAPSULE_NAME)

    cdef double t = 0.0
    cdef double ch = 0.0
    cdef long events = 0
    cdef double itot = <double> (i_a + i_c)
    cdef double g = itot / nd + exp(10.0 * (itot - i_max) / nd)
    cdef double seg_end, p0, p1, p2, p3, p4, p5, p6, p7, a0, tau, t_next, r2, acc

    with bitgen.lock, nogil:
        while seg < m:
            seg_end = grid_v[seg + 1]
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
                    kaa = coef_v[seg, 0]
                    kcc = coef_v[seg, 1]
                    kac = coef_v[seg, 2]
                continue
            tau = -log(1.0 - _uniform(rng)) / a0
            t_next = t + tau
            if t_next >= seg_end:
                ch += g * (seg_end - t)
                t = seg_end
                seg += 1
                if seg < m:
                    kaa = coef_v[seg, 0]
                    kcc = coef_v[seg, 1]
                    kac = coef_v[seg, 2]
                continue
            ch += g * (t_next - t)
            t = t_next
            r2 = _uniform(rng) * a0
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
            itot = <double> (i_a + i_c)
            g = itot / nd + exp(10.0 * (itot - i_max) / nd)

    return ch, events, (s_a, s_c, i_a, i_c, rr_a, rr_c)


def ssa_events(state0, grid, coef, double r_a, double r_c, double mu, bitgen,
               times, chans, states):
    """See ``_ssa_py.ssa_events``."""
    cdef long s_a = state0[0]
    cdef long s_c = state0[1]
    cdef long i_a = state0[2]
    cdef long i_c = state0[3]
    cdef long rr_a = state0[4]
    cdef long rr_c = state0[5]

    cdef const double[::1] grid_v = np.ascontiguousarray(grid, dtype=np.float64)
    cdef const double[:, ::1] coef_v = np.ascontiguousarray(coef, dtype=np.float64)
    cdef double[::1] times_v = times
    cdef signed char[::1] chans_v = chans
    cdef long long[:, ::1] states_v = states

    cdef Py_ssize_t m = grid_v.shape[0] - 1
    cdef Py_ssize_t cap = times_v.shape[0]
    cdef Py_ssize_t seg = 0
    cdef double kaa = coef_v[0, 0]
    cdef double kcc = coef_v[0, 1]
    cdef double kac = coef_v[0, 2]
    cdef double mra = mu * r_a
    cdef double mrc = mu * r_c

    capsule = bitgen.capsule
    if not PyCapsule_IsValid(capsule, _CAPSULE_NAME):
        raise ValueError("invalid BitGenerator capsule")
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(capsule, _CAPSULE_NAME)

    cdef double t = 0.0
    cdef Py_ssize_t events = 0
    cdef signed char channel
    cdef double seg_end, p0, p1, p2, p3, p4, p5, p6, p7, a0, tau, t_next, r2, acc
    cdef bint overflow = 0

    with bitgen.lock, nogil:
        while seg < m:
            seg_end = grid_v[seg + 1]
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
                    kaa = coef_v[seg, 0]
                    kcc = coef_v[seg, 1]
                    kac = coef_v[seg, 2]
                continue
            tau = -log(1.0 - _uniform(rng)) / a0
            t_next = t + tau
            if t_next >= seg_end:
                t = seg_end
                seg += 1
                if seg < m:
                    kaa = coef_v[seg, 0]
                    kcc = coef_v[seg, 1]
                    kac = coef_v[seg, 2]
                continue
            t = t_next
            r2 = _uniform(rng) * a0
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
                overflow = 1
                break
            times_v[events] = t
            chans_v[events] = channel
            states_v[events, 0] = s_a
            states_v[events, 1] = s_c
            states_v[events, 2] = i_a
            states_v[events, 3] = i_c
            states_v[events, 4] = rr_a
            states_v[events, 5] = rr_c
            events += 1

    if overflow:
        return -1
    return events

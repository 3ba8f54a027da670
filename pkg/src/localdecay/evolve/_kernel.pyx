# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 time stepper for phi_tt = phi_xx - V phi on a uniform grid.

Space: SBP(4,2) second-derivative operator with 4-row boundary closures,
simultaneous-approximation terms for outflow (phi_t -+ phi_x = 0) or
reflecting (phi_x = 0) ends, or parity ghosts at a regular centre on a
staggered grid. Time: classical 4-stage Runge-Kutta.

Mirrors ``_fallback.run`` exactly; see that module for the argument list.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()

# boundary closure rows of h^2 D2 and weights of H, S (left end)
cdef double R0[4]
cdef double R1[3]
cdef double R2[5]
cdef double R3[6]
R0[:] = [2.0, -5.0, 4.0, -1.0]
R1[:] = [1.0, -2.0, 1.0]
R2[:] = [-4.0 / 43.0, 59.0 / 43.0, -110.0 / 43.0, 59.0 / 43.0, -4.0 / 43.0]
R3[:] = [-1.0 / 49.0, 0.0, 59.0 / 49.0, -118.0 / 49.0, 64.0 / 49.0, -4.0 / 49.0]
cdef double H0 = 17.0 / 48.0
cdef double S0[4]
S0[:] = [-11.0 / 6.0, 3.0, -1.5, 1.0 / 3.0]


cdef inline double _sbp_left(const double* p, Py_ssize_t i) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t k
    if i == 0:
        for k in range(4):
            acc += R0[k] * p[k]
    elif i == 1:
        for k in range(3):
            acc += R1[k] * p[k]
    elif i == 2:
        for k in range(5):
            acc += R2[k] * p[k]
    else:
        for k in range(6):
            acc += R3[k] * p[k]
    return acc


cdef inline double _sbp_right(const double* p, Py_ssize_t n, Py_ssize_t i) noexcept nogil:
    # mirror image of the left closure; i counts from the right end (0 = last)
    cdef double acc = 0.0
    cdef Py_ssize_t k
    cdef Py_ssize_t e = n - 1
    if i == 0:
        for k in range(4):
            acc += R0[k] * p[e - k]
    elif i == 1:
        for k in range(3):
            acc += R1[k] * p[e - k]
    elif i == 2:
        for k in range(5):
            acc += R2[k] * p[e - k]
    else:
        for k in range(6):
            acc += R3[k] * p[e - k]
    return acc


cdef void _rhs(const double* p, const double* q, const double* V, double* out,
               Py_ssize_t n, double h, int left_mode, int right_mode,
               double parity) noexcept nogil:
    """out = D2 p - V p + boundary terms (q is the stage time derivative)."""
    cdef double ih2 = 1.0 / (h * h)
    cdef double c12 = ih2 / 12.0
    cdef Py_ssize_t i
    cdef double sl, sr
    for i in range(4, n - 4):
        out[i] = c12 * (-p[i - 2] + 16.0 * p[i - 1] - 30.0 * p[i] + 16.0 * p[i + 1] - p[i + 2]) - V[i] * p[i]
    # left end
    if left_mode == 2:
        out[0] = c12 * (-parity * p[1] + 16.0 * parity * p[0] - 30.0 * p[0] + 16.0 * p[1] - p[2]) - V[0] * p[0]
        out[1] = c12 * (-parity * p[0] + 16.0 * p[0] - 30.0 * p[1] + 16.0 * p[2] - p[3]) - V[1] * p[1]
        for i in range(2, 4):
            out[i] = c12 * (-p[i - 2] + 16.0 * p[i - 1] - 30.0 * p[i] + 16.0 * p[i + 1] - p[i + 2]) - V[i] * p[i]
    else:
        for i in range(4):
            out[i] = ih2 * _sbp_left(p, i) - V[i] * p[i]
        sl = (S0[0] * p[0] + S0[1] * p[1] + S0[2] * p[2] + S0[3] * p[3]) / h
        if left_mode == 0:
            out[0] -= (q[0] - sl) / (h * H0)
        else:
            out[0] += sl / (h * H0)
    # right end
    for i in range(4):
        out[n - 1 - i] = ih2 * _sbp_right(p, n, i) - V[n - 1 - i] * p[n - 1 - i]
    sr = -(S0[0] * p[n - 1] + S0[1] * p[n - 2] + S0[2] * p[n - 3] + S0[3] * p[n - 4]) / h
    if right_mode == 0:
        out[n - 1] -= (q[n - 1] + sr) / (h * H0)
    else:
        out[n - 1] -= sr / (h * H0)


def run(double[::1] phi, double[::1] pi, const double[::1] V, double h, double dt,
        Py_ssize_t nsteps, int left_mode, int right_mode, double parity,
        const Py_ssize_t[:, ::1] obs_idx, const double[:, ::1] obs_w,
        double[:, ::1] out_phi, double[:, ::1] out_pi,
        Py_ssize_t snap_every, Py_ssize_t snap_lo, Py_ssize_t snap_hi,
        double[:, ::1] snaps):
    """Advance (phi, pi) in place by ``nsteps`` steps.

    Returns -1 on success or the index of the first step that produced a
    non-finite value.
    """
    cdef Py_ssize_t n = phi.shape[0]
    cdef Py_ssize_t nobs = obs_idx.shape[0]
    cdef Py_ssize_t step, stage, i, o, k, isnap = 0
    cdef double a, b, s, tmp
    cdef double[::1] ps0 = np.empty(n), ps1 = np.empty(n)
    cdef double[::1] qs0 = np.empty(n), qs1 = np.empty(n)
    cdef double[::1] L = np.empty(n)
    cdef double[::1] accp = np.empty(n), accq = np.empty(n)
    cdef double* p_in
    cdef double* q_in
    cdef double* p_out
    cdef double* q_out
    cdef double* swap
    cdef double bw[4]
    cdef double aw[3]
    bw[:] = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]
    aw[:] = [0.5, 0.5, 1.0]
    if n < 12:
        raise ValueError("grid too small")

    with nogil:
        for o in range(nobs):
            s = 0.0
            tmp = 0.0
            for k in range(4):
                s += obs_w[o, k] * phi[obs_idx[o, k]]
                tmp += obs_w[o, k] * pi[obs_idx[o, k]]
            out_phi[0, o] = s
            out_pi[0, o] = tmp
        if snap_every > 0:
            for i in range(snap_lo, snap_hi):
                snaps[0, i - snap_lo] = phi[i]
            isnap = 1

        for step in range(1, nsteps + 1):
            for i in range(n):
                accp[i] = 0.0
                accq[i] = 0.0
            p_in = &phi[0]
            q_in = &pi[0]
            p_out = &ps0[0]
            q_out = &qs0[0]
            for stage in range(4):
                _rhs(p_in, q_in, &V[0], &L[0], n, h, left_mode, right_mode, parity)
                b = bw[stage]
                if stage < 3:
                    a = aw[stage] * dt
                    for i in range(n):
                        accp[i] += b * q_in[i]
                        accq[i] += b * L[i]
                        p_out[i] = phi[i] + a * q_in[i]
                        q_out[i] = pi[i] + a * L[i]
                    p_in = p_out
                    q_in = q_out
                    if p_out == &ps0[0]:
                        p_out = &ps1[0]
                        q_out = &qs1[0]
                    else:
                        p_out = &ps0[0]
                        q_out = &qs0[0]
                else:
                    s = 0.0
                    for i in range(n):
                        phi[i] += dt * (accp[i] + b * q_in[i])
                        pi[i] += dt * (accq[i] + b * L[i])
                        s += phi[i]
                    if not isfinite(s):
                        with gil:
                            return step
            for o in range(nobs):
                s = 0.0
                tmp = 0.0
                for k in range(4):
                    s += obs_w[o, k] * phi[obs_idx[o, k]]
                    tmp += obs_w[o, k] * pi[obs_idx[o, k]]
                out_phi[step, o] = s
                out_pi[step, o] = tmp
            if snap_every > 0 and step % snap_every == 0:
                for i in range(snap_lo, snap_hi):
                    snaps[isnap, i - snap_lo] = phi[i]
                isnap += 1
    return -1

"""Pure numpy RK4 time stepper, the reference for the compiled kernel.

Arguments of :func:`run`:

phi, pi
    Field and time derivative, advanced in place.
V
    Potential sampled on the grid.
h, dt, nsteps
    Grid spacing, time step, number of steps.
left_mode, right_mode
    0 outflow (SAT imposing phi_t -+ phi_x = 0), 1 reflecting (phi_x = 0),
    2 (left only) regular centre with parity ghosts phi(-x) = parity phi(x)
    on the staggered grid x_i = (i + 1/2) h.
obs_idx, obs_w
    Four stencil indices and Lagrange weights per observer.
out_phi, out_pi
    (nsteps + 1, nobs) observer records, row 0 is the initial state.
snap_every, snap_lo, snap_hi, snaps
    Every ``snap_every`` steps phi[snap_lo:snap_hi] is stored in the next
    row of ``snaps`` (row 0 holds the initial state); 0 disables.
"""

from __future__ import annotations

import numpy as np

R0 = np.array([2.0, -5.0, 4.0, -1.0])
R1 = np.array([1.0, -2.0, 1.0])
R2 = np.array([-4.0, 59.0, -110.0, 59.0, -4.0]) / 43.0
R3 = np.array([-1.0, 0.0, 59.0, -118.0, 64.0, -4.0]) / 49.0
H0 = 17.0 / 48.0
S0 = np.array([-11.0 / 6.0, 3.0, -1.5, 1.0 / 3.0])
H_DIAG = np.array([17.0, 59.0, 43.0, 49.0]) / 48.0


def rhs(p, q, V, h, left_mode, right_mode, parity):
    n = len(p)
    ih2 = 1.0 / (h * h)
    out = np.empty(n)
    out[2:-2] = (ih2 / 12.0) * (-p[:-4] + 16.0 * p[1:-3] - 30.0 * p[2:-2] + 16.0 * p[3:-1] - p[4:])
    if left_mode == 2:
        out[0] = (ih2 / 12.0) * (-parity * p[1] + 16.0 * parity * p[0] - 30.0 * p[0]
                                 + 16.0 * p[1] - p[2])
        out[1] = (ih2 / 12.0) * (-parity * p[0] + 16.0 * p[0] - 30.0 * p[1] + 16.0 * p[2] - p[3])
    else:
        out[0] = ih2 * (R0 @ p[:4])
        out[1] = ih2 * (R1 @ p[:3])
        out[2] = ih2 * (R2 @ p[:5])
        out[3] = ih2 * (R3 @ p[:6])
    out[-1] = ih2 * (R0 @ p[:-5:-1])
    out[-2] = ih2 * (R1 @ p[:-4:-1])
    out[-3] = ih2 * (R2 @ p[:-6:-1])
    out[-4] = ih2 * (R3 @ p[:-7:-1])
    out -= V * p
    if left_mode != 2:
        sl = (S0 @ p[:4]) / h
        if left_mode == 0:
            out[0] -= (q[0] - sl) / (h * H0)
        else:
            out[0] += sl / (h * H0)
    sr = -(S0 @ p[:-5:-1]) / h
    if right_mode == 0:
        out[-1] -= (q[-1] + sr) / (h * H0)
    else:
        out[-1] -= sr / (h * H0)
    return out


def run(phi, pi, V, h, dt, nsteps, left_mode, right_mode, parity, obs_idx, obs_w,
        out_phi, out_pi, snap_every, snap_lo, snap_hi, snaps):
    """Advance (phi, pi) in place; returns -1 or the first non-finite step."""
    V = np.asarray(V)
    obs_idx = np.asarray(obs_idx)
    obs_w = np.asarray(obs_w)
    out_phi[0] = np.sum(obs_w * phi[obs_idx], axis=1)
    out_pi[0] = np.sum(obs_w * pi[obs_idx], axis=1)
    isnap = 0
    if snap_every > 0:
        snaps[0] = phi[snap_lo:snap_hi]
        isnap = 1
    args = (V, h, left_mode, right_mode, parity)
    for step in range(1, nsteps + 1):
        k1q = rhs(phi, pi, *args)
        k1p = pi
        p2 = phi + 0.5 * dt * k1p
        q2 = pi + 0.5 * dt * k1q
        k2q = rhs(p2, q2, *args)
        p3 = phi + 0.5 * dt * q2
        q3 = pi + 0.5 * dt * k2q
        k3q = rhs(p3, q3, *args)
        p4 = phi + dt * q3
        q4 = pi + dt * k3q
        k4q = rhs(p4, q4, *args)
        phi += (dt / 6.0) * (k1p + 2.0 * q2 + 2.0 * q3 + q4)
        pi += (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        if not np.isfinite(phi.sum()):
            return step
        out_phi[step] = np.sum(obs_w * phi[obs_idx], axis=1)
        out_pi[step] = np.sum(obs_w * pi[obs_idx], axis=1)
        if snap_every > 0 and step % snap_every == 0:
            snaps[isnap] = phi[snap_lo:snap_hi]
            isnap += 1
    return -1

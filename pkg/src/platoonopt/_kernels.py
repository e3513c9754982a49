"""Compiled time-stepping kernels (private module).

The sequential loops (forward RK3 sweep, backward costate sweep) dominate
runtime, so they are written against plain float64 arrays and JIT-compiled
with numba. The public dataclass API lives in ``dynamics`` / ``adjoint``.

The backward sweep is the exact reverse-mode transpose of the forward RK3
step combined with the trapezoid-in-time objective weights, so gradients
assembled from these costates match finite differences of the implemented
objective to solver precision. Forward and backward share the same stage
arithmetic (same helpers, same evaluation order).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# Explicit third-order Runge-Kutta tableau (Bogacki-Shampine layout):
# stage abscissae (0, 1/2, 3/4), weights (2/9, 1/3, 4/9).
A21 = 0.5
A32 = 0.75
C2 = 0.5
C3 = 0.75
B1 = 2.0 / 9.0
B2 = 1.0 / 3.0
B3 = 4.0 / 9.0

STATUS_OK = 0
STATUS_COLLISION = 1


@njit(cache=True)
def _hermite(y0: float, y1: float, d0: float, d1: float, dt: float, s: float) -> float:
    """Cubic Hermite value at fraction s of a cell with endpoint slopes."""
    s2 = s * s
    s3 = s2 * s
    h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    return h00 * y0 + h10 * dt * d0 + h01 * y1 + h11 * dt * d1


@njit(cache=True)
def _acc_all(x, v, xl, vl, u, is_av, alpha, beta, veh_len, v_max, d_s, tanh_lds, out) -> int:
    """Platoon accelerations at one stage state; returns colliding HV index or -1."""
    n = x.shape[0]
    for i in range(n):
        if is_av[i]:
            out[i] = u[i]
        else:
            if i == 0:
                lead_x = xl
                lead_v = vl
            else:
                lead_x = x[i - 1]
                lead_v = v[i - 1]
            h = lead_x - x[i] - veh_len
            if h <= 0.0:
                return i
            ov = v_max * (math.tanh(h - d_s) + tanh_lds) / (1.0 + tanh_lds)
            out[i] = alpha * (ov - v[i]) + beta * (lead_v - v[i]) / (h * h)
    return -1


@njit(cache=True)
def _jac_all(x, v, xl, vl, is_av, alpha, beta, veh_len, v_max, d_s, tanh_lds, cd, cs, dd, ds_) -> int:
    """Nonzero Jacobian entries of the platoon acceleration at one stage state.

    Row i of the velocity block: cd[i] = dAcc_i/dx_i, dd[i] = dAcc_i/dv_i,
    and (for i >= 1) cs[i] = dAcc_i/dx_{i-1}, ds_[i] = dAcc_i/dv_{i-1}.
    AV rows are zero. Returns colliding HV index or -1.
    """
    n = x.shape[0]
    for i in range(n):
        if is_av[i]:
            cd[i] = 0.0
            cs[i] = 0.0
            dd[i] = 0.0
            ds_[i] = 0.0
        else:
            if i == 0:
                lead_x = xl
                lead_v = vl
            else:
                lead_x = x[i - 1]
                lead_v = v[i - 1]
            h = lead_x - x[i] - veh_len
            if h <= 0.0:
                return i
            ch = math.cosh(h - d_s)
            vprime = v_max / (ch * ch * (1.0 + tanh_lds))
            dx = -alpha * vprime + 2.0 * beta * (lead_v - v[i]) / (h * h * h)
            cd[i] = dx
            dd[i] = -alpha - beta / (h * h)
            if i == 0:
                cs[i] = 0.0
                ds_[i] = 0.0
            else:
                cs[i] = -dx
                ds_[i] = beta / (h * h)
    return -1


@njit(cache=True)
def _cost_grad_all(
    x, v, xl, vl, is_av, greedy, mu, d_safe, d_max, vel_pen,
    alpha, beta, veh_len, v_max, d_s, tanh_lds, gx, gv,
) -> int:
    """Gradient of the state-dependent running cost at one node, into (gx, gv)."""
    n = x.shape[0]
    for i in range(n):
        gx[i] = 0.0
        gv[i] = 0.0
    for i in range(n):
        if i == 0:
            lead_x = xl
            lead_v = vl
        else:
            lead_x = x[i - 1]
            lead_v = v[i - 1]
        if is_av[i]:
            gap = lead_x - x[i] - veh_len
            under = min(gap - d_safe, 0.0)
            over = min(d_max - gap, 0.0)
            dpen_dgap = 2.0 * (under - over)
            if dpen_dgap != 0.0:
                gx[i] -= mu * dpen_dgap
                if i > 0:
                    gx[i - 1] += mu * dpen_dgap
            if vel_pen:
                vneg = min(v[i], 0.0)
                if vneg != 0.0:
                    gv[i] += 2.0 * mu * vneg
        elif not greedy:
            h = lead_x - x[i] - veh_len
            if h <= 0.0:
                return i
            ov = v_max * (math.tanh(h - d_s) + tanh_lds) / (1.0 + tanh_lds)
            acc = alpha * (ov - v[i]) + beta * (lead_v - v[i]) / (h * h)
            ch = math.cosh(h - d_s)
            vprime = v_max / (ch * ch * (1.0 + tanh_lds))
            dx = -alpha * vprime + 2.0 * beta * (lead_v - v[i]) / (h * h * h)
            dv = -alpha - beta / (h * h)
            gx[i] += 2.0 * acc * dx
            gv[i] += 2.0 * acc * dv
            if i > 0:
                gx[i - 1] += 2.0 * acc * (-dx)
                gv[i - 1] += 2.0 * acc * (beta / (h * h))
    return -1


@njit(cache=True)
def forward_rk3(x0, v0, lx, lv, la, omega, cell_iv, dt, is_av, alpha, beta, veh_len, v_max, d_s):
    """Fixed-step RK3 sweep of the platoon ODE over the state grid.

    Returns (x, v, status, vehicle, step): positions/velocities at every
    node, and on STATUS_COLLISION the vehicle index and step where a gap
    first failed to stay positive.
    """
    n = x0.shape[0]
    r = cell_iv.shape[0]
    tanh_lds = math.tanh(veh_len + d_s)
    xs = np.empty((r + 1, n))
    vs = np.empty((r + 1, n))
    for i in range(n):
        xs[0, i] = x0[i]
        vs[0, i] = v0[i]
    a1 = np.empty(n)
    a2 = np.empty(n)
    a3 = np.empty(n)
    x2 = np.empty(n)
    v2 = np.empty(n)
    x3 = np.empty(n)
    v3 = np.empty(n)
    for j in range(r):
        u = omega[cell_iv[j]]
        x = xs[j]
        v = vs[j]
        bad = _acc_all(x, v, lx[j], lv[j], u, is_av, alpha, beta, veh_len, v_max, d_s, tanh_lds, a1)
        if bad >= 0:
            return xs, vs, STATUS_COLLISION, bad, j
        for i in range(n):
            x2[i] = x[i] + dt * A21 * v[i]
            v2[i] = v[i] + dt * A21 * a1[i]
        xl2 = _hermite(lx[j], lx[j + 1], lv[j], lv[j + 1], dt, C2)
        vl2 = _hermite(lv[j], lv[j + 1], la[j], la[j + 1], dt, C2)
        bad = _acc_all(x2, v2, xl2, vl2, u, is_av, alpha, beta, veh_len, v_max, d_s, tanh_lds, a2)
        if bad >= 0:
            return xs, vs, STATUS_COLLISION, bad, j
        for i in range(n):
            x3[i] = x[i] + dt * A32 * v2[i]
            v3[i] = v[i] + dt * A32 * a2[i]
        xl3 = _hermite(lx[j], lx[j + 1], lv[j], lv[j + 1], dt, C3)
        vl3 = _hermite(lv[j], lv[j + 1], la[j], la[j + 1], dt, C3)
        bad = _acc_all(x3, v3, xl3, vl3, u, is_av, alpha, beta, veh_len, v_max, d_s, tanh_lds, a3)
        if bad >= 0:
            return xs, vs, STATUS_COLLISION, bad, j
        for i in range(n):
            xs[j + 1, i] = x[i] + dt * (B1 * v[i] + B2 * v2[i] + B3 * v3[i])
            vs[j + 1, i] = v[i] + dt * (B1 * a1[i] + B2 * a2[i] + B3 * a3[i])
        for i in range(n):
            lead_x = lx[j + 1] if i == 0 else xs[j + 1, i - 1]
            if lead_x - xs[j + 1, i] - veh_len <= 0.0:
                return xs, vs, STATUS_COLLISION, i, j + 1
    return xs, vs, STATUS_OK, -1, -1


@njit(cache=True)
def _jact_apply(cd, cs, dd, ds_, qx, qv, outx, outv):
    """out = J^T q for J = [[0, I], [C, D]] with bidiagonal C, D blocks."""
    n = qx.shape[0]
    for i in range(n):
        ax = cd[i] * qv[i]
        av = qx[i] + dd[i] * qv[i]
        if i + 1 < n:
            ax += cs[i + 1] * qv[i + 1]
            av += ds_[i + 1] * qv[i + 1]
        outx[i] = ax
        outv[i] = av


@njit(cache=True)
def backward_sweep(
    xs, vs, lx, lv, la, omega, cell_iv, dt, is_av,
    greedy, mu, d_safe, d_max, vel_pen,
    alpha, beta, veh_len, v_max, d_s,
    zeta_terminal, zeta, gcells, mode,
):
    """Backward costate sweep and/or per-cell gradient contributions.

    mode 0: run the full reverse-mode recursion, writing the costate into
        ``zeta`` (rows r..0) and the per-cell control sensitivities into
        ``gcells``.
    mode 1: treat ``zeta`` as given and only fill ``gcells`` (used when a
        caller assembles a gradient from a previously computed costate).

    The recursion transposes the exact forward RK3 step: stage states are
    recomputed with the same arithmetic as forward_rk3, the running-cost
    gradient enters with trapezoid weights (half weight at both ends of the
    horizon), and ``zeta_terminal`` seeds any terminal-cost derivative.

    Returns (status, vehicle, step).
    """
    n = xs.shape[1]
    r = cell_iv.shape[0]
    tanh_lds = math.tanh(veh_len + d_s)
    a1 = np.empty(n)
    a2 = np.empty(n)
    x2 = np.empty(n)
    v2 = np.empty(n)
    x3 = np.empty(n)
    v3 = np.empty(n)
    cd1 = np.empty(n); cs1 = np.empty(n); dd1 = np.empty(n); ds1 = np.empty(n)
    cd2 = np.empty(n); cs2 = np.empty(n); dd2 = np.empty(n); ds2 = np.empty(n)
    cd3 = np.empty(n); cs3 = np.empty(n); dd3 = np.empty(n); ds3 = np.empty(n)
    k1x = np.empty(n); k1v = np.empty(n)
    k2x = np.empty(n); k2v = np.empty(n)
    k3x = np.empty(n); k3v = np.empty(n)
    y1x = np.empty(n); y1v = np.empty(n)
    y2x = np.empty(n); y2v = np.empty(n)
    y3x = np.empty(n); y3v = np.empty(n)
    gx = np.empty(n); gv = np.empty(n)

    if mode == 0:
        bad = _cost_grad_all(
            xs[r], vs[r], lx[r], lv[r], is_av, greedy, mu, d_safe, d_max, vel_pen,
            alpha, beta, veh_len, v_max, d_s, tanh_lds, gx, gv,
        )
        if bad >= 0:
            return STATUS_COLLISION, bad, r
        for i in range(n):
            zeta[r, i] = 0.5 * dt * gx[i] + zeta_terminal[i]
            zeta[r, n + i] = 0.5 * dt * gv[i] + zeta_terminal[n + i]

    for j in range(r - 1, -1, -1):
        u = omega[cell_iv[j]]
        x = xs[j]
        v = vs[j]
        # Recompute the forward stage states (same arithmetic as forward_rk3).
        bad = _acc_all(x, v, lx[j], lv[j], u, is_av, alpha, beta, veh_len, v_max, d_s, tanh_lds, a1)
        if bad >= 0:
            return STATUS_COLLISION, bad, j
        for i in range(n):
            x2[i] = x[i] + dt * A21 * v[i]
            v2[i] = v[i] + dt * A21 * a1[i]
        xl2 = _hermite(lx[j], lx[j + 1], lv[j], lv[j + 1], dt, C2)
        vl2 = _hermite(lv[j], lv[j + 1], la[j], la[j + 1], dt, C2)
        bad = _acc_all(x2, v2, xl2, vl2, u, is_av, alpha, beta, veh_len, v_max, d_s, tanh_lds, a2)
        if bad >= 0:
            return STATUS_COLLISION, bad, j
        for i in range(n):
            x3[i] = x[i] + dt * A32 * v2[i]
            v3[i] = v[i] + dt * A32 * a2[i]
        xl3 = _hermite(lx[j], lx[j + 1], lv[j], lv[j + 1], dt, C3)
        vl3 = _hermite(lv[j], lv[j + 1], la[j], la[j + 1], dt, C3)
        bad = _jac_all(x, v, lx[j], lv[j], is_av, alpha, beta, veh_len, v_max, d_s, tanh_lds, cd1, cs1, dd1, ds1)
        if bad >= 0:
            return STATUS_COLLISION, bad, j
        bad = _jac_all(x2, v2, xl2, vl2, is_av, alpha, beta, veh_len, v_max, d_s, tanh_lds, cd2, cs2, dd2, ds2)
        if bad >= 0:
            return STATUS_COLLISION, bad, j
        bad = _jac_all(x3, v3, xl3, vl3, is_av, alpha, beta, veh_len, v_max, d_s, tanh_lds, cd3, cs3, dd3, ds3)
        if bad >= 0:
            return STATUS_COLLISION, bad, j

        # Transposed RK3 stage chain seeded by the costate after this step.
        for i in range(n):
            k3x[i] = dt * B3 * zeta[j + 1, i]
            k3v[i] = dt * B3 * zeta[j + 1, n + i]
        _jact_apply(cd3, cs3, dd3, ds3, k3x, k3v, y3x, y3v)
        for i in range(n):
            k2x[i] = dt * B2 * zeta[j + 1, i] + dt * A32 * y3x[i]
            k2v[i] = dt * B2 * zeta[j + 1, n + i] + dt * A32 * y3v[i]
        _jact_apply(cd2, cs2, dd2, ds2, k2x, k2v, y2x, y2v)
        for i in range(n):
            k1x[i] = dt * B1 * zeta[j + 1, i] + dt * A21 * y2x[i]
            k1v[i] = dt * B1 * zeta[j + 1, n + i] + dt * A21 * y2v[i]
        _jact_apply(cd1, cs1, dd1, ds1, k1x, k1v, y1x, y1v)

        for i in range(n):
            if is_av[i]:
                gcells[j, i] = k1v[i] + k2v[i] + k3v[i]
            else:
                gcells[j, i] = 0.0

        if mode == 0:
            bad = _cost_grad_all(
                x, v, lx[j], lv[j], is_av, greedy, mu, d_safe, d_max, vel_pen,
                alpha, beta, veh_len, v_max, d_s, tanh_lds, gx, gv,
            )
            if bad >= 0:
                return STATUS_COLLISION, bad, j
            w = dt if j > 0 else 0.5 * dt
            for i in range(n):
                zeta[j, i] = zeta[j + 1, i] + y1x[i] + y2x[i] + y3x[i] + w * gx[i]
                zeta[j, n + i] = zeta[j + 1, n + i] + y1v[i] + y2v[i] + y3v[i] + w * gv[i]

    return STATUS_OK, -1, -1

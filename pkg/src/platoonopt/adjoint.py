"""Costate integration and objective gradients for the platoon OCP.

The gradient of the discretized objective with respect to the
piecewise-constant controls comes from one backward sweep of the costate
(adjoint) system over the same grid as the forward pass. The sweep is the
exact transpose of the forward RK3 stepping combined with the trapezoid
cost quadrature, so the assembled gradient matches central finite
differences of ``total_objective`` to solver precision; the costate itself
is a consistent approximation of the continuous adjoint.

Sign convention (fixed by the finite-difference check, which is the
contract here): zeta satisfies zeta(T) = S_y and zeta' = -(L_y + f_y^T
zeta) backward in time, and the reduced gradient on interval k for AV i is
int_k (L_{u_i} + zeta^v_i) dt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dynamics import (
    ControlSchedule,
    LeaderTrajectory,
    PlatoonLayout,
    StateTrajectory,
    _boundary_indices,
    _cell_intervals,
    expand_controls,
)
from .model import ModelParams, bando_ftl_partials
from .objective import ObjectiveConfig
from .problem import OcProblem

__all__ = [
    "AdjointTrajectory",
    "JacobianBlocks",
    "jacobian_state",
    "simulate_adjoint_backward",
    "assemble_gradient",
    "adjoint_gradient",
    "finite_difference_gradient",
]


@dataclass(frozen=True)
class AdjointTrajectory:
    """Costate zeta = (zeta^x, zeta^v) at every state-grid node, (r+1, 2n)."""

    grid: np.ndarray
    zeta: np.ndarray

    @property
    def n_vehicles(self) -> int:
        return self.zeta.shape[1] // 2


@dataclass(frozen=True)
class JacobianBlocks:
    """Nonzero blocks of f_y = [[0, I], [C, D]] at one state.

    C and D are lower bidiagonal: row i holds dAcc_i/d(x_i, x_{i-1}) and
    dAcc_i/d(v_i, v_{i-1}); AV rows are zero because their acceleration is
    the commanded control.
    """

    C: np.ndarray
    D: np.ndarray

    def full(self) -> np.ndarray:
        n = self.C.shape[0]
        top = np.hstack([np.zeros((n, n)), np.eye(n)])
        bottom = np.hstack([self.C, self.D])
        return np.vstack([top, bottom])


def jacobian_state(
    t: float,
    y: np.ndarray,
    layout: PlatoonLayout,
    params: ModelParams,
    leader: LeaderTrajectory,
) -> JacobianBlocks:
    """State Jacobian of the platoon ODE right-hand side at (t, y)."""
    n = layout.n_vehicles
    y = np.asarray(y, dtype=float)
    x, v = y[:n], y[n:]
    lx, lv = leader.state_at(t)
    C = np.zeros((n, n))
    D = np.zeros((n, n))
    for i in layout.hv_indices:
        lead_x = lx if i == 0 else x[i - 1]
        lead_v = lv if i == 0 else v[i - 1]
        d_x, d_xl, d_v, d_vl = bando_ftl_partials(x[i], lead_x, v[i], lead_v, params)
        C[i, i] = d_x
        D[i, i] = d_v
        if i > 0:
            C[i, i - 1] = d_xl
            D[i, i - 1] = d_vl
    return JacobianBlocks(C=C, D=D)


def _sweep_args(
    states: StateTrajectory,
    layout: PlatoonLayout,
    params: ModelParams,
    leader: LeaderTrajectory,
    c: ControlSchedule,
    obj: ObjectiveConfig,
):
    if c.n_av != layout.n_av:
        raise ValueError("schedule width does not match layout AV count")
    if states.grid.shape != leader.grid.shape or np.any(np.abs(states.grid - leader.grid) > 1e-9):
        raise ValueError("trajectory and leader must share the state grid")
    return (
        np.ascontiguousarray(states.x),
        np.ascontiguousarray(states.v),
        np.ascontiguousarray(leader.x),
        np.ascontiguousarray(leader.v),
        np.ascontiguousarray(leader.a),
        np.ascontiguousarray(expand_controls(c, layout)),
        _cell_intervals(c.tau, states.grid),
        float(states.grid[1] - states.grid[0]),
        layout.is_av_mask(),
        obj.mode == "greedy",
        obj.mu,
        obj.d_safe,
        obj.d_max,
        obj.velocity_penalty,
        params.alpha,
        params.beta,
        params.vehicle_length,
        params.v_max,
        params.d_s,
    )


def simulate_adjoint_backward(
    states: StateTrajectory,
    layout: PlatoonLayout,
    params: ModelParams,
    leader: LeaderTrajectory,
    obj: ObjectiveConfig,
    c: ControlSchedule,
    terminal: np.ndarray | None = None,
) -> AdjointTrajectory:
    """Integrate the costate system backward from t = T over the state grid.

    ``terminal`` seeds S_y for a nonzero terminal cost; the default (zero)
    matches the defined objective. The trajectory must be collision-free.
    """
    n = layout.n_vehicles
    r = states.grid.size - 1
    if terminal is None:
        terminal = np.zeros(2 * n)
    terminal = np.asarray(terminal, dtype=float)
    if terminal.shape != (2 * n,):
        raise ValueError(f"terminal seed must have shape ({2 * n},)")
    zeta = np.zeros((r + 1, 2 * n))
    gcells = np.zeros((r, n))
    status, vehicle, step = _kernels.backward_sweep(
        *_sweep_args(states, layout, params, leader, c, obj),
        terminal,
        zeta,
        gcells,
        0,
    )
    if status != _kernels.STATUS_OK:
        raise RuntimeError(
            f"nonpositive HV gap (vehicle {vehicle}, step {step}) in stored trajectory"
        )
    return AdjointTrajectory(grid=states.grid, zeta=zeta)


def _reduce_cells(
    gcells: np.ndarray,
    c: ControlSchedule,
    layout: PlatoonLayout,
    grid: np.ndarray,
) -> np.ndarray:
    """Sum per-cell control sensitivities into (interval, AV) gradient entries."""
    boundaries = _boundary_indices(c.tau, grid)
    per_interval = np.add.reduceat(gcells, boundaries[:-1], axis=0)
    grad = per_interval[:, list(layout.av_indices)]
    grad = grad + 2.0 * c.omega * np.diff(c.tau)[:, None]
    return grad


def assemble_gradient(
    states: StateTrajectory,
    adjoint: AdjointTrajectory,
    c: ControlSchedule,
    obj: ObjectiveConfig,
    layout: PlatoonLayout,
    params: ModelParams,
    leader: LeaderTrajectory,
) -> np.ndarray:
    """Objective gradient d total_objective / d omega, shape (p, n_av).

    Built on the given costate: each state-grid cell contributes the exact
    sensitivity of its RK3 step seeded by zeta at the cell's right node,
    reduced per control interval; the control-effort term adds
    2 omega_k dtau_k. Entries are exactly zero at HV slots by structure.
    """
    n = layout.n_vehicles
    r = states.grid.size - 1
    if adjoint.zeta.shape != (r + 1, 2 * n):
        raise ValueError("adjoint shape does not match trajectory")
    gcells = np.zeros((r, n))
    status, vehicle, step = _kernels.backward_sweep(
        *_sweep_args(states, layout, params, leader, c, obj),
        np.zeros(2 * n),
        np.ascontiguousarray(adjoint.zeta),
        gcells,
        1,
    )
    if status != _kernels.STATUS_OK:
        raise RuntimeError(
            f"nonpositive HV gap (vehicle {vehicle}, step {step}) in stored trajectory"
        )
    return _reduce_cells(gcells, c, layout, states.grid)


def adjoint_gradient(
    problem: OcProblem,
    c: ControlSchedule,
    states: StateTrajectory | None = None,
) -> tuple[np.ndarray, StateTrajectory]:
    """Gradient of the problem objective at schedule c, in one backward pass.

    Returns (gradient, trajectory); simulates forward first unless a
    trajectory for exactly this schedule is supplied.
    """
    if states is None:
        states = problem.simulate(c)
    n = problem.layout.n_vehicles
    r = states.grid.size - 1
    zeta = np.zeros((r + 1, 2 * n))
    gcells = np.zeros((r, n))
    status, vehicle, step = _kernels.backward_sweep(
        *_sweep_args(states, problem.layout, problem.params, problem.leader, c, problem.obj),
        np.zeros(2 * n),
        zeta,
        gcells,
        0,
    )
    if status != _kernels.STATUS_OK:
        raise RuntimeError(
            f"nonpositive HV gap (vehicle {vehicle}, step {step}) in stored trajectory"
        )
    return _reduce_cells(gcells, c, problem.layout, states.grid), states


def finite_difference_gradient(
    problem: OcProblem,
    c: ControlSchedule,
    step: float = 1e-4,
) -> np.ndarray:
    """Central-difference gradient of the objective, one entry at a time.

    Independent check of the adjoint path: every entry costs two forward
    simulations. Perturbed schedules must stay collision-free (a
    CollisionError propagates).
    """
    if not step > 0.0:
        raise ValueError("step must be positive")
    grad = np.zeros_like(c.omega)
    for k in range(c.omega.shape[0]):
        for m in range(c.omega.shape[1]):
            bumped = c.omega.copy()
            bumped[k, m] += step
            plus = problem.objective(c.replace_omega(bumped))
            bumped[k, m] -= 2.0 * step
            minus = problem.objective(c.replace_omega(bumped))
            grad[k, m] = (plus - minus) / (2.0 * step)
    return grad

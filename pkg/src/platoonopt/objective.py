"""Control objectives, soft-constraint penalties, and evaluation metrics.

The running cost integrates squared accelerations: commanded ones for AVs
always, and Bando-FtL ones for HVs when the mode is "full" ("greedy" lets
each AV mind only its own comfort). State constraints (minimum headway,
maximum headway, nonnegative AV speed) enter as quadratic one-sided
penalties scaled by a weight mu that an outer loop escalates.

The fuel/energy model is evaluation-only: it never enters an objective,
and its default coefficients are placeholders that need calibration
against a real consumption model before the absolute numbers mean
anything. Relative comparisons (baseline vs controlled) are the intended
use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    ControlSchedule,
    LeaderTrajectory,
    PlatoonLayout,
    StateTrajectory,
    acceleration_series,
)
from .model import ModelParams, bando_ftl_acc, bando_ftl_partials

__all__ = [
    "ObjectiveConfig",
    "EnergyParams",
    "Metrics",
    "headway_penalty",
    "velocity_penalty",
    "running_cost",
    "running_cost_partials",
    "total_objective",
    "energy_metric",
    "compute_metrics",
]


@dataclass(frozen=True)
class ObjectiveConfig:
    """What the optimizer minimizes and how hard constraints push back.

    Attributes:
        mode: "full" (every vehicle's squared acceleration) or "greedy"
            (only the AVs' own squared control effort).
        mu: current penalty weight; the solver escalates this, standalone
            evaluations use it as-is.
        d_safe: minimum allowed AV headway (m).
        d_max: maximum allowed AV headway (m).
        velocity_penalty: penalize negative AV speeds with the same
            quadratic hinge (keeps the no-reversing constraint soft).
        terminal_cost: only "zero" is defined; the adjoint accepts an
            explicit terminal seed for experimentation.
    """

    mode: str = "full"
    mu: float = 10.0
    d_safe: float = 5.0
    d_max: float = 120.0
    velocity_penalty: bool = True
    terminal_cost: str = "zero"

    def __post_init__(self) -> None:
        if self.mode not in ("full", "greedy"):
            raise ValueError(f"mode must be 'full' or 'greedy', got {self.mode!r}")
        if self.mu < 0.0:
            raise ValueError("mu must be nonnegative")
        if not 0.0 < self.d_safe < self.d_max:
            raise ValueError("need 0 < d_safe < d_max")
        if self.terminal_cost != "zero":
            raise ValueError("only terminal_cost='zero' is defined")


def headway_penalty(gap, threshold: float, kind: str):
    """One-sided quadratic hinge on a headway, with derivative.

    kind "min": (min(gap - threshold, 0))^2 punishes gaps below threshold;
    kind "max": (min(threshold - gap, 0))^2 punishes gaps above it.
    Returns (value, d_value/d_gap); both are zero on the feasible side and
    join continuously differentiably at the threshold.
    """
    gap = np.asarray(gap, dtype=float)
    if kind == "min":
        slack = np.minimum(gap - threshold, 0.0)
        return slack**2, 2.0 * slack
    if kind == "max":
        slack = np.minimum(threshold - gap, 0.0)
        return slack**2, -2.0 * slack
    raise ValueError(f"kind must be 'min' or 'max', got {kind!r}")


def velocity_penalty(v):
    """Quadratic hinge (min(v, 0))^2 on reversing, with derivative."""
    v = np.asarray(v, dtype=float)
    neg = np.minimum(v, 0.0)
    return neg**2, 2.0 * neg


def _state_cost_terms(
    x: np.ndarray,
    v: np.ndarray,
    lead_x: np.ndarray,
    lead_v: np.ndarray,
    layout: PlatoonLayout,
    params: ModelParams,
    obj: ObjectiveConfig,
):
    """State-dependent running cost, vectorized over leading axes.

    x, v, lead_x, lead_v all have shape (..., n). Returns the pointwise
    cost rate of shape (...): HV squared accelerations (full mode) plus
    mu-weighted penalties at AV slots. Control effort is excluded; it is
    accounted per interval exactly.
    """
    cost = np.zeros(x.shape[:-1])
    hv = list(layout.hv_indices)
    if obj.mode == "full" and hv:
        acc = bando_ftl_acc(x[..., hv], lead_x[..., hv], v[..., hv], lead_v[..., hv], params)
        cost = cost + np.sum(acc**2, axis=-1)
    av = list(layout.av_indices)
    if av and obj.mu > 0.0:
        gap = lead_x[..., av] - x[..., av] - params.vehicle_length
        pen_min, _ = headway_penalty(gap, obj.d_safe, "min")
        pen_max, _ = headway_penalty(gap, obj.d_max, "max")
        pen = np.sum(pen_min + pen_max, axis=-1)
        if obj.velocity_penalty:
            pen_v, _ = velocity_penalty(v[..., av])
            pen = pen + np.sum(pen_v, axis=-1)
        cost = cost + obj.mu * pen
    return cost


def running_cost(
    t: float,
    y: np.ndarray,
    u: np.ndarray,
    layout: PlatoonLayout,
    params: ModelParams,
    leader: LeaderTrajectory,
    obj: ObjectiveConfig,
) -> float:
    """Instantaneous cost rate L(y, u) at time t.

    u is the full length-n command vector; only AV slots contribute
    control effort.
    """
    n = layout.n_vehicles
    y = np.asarray(y, dtype=float)
    x, v = y[:n], y[n:]
    lx, lv = leader.state_at(t)
    lead_x = np.concatenate([[lx], x[:-1]])
    lead_v = np.concatenate([[lv], v[:-1]])
    cost = float(_state_cost_terms(x, v, lead_x, lead_v, layout, params, obj))
    av = list(layout.av_indices)
    if av:
        cost += float(np.sum(np.asarray(u, dtype=float)[av] ** 2))
    return cost


def running_cost_partials(
    t: float,
    y: np.ndarray,
    u: np.ndarray,
    layout: PlatoonLayout,
    params: ModelParams,
    leader: LeaderTrajectory,
    obj: ObjectiveConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic (dL/dy, dL/du) at one state; dL/du is length n, zero at HV slots."""
    n = layout.n_vehicles
    y = np.asarray(y, dtype=float)
    x, v = y[:n], y[n:]
    lx, lv = leader.state_at(t)
    L_y = np.zeros(2 * n)
    if obj.mode == "full":
        for i in layout.hv_indices:
            lead_x = lx if i == 0 else x[i - 1]
            lead_v = lv if i == 0 else v[i - 1]
            acc = float(bando_ftl_acc(x[i], lead_x, v[i], lead_v, params))
            d_x, d_xl, d_v, d_vl = bando_ftl_partials(x[i], lead_x, v[i], lead_v, params)
            L_y[i] += 2.0 * acc * d_x
            L_y[n + i] += 2.0 * acc * d_v
            if i > 0:
                L_y[i - 1] += 2.0 * acc * d_xl
                L_y[n + i - 1] += 2.0 * acc * d_vl
    if obj.mu > 0.0:
        for i in layout.av_indices:
            lead_x = lx if i == 0 else x[i - 1]
            gap = lead_x - x[i] - params.vehicle_length
            _, d_min = headway_penalty(gap, obj.d_safe, "min")
            _, d_max = headway_penalty(gap, obj.d_max, "max")
            d_gap = obj.mu * float(d_min + d_max)
            L_y[i] -= d_gap
            if i > 0:
                L_y[i - 1] += d_gap
            if obj.velocity_penalty:
                _, d_v = velocity_penalty(v[i])
                L_y[n + i] += obj.mu * float(d_v)
    L_u = np.zeros(n)
    av = list(layout.av_indices)
    if av:
        L_u[av] = 2.0 * np.asarray(u, dtype=float)[av]
    return L_y, L_u


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    dt = float(grid[1] - grid[0])
    w = np.full(grid.size, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def total_objective(
    states: StateTrajectory,
    c: ControlSchedule,
    obj: ObjectiveConfig,
    layout: PlatoonLayout,
    params: ModelParams,
    leader: LeaderTrajectory,
) -> float:
    """Discretized objective: trapezoid of the running cost over the state grid.

    The state-dependent part is continuous in time, so the composite
    trapezoid rule applies node weights (dt/2 at both horizon ends). The
    piecewise-constant control effort integrates exactly to
    sum_k dtau_k * |omega_k|^2. Terminal cost is zero.
    """
    if c.n_av != layout.n_av:
        raise ValueError("schedule width does not match layout AV count")
    lead_x = np.concatenate([leader.x[:, None], states.x[:, :-1]], axis=1)
    lead_v = np.concatenate([leader.v[:, None], states.v[:, :-1]], axis=1)
    node_cost = _state_cost_terms(states.x, states.v, lead_x, lead_v, layout, params, obj)
    value = float(_trapezoid_weights(states.grid) @ node_cost)
    if layout.n_av:
        dtau = np.diff(c.tau)
        value += float(dtau @ np.sum(c.omega**2, axis=1))
    return value


@dataclass(frozen=True)
class EnergyParams:
    """Polynomial fuel-rate model coefficients (placeholder defaults).

    Fuel of one vehicle over [0, T]:

        C0 + C1 (x(T) - x(0)) + p0 v(T) + p1/2 v(T)^2 + p2/3 v(T)^3
        + C2 int v^2 dt + C3 int v^3 dt
        + int (q0 + q1 v) max(u, 0)^2 dt.

    The defaults are order-of-magnitude placeholders chosen so that the
    metric is positive and acceleration-sensitive; calibrate them against
    a real engine map before reading absolute numbers.
    """

    C0: float = 0.0
    C1: float = 0.0
    C2: float = 0.0025
    C3: float = 5e-5
    p0: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    q0: float = 0.8
    q1: float = 0.03


def energy_metric(
    states: StateTrajectory,
    accelerations: np.ndarray,
    ep: EnergyParams,
) -> tuple[np.ndarray, float]:
    """Per-vehicle and total fuel over the horizon.

    accelerations is the (r+1, n) node series (see acceleration_series);
    time integrals use the trapezoid rule on the state grid.
    """
    if accelerations.shape != states.v.shape:
        raise ValueError("accelerations must match the trajectory shape")
    w = _trapezoid_weights(states.grid)
    v = states.v
    up = np.maximum(accelerations, 0.0)
    per_vehicle = (
        ep.C0
        + ep.C1 * (states.x[-1] - states.x[0])
        + ep.p0 * v[-1]
        + 0.5 * ep.p1 * v[-1] ** 2
        + ep.p2 / 3.0 * v[-1] ** 3
        + ep.C2 * (w @ v**2)
        + ep.C3 * (w @ v**3)
        + w @ ((ep.q0 + ep.q1 * v) * up**2)
    )
    return per_vehicle, float(per_vehicle.sum())


@dataclass(frozen=True)
class Metrics:
    """Headline evaluation numbers for one simulated platoon trajectory."""

    n_vehicles: int
    horizon: float
    per_vehicle_sq_acc: np.ndarray
    total_sq_acc: float
    per_vehicle_fuel: np.ndarray
    total_fuel: float


def compute_metrics(
    states: StateTrajectory,
    layout: PlatoonLayout,
    params: ModelParams,
    leader: LeaderTrajectory,
    c: ControlSchedule | None,
    energy: EnergyParams,
) -> Metrics:
    """Total squared acceleration and fuel for a stored trajectory.

    HV columns integrate the recomputed Bando-FtL acceleration with the
    trapezoid rule; AV columns integrate the piecewise-constant control
    exactly. The acceleration metric equals the "full" objective with
    penalties off.
    """
    acc = acceleration_series(states, layout, params, leader, c)
    w = _trapezoid_weights(states.grid)
    per_sq = w @ acc**2
    if layout.n_av:
        assert c is not None
        dtau = np.diff(c.tau)
        per_sq[list(layout.av_indices)] = dtau @ c.omega**2
    per_fuel, total_fuel = energy_metric(states, acc, energy)
    return Metrics(
        n_vehicles=layout.n_vehicles,
        horizon=states.horizon,
        per_vehicle_sq_acc=per_sq,
        total_sq_acc=float(per_sq.sum()),
        per_vehicle_fuel=per_fuel,
        total_fuel=total_fuel,
    )

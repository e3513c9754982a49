"""Platoon state types and forward simulation of the coupled ODE.

A platoon of n vehicles follows one exogenous leader. Human-driven
vehicles (HVs) accelerate per the Bando-FtL model; automated vehicles
(AVs) apply a directly commanded acceleration, piecewise constant on a
coarse control grid. The state y = (x_1..x_n, v_1..v_n) evolves on a
uniform fine grid S integrated with an explicit third-order Runge-Kutta
scheme (fixed step, no adaptivity); leader values at stage times come
from cubic Hermite interpolation of its samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import ModelParams, bando_ftl_acc

__all__ = [
    "CollisionError",
    "PlatoonLayout",
    "InitialState",
    "LeaderTrajectory",
    "ControlSchedule",
    "StateTrajectory",
    "control_value_at",
    "rhs",
    "simulate_forward",
    "acceleration_series",
    "uniform_grid",
]

_GRID_TOL = 1e-9


class CollisionError(RuntimeError):
    """A bumper-to-bumper gap closed during simulation.

    For an HV this indicates a mis-posed scenario or integrator blow-up
    (the continuous model keeps HV gaps positive); for an AV it signals an
    infeasible control, which the optimizer treats as a rejected step.
    """

    def __init__(self, vehicle: int, time: float, is_av: bool):
        self.vehicle = vehicle
        self.time = time
        self.is_av = is_av
        kind = "AV" if is_av else "HV"
        super().__init__(f"gap of {kind} {vehicle} closed at t = {time:.3f} s")


def uniform_grid(horizon: float, dt: float) -> np.ndarray:
    """Uniform grid 0 = t_0 < ... < t_r = horizon with step dt."""
    if not (horizon > 0.0 and dt > 0.0):
        raise ValueError("horizon and dt must be positive")
    r = round(horizon / dt)
    if r < 1 or abs(r * dt - horizon) > _GRID_TOL * max(1.0, horizon):
        raise ValueError(f"horizon {horizon!r} is not an integer multiple of dt {dt!r}")
    return np.arange(r + 1) * dt


@dataclass(frozen=True)
class PlatoonLayout:
    """Which of the n platoon slots (0 = directly behind the leader) are AVs."""

    n_vehicles: int
    av_indices: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.n_vehicles < 1:
            raise ValueError("platoon needs at least one vehicle")
        idx = tuple(int(i) for i in self.av_indices)
        if list(idx) != sorted(set(idx)):
            raise ValueError(f"av_indices must be sorted and unique, got {self.av_indices!r}")
        if idx and (idx[0] < 0 or idx[-1] >= self.n_vehicles):
            raise ValueError(f"av_indices out of range for {self.n_vehicles} vehicles: {idx!r}")
        object.__setattr__(self, "av_indices", idx)

    @property
    def n_av(self) -> int:
        return len(self.av_indices)

    @property
    def hv_indices(self) -> tuple[int, ...]:
        av = set(self.av_indices)
        return tuple(i for i in range(self.n_vehicles) if i not in av)

    def is_av_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vehicles, dtype=np.bool_)
        mask[list(self.av_indices)] = True
        return mask


@dataclass(frozen=True)
class InitialState:
    """Positions and speeds at t = 0, ordered leader-side first."""

    x0: np.ndarray
    v0: np.ndarray

    def __post_init__(self) -> None:
        x0 = np.asarray(self.x0, dtype=float)
        v0 = np.asarray(self.v0, dtype=float)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "v0", v0)
        if x0.ndim != 1 or x0.shape != v0.shape:
            raise ValueError("x0 and v0 must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(v0))):
            raise ValueError("initial state must be finite")
        if np.any(np.diff(x0) >= 0.0):
            raise ValueError("positions must be strictly decreasing from the leader backwards")
        if np.any(v0 < 0.0):
            raise ValueError("initial speeds must be nonnegative")

    @property
    def n(self) -> int:
        return self.x0.shape[0]


@dataclass(frozen=True)
class LeaderTrajectory:
    """Exogenous leader sampled on a uniform grid: position, speed, acceleration."""

    grid: np.ndarray
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        for name in ("x", "v", "a"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape != grid.shape:
                raise ValueError(f"leader {name} must match grid shape")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"leader {name} must be finite")
        object.__setattr__(self, "grid", grid)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("leader grid needs at least two samples")
        steps = np.diff(grid)
        if np.any(steps <= 0.0) or np.ptp(steps) > _GRID_TOL * max(1.0, grid[-1]):
            raise ValueError("leader grid must be uniform and increasing")
        if np.any(self.v < 0.0):
            raise ValueError("leader speeds must be nonnegative")
        residual = np.abs(np.diff(self.x) - 0.5 * steps * (self.v[:-1] + self.v[1:]))
        worst = float(residual.max())
        if worst > 1e-3:
            raise ValueError(
                f"leader position/speed samples are inconsistent: worst trapezoid "
                f"residual {worst:.3e} m at step {int(residual.argmax())}"
            )

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def state_at(self, t: float) -> tuple[float, float]:
        """Leader (position, speed) at time t by per-cell cubic Hermite."""
        if t < self.grid[0] - _GRID_TOL or t > self.grid[-1] + _GRID_TOL:
            raise ValueError(f"t = {t!r} outside leader horizon [0, {self.horizon!r}]")
        dt = self.dt
        j = min(max(int((t - self.grid[0]) / dt), 0), self.grid.size - 2)
        s = (t - self.grid[j]) / dt
        x = _kernels._hermite(self.x[j], self.x[j + 1], self.v[j], self.v[j + 1], dt, s)
        v = _kernels._hermite(self.v[j], self.v[j + 1], self.a[j], self.a[j + 1], dt, s)
        return float(x), float(v)


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant AV accelerations on the control grid tau.

    omega[k, m] is the acceleration of the m-th AV (in av_indices order)
    on [tau_k, tau_{k+1}); the value is right-continuous in t and the last
    interval includes its right endpoint.
    """

    tau: np.ndarray
    omega: np.ndarray

    def __post_init__(self) -> None:
        tau = np.asarray(self.tau, dtype=float)
        omega = np.asarray(self.omega, dtype=float)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "omega", omega)
        if tau.ndim != 1 or tau.size < 2:
            raise ValueError("tau needs at least two boundaries")
        if abs(tau[0]) > _GRID_TOL:
            raise ValueError("control grid must start at t = 0")
        if np.any(np.diff(tau) <= 0.0):
            raise ValueError("tau must be strictly increasing")
        if omega.ndim != 2 or omega.shape[0] != tau.size - 1:
            raise ValueError("omega must have one row per control interval")
        if not np.all(np.isfinite(omega)):
            raise ValueError("control values must be finite")

    @classmethod
    def zeros(cls, horizon: float, dt_control: float, n_av: int) -> "ControlSchedule":
        tau = uniform_grid(horizon, dt_control)
        return cls(tau, np.zeros((tau.size - 1, n_av)))

    @property
    def n_intervals(self) -> int:
        return self.omega.shape[0]

    @property
    def n_av(self) -> int:
        return self.omega.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.tau[-1])

    def interval_of(self, t: float) -> int:
        """Index of the interval containing t (right-continuous, last closed)."""
        if t < -_GRID_TOL or t > self.tau[-1] + _GRID_TOL:
            raise ValueError(f"t = {t!r} outside control horizon [0, {self.horizon!r}]")
        k = int(np.searchsorted(self.tau, t, side="right")) - 1
        return min(max(k, 0), self.n_intervals - 1)

    def replace_omega(self, omega: np.ndarray) -> "ControlSchedule":
        return ControlSchedule(self.tau, omega)


def control_value_at(c: ControlSchedule, t: float, layout: PlatoonLayout) -> np.ndarray:
    """Length-n acceleration command at time t: omega at AV slots, 0 at HV slots."""
    if c.n_av != layout.n_av:
        raise ValueError("schedule width does not match layout AV count")
    u = np.zeros(layout.n_vehicles)
    if layout.n_av:
        u[list(layout.av_indices)] = c.omega[c.interval_of(t)]
    return u


@dataclass(frozen=True)
class StateTrajectory:
    """Positions and speeds of all platoon vehicles on the state grid."""

    grid: np.ndarray
    x: np.ndarray
    v: np.ndarray

    @property
    def n_vehicles(self) -> int:
        return self.x.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def headways(self, params: ModelParams, leader: LeaderTrajectory) -> np.ndarray:
        """Bumper-to-bumper gap of every vehicle to its predecessor, (r+1, n)."""
        lead_x = np.concatenate([leader.x[:, None], self.x[:, :-1]], axis=1)
        return lead_x - self.x - params.vehicle_length


def rhs(
    t: float,
    y: np.ndarray,
    u: np.ndarray,
    layout: PlatoonLayout,
    params: ModelParams,
    leader: LeaderTrajectory,
) -> np.ndarray:
    """Time derivative of the stacked state y = (x, v) under command u.

    Reference (non-compiled) evaluation of the coupled platoon ODE; the
    simulation kernels use the same formulas. u must be a full length-n
    vector (HV entries are ignored).
    """
    n = layout.n_vehicles
    y = np.asarray(y, dtype=float)
    if y.shape != (2 * n,):
        raise ValueError(f"y must have shape ({2 * n},)")
    x, v = y[:n], y[n:]
    lead_x, lead_v = leader.state_at(t)
    xl = np.concatenate([[lead_x], x[:-1]])
    vl = np.concatenate([[lead_v], v[:-1]])
    hv = list(layout.hv_indices)
    acc = np.asarray(u, dtype=float).copy()
    if hv:
        gaps = xl[hv] - x[hv] - params.vehicle_length
        if np.any(gaps <= 0.0):
            bad = hv[int(np.argmax(gaps <= 0.0))]
            raise CollisionError(bad, t, is_av=False)
        acc[hv] = bando_ftl_acc(x[hv], xl[hv], v[hv], vl[hv], params)
    return np.concatenate([v, acc])


def _boundary_indices(tau: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Indices of the control boundaries on the state grid; errors if off-grid."""
    dt = float(grid[1] - grid[0])
    idx = np.round((tau - grid[0]) / dt).astype(int)
    if idx[0] != 0 or idx[-1] != grid.size - 1:
        raise ValueError("control grid must span exactly the state grid horizon")
    ref = grid[np.clip(idx, 0, grid.size - 1)]
    if np.any(np.abs(tau - ref) > 1e-6 * max(1.0, float(grid[-1]))):
        raise ValueError("every control boundary must lie on the state grid")
    return idx


def _cell_intervals(tau: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Control-interval index of every state-grid cell."""
    idx = _boundary_indices(tau, grid)
    cells = np.arange(grid.size - 1)
    return (np.searchsorted(idx, cells, side="right") - 1).astype(np.int64)


def _node_intervals(tau: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Right-continuous control-interval index of every state-grid node."""
    idx = _boundary_indices(tau, grid)
    nodes = np.arange(grid.size)
    return np.clip(np.searchsorted(idx, nodes, side="right") - 1, 0, tau.size - 2)


def expand_controls(c: ControlSchedule, layout: PlatoonLayout) -> np.ndarray:
    """omega scattered to full platoon width: (n_intervals, n_vehicles)."""
    full = np.zeros((c.n_intervals, layout.n_vehicles))
    if layout.n_av:
        full[:, list(layout.av_indices)] = c.omega
    return full


def simulate_forward(
    layout: PlatoonLayout,
    params: ModelParams,
    leader: LeaderTrajectory,
    c: ControlSchedule,
    init: InitialState,
    grid: np.ndarray | None = None,
) -> StateTrajectory:
    """Integrate the platoon over the leader's horizon.

    Args:
        layout: platoon composition.
        params: Bando-FtL parameters.
        leader: leader samples; its grid is the state grid S, so it must
            already be sampled at the simulation resolution.
        c: AV control schedule; boundaries must lie on S and span it.
        init: initial positions/speeds; vehicle 0 must start behind the
            leader with a positive gap, as must every follower.
        grid: optional explicit state grid; must equal the leader grid.

    Raises:
        CollisionError: if any bumper-to-bumper gap closes, at a node for
            any vehicle or at an RK stage for an HV.
    """
    if grid is None:
        grid = leader.grid
    elif grid.shape != leader.grid.shape or np.any(np.abs(grid - leader.grid) > _GRID_TOL):
        raise ValueError("state grid must coincide with the leader sampling grid")
    if init.n != layout.n_vehicles:
        raise ValueError("initial state size does not match layout")
    if c.n_av != layout.n_av:
        raise ValueError("schedule width does not match layout AV count")
    gaps0 = np.concatenate([[leader.x[0]], init.x0[:-1]]) - init.x0 - params.vehicle_length
    if np.any(gaps0 <= 0.0):
        bad = int(np.argmax(gaps0 <= 0.0))
        raise CollisionError(bad, 0.0, is_av=bad in layout.av_indices)
    cell_iv = _cell_intervals(c.tau, grid)
    omega_full = expand_controls(c, layout)
    is_av = layout.is_av_mask()
    xs, vs, status, vehicle, step = _kernels.forward_rk3(
        np.ascontiguousarray(init.x0),
        np.ascontiguousarray(init.v0),
        np.ascontiguousarray(leader.x),
        np.ascontiguousarray(leader.v),
        np.ascontiguousarray(leader.a),
        np.ascontiguousarray(omega_full),
        cell_iv,
        float(grid[1] - grid[0]),
        is_av,
        params.alpha,
        params.beta,
        params.vehicle_length,
        params.v_max,
        params.d_s,
    )
    if status == _kernels.STATUS_COLLISION:
        raise CollisionError(int(vehicle), float(grid[step]), is_av=bool(is_av[vehicle]))
    return StateTrajectory(grid=grid, x=xs, v=vs)


def acceleration_series(
    states: StateTrajectory,
    layout: PlatoonLayout,
    params: ModelParams,
    leader: LeaderTrajectory,
    c: ControlSchedule | None = None,
) -> np.ndarray:
    """Acceleration of every vehicle at every node, (r+1, n).

    HV columns recompute the Bando-FtL acceleration from the stored states;
    AV columns take the commanded control, right-continuous at interval
    boundaries (the final node uses the last interval).
    """
    lead_x = np.concatenate([leader.x[:, None], states.x[:, :-1]], axis=1)
    lead_v = np.concatenate([leader.v[:, None], states.v[:, :-1]], axis=1)
    acc = bando_ftl_acc(states.x, lead_x, states.v, lead_v, params)
    if layout.n_av:
        if c is None:
            raise ValueError("a control schedule is required when the layout has AVs")
        node_iv = _node_intervals(c.tau, states.grid)
        acc[:, list(layout.av_indices)] = c.omega[node_iv, :]
    return acc

"""Penalty-escalation solver with adjoint gradients.

The solver runs an outer loop that grows the quadratic penalty weight mu
until the optimized trajectory passes a feasibility audit, and an inner
projected gradient descent with a backtracking Armijo line search. A
collision during a trial step is treated as an infinite objective and the
step is rejected, so the line search may probe infeasible controls without
crashing the run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .adjoint import adjoint_gradient
from .dynamics import (
    CollisionError,
    ControlSchedule,
    LeaderTrajectory,
    PlatoonLayout,
    StateTrajectory,
)
from .model import ModelParams
from .objective import Metrics, ObjectiveConfig, compute_metrics
from .problem import OcProblem

__all__ = [
    "SolverOptions",
    "ChannelMargin",
    "FeasibilityReport",
    "OptimizationResult",
    "LineSearchResult",
    "audit_feasibility",
    "line_search",
    "solve",
    "warm_start_penetration",
]


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for the penalty loop, the descent loop, and the line search.

    ``grad_tol`` is compared against the root-mean-square of the projected
    gradient, so it is independent of how many control parameters the
    problem has. ``violation_tol`` applies to headway margins in meters and
    to the velocity margin in m/s. ``box`` activates hard clipping of every
    iterate to [a_min, a_max]; it is off by default because small controls
    already fall out of the objective.
    """

    mu0: float = 10.0
    mu_growth: float = 10.0
    mu_max: float = 1e7
    outer_max: int = 8
    inner_max: int = 200
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    step0: float = 1.0
    step_min: float = 1e-14
    grad_tol: float = 1e-6
    violation_tol: float = 1e-3
    box: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.mu0 <= 0.0 or self.mu_growth <= 1.0 or self.mu_max < self.mu0:
            raise ValueError("need mu0 > 0, mu_growth > 1, mu_max >= mu0")
        if self.outer_max < 1 or self.inner_max < 1:
            raise ValueError("iteration limits must be at least 1")
        if not (0.0 < self.armijo_c < 1.0 and 0.0 < self.armijo_shrink < 1.0):
            raise ValueError("armijo_c and armijo_shrink must lie in (0, 1)")
        if self.step0 <= 0.0 or self.step_min <= 0.0 or self.step_min > self.step0:
            raise ValueError("need 0 < step_min <= step0")
        if self.grad_tol <= 0.0 or self.violation_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.box is not None:
            lo, hi = self.box
            if not lo < hi:
                raise ValueError(f"empty control box {self.box!r}")


@dataclass(frozen=True)
class ChannelMargin:
    """Worst signed margin of one constraint channel (negative = violated)."""

    margin: float
    time: float
    vehicle: int


@dataclass(frozen=True)
class FeasibilityReport:
    """Signed margins of the three state constraints, AV slots only.

    min_headway reports min(gap - d_safe), max_headway reports
    min(d_max - gap), velocity reports min(v); each with the sample time
    and vehicle index where the minimum occurs.
    """

    min_headway: ChannelMargin
    max_headway: ChannelMargin
    velocity: ChannelMargin

    @property
    def worst(self) -> float:
        return min(self.min_headway.margin, self.max_headway.margin, self.velocity.margin)

    def violations(self) -> np.ndarray:
        """Nonnegative violation magnitudes (min-headway, max-headway, velocity)."""
        margins = np.array(
            [self.min_headway.margin, self.max_headway.margin, self.velocity.margin]
        )
        return np.maximum(0.0, -margins)

    def satisfied(self, tol: float) -> bool:
        return self.worst >= -tol


def _worst_channel(values: np.ndarray, grid: np.ndarray, av: list[int]) -> ChannelMargin:
    k = int(np.argmin(values))
    row, col = np.unravel_index(k, values.shape)
    return ChannelMargin(float(values[row, col]), float(grid[row]), av[col])


def audit_feasibility(
    states: StateTrajectory,
    obj: ObjectiveConfig,
    layout: PlatoonLayout,
    params: ModelParams,
    leader: LeaderTrajectory,
) -> FeasibilityReport:
    """Scan a stored trajectory for violations of the penalized constraints.

    Covers exactly the quantities the penalty terms act on: headway and
    speed of the AV slots, at every sample of the state grid. A platoon
    without AVs has nothing to audit and reports infinite margins.
    """
    av = list(layout.av_indices)
    if not av:
        empty = ChannelMargin(np.inf, np.nan, -1)
        return FeasibilityReport(empty, empty, empty)
    hw = states.headways(params, leader)[:, av]
    return FeasibilityReport(
        min_headway=_worst_channel(hw - obj.d_safe, states.grid, av),
        max_headway=_worst_channel(obj.d_max - hw, states.grid, av),
        velocity=_worst_channel(states.v[:, av], states.grid, av),
    )


def _objective_or_inf(
    problem: OcProblem, c: ControlSchedule
) -> tuple[float, StateTrajectory | None]:
    try:
        states = problem.simulate(c)
    except CollisionError:
        return np.inf, None
    return problem.objective(c, states), states


class LineSearchResult(NamedTuple):
    step: float
    omega: ControlSchedule
    objective: float
    states: StateTrajectory | None
    stalled: bool
    n_evals: int


def line_search(
    problem: OcProblem,
    omega: ControlSchedule,
    grad: np.ndarray,
    step0: float,
    opts: SolverOptions,
    f0: float | None = None,
    states0: StateTrajectory | None = None,
) -> LineSearchResult:
    """Backtracking Armijo search along the negative gradient.

    Accepts the first step s with J(clip(omega - s*grad)) <= J(omega) -
    armijo_c * s * ||grad||^2. Trial controls that collide evaluate to
    +inf and are simply shrunk past. Returns a stall (step 0, omega
    unchanged) instead of raising when the gradient is zero or the step
    underflows step_min.
    """
    if f0 is None:
        states0 = problem.simulate(omega)
        f0 = problem.objective(omega, states0)
    gsq = float(np.sum(grad * grad))
    if gsq == 0.0:
        return LineSearchResult(0.0, omega, f0, states0, True, 0)
    s = float(step0)
    n_evals = 0
    while s >= opts.step_min:
        trial = omega.omega - s * grad
        if opts.box is not None:
            np.clip(trial, opts.box[0], opts.box[1], out=trial)
        c_trial = omega.replace_omega(trial)
        f_trial, states = _objective_or_inf(problem, c_trial)
        n_evals += 1
        if f_trial <= f0 - opts.armijo_c * s * gsq:
            return LineSearchResult(s, c_trial, f_trial, states, False, n_evals)
        s *= opts.armijo_shrink
    return LineSearchResult(0.0, omega, f0, states0, True, n_evals)


def _projected_residual(
    c: ControlSchedule, grad: np.ndarray, box: tuple[float, float] | None
) -> float:
    """RMS of the projected gradient (plain gradient when no box is set)."""
    if grad.size == 0:
        return 0.0
    if box is None:
        r = grad
    else:
        r = c.omega - np.clip(c.omega - grad, box[0], box[1])
    return float(np.sqrt(np.mean(r * r)))


def _inner_descent(
    problem: OcProblem, c: ControlSchedule, opts: SolverOptions
) -> tuple[ControlSchedule, StateTrajectory, list[float], str]:
    states = problem.simulate(c)
    f = problem.objective(c, states)
    history = [f]
    step = opts.step0
    prev: tuple[np.ndarray, np.ndarray] | None = None
    reason = "inner iteration limit"
    for it in range(opts.inner_max):
        grad, states = adjoint_gradient(problem, c, states)
        if _projected_residual(c, grad, opts.box) <= opts.grad_tol:
            reason = "stationary"
            break
        # Spectral (Barzilai-Borwein) trial step; the objective is nearly
        # quadratic in omega but badly conditioned, and the BB step tracks
        # its local curvature far better than any fixed step. Armijo
        # backtracking below still decides acceptance.
        start = opts.step0 if it == 0 else min(opts.step0, 2.0 * step)
        if prev is not None:
            dw = c.omega - prev[0]
            dy = grad - prev[1]
            sy = float(np.sum(dw * dy))
            if sy > 0.0:
                start = float(np.clip(np.sum(dw * dw) / sy, opts.step_min, 1e12))
        prev = (c.omega, grad)
        res = line_search(problem, c, grad, start, opts, f0=f, states0=states)
        if res.stalled:
            reason = "line search stalled"
            break
        c, f, states, step = res.omega, res.objective, res.states, res.step
        history.append(f)
    return c, states, history, reason


@dataclass(frozen=True)
class OptimizationResult:
    """Final schedule plus the run records of a penalty-loop solve.

    objective_history holds the penalized objective at every accepted
    iterate, concatenated across outer passes; outer_starts indexes where
    each pass begins (the value of mu jumps there, so the history is only
    guaranteed nonincreasing between consecutive starts).
    violation_history has one row per outer pass: nonnegative violation
    magnitudes for min-headway (m), max-headway (m), velocity (m/s).
    """

    omega_star: ControlSchedule
    states: StateTrajectory
    converged: bool
    reason: str
    objective_history: np.ndarray
    outer_starts: np.ndarray
    violation_history: np.ndarray
    final_metrics: Metrics
    mu_final: float
    layout: PlatoonLayout


def solve(problem: OcProblem, opts: SolverOptions, init: ControlSchedule) -> OptimizationResult:
    """Minimize the objective over piecewise-constant AV controls.

    Runs inner gradient descents at mu = mu0, mu0 * mu_growth, ... (the mu
    stored in problem.obj is ignored; the schedule always starts at
    opts.mu0), warm-starting each pass from the previous optimum, and stops
    as soon as the audited constraint violations are all within
    violation_tol. The initial schedule must simulate without collision.

    Raises ValueError for a schedule that does not match the layout or
    sits outside an enabled control box, and propagates CollisionError
    when the initial schedule itself is infeasible.
    """
    if init.n_av != problem.layout.n_av:
        raise ValueError(
            f"initial schedule has {init.n_av} AV columns, layout has {problem.layout.n_av}"
        )
    if opts.box is not None and (
        np.any(init.omega < opts.box[0]) or np.any(init.omega > opts.box[1])
    ):
        raise ValueError("initial schedule violates the control box")

    c = init
    mu = opts.mu0
    history: list[float] = []
    outer_starts: list[int] = []
    violations: list[np.ndarray] = []
    converged = False
    reason = ""
    for _ in range(opts.outer_max):
        outer_starts.append(len(history))
        c, states, inner_history, inner_reason = _inner_descent(problem.with_mu(mu), c, opts)
        history.extend(inner_history)
        report = audit_feasibility(
            states, problem.obj, problem.layout, problem.params, problem.leader
        )
        violations.append(report.violations())
        if report.satisfied(opts.violation_tol):
            converged = True
            reason = f"constraints satisfied at mu = {mu:g} ({inner_reason})"
            break
        if mu >= opts.mu_max:
            reason = f"mu_max reached, worst violation {-report.worst:.3e}"
            break
        mu = min(mu * opts.mu_growth, opts.mu_max)
    else:
        reason = f"outer iteration limit, worst violation {-report.worst:.3e}"

    metrics = compute_metrics(
        states, problem.layout, problem.params, problem.leader, c, problem.energy
    )
    return OptimizationResult(
        omega_star=c,
        states=states,
        converged=converged,
        reason=reason,
        objective_history=np.asarray(history),
        outer_starts=np.asarray(outer_starts, dtype=int),
        violation_history=np.asarray(violations),
        final_metrics=metrics,
        mu_final=mu,
        layout=problem.layout,
    )


def warm_start_penetration(
    prev: OptimizationResult, new_layout: PlatoonLayout, u_init: np.ndarray
) -> ControlSchedule:
    """Initial schedule for a run with one more AV appended upstream.

    Existing AV columns are copied from the previous optimum; the new AV
    (which must be the last av_indices entry) starts from u_init, the
    per-interval schedule optimized for a single AV alone behind the
    leader.
    """
    old = prev.layout
    if new_layout.n_vehicles != old.n_vehicles:
        raise ValueError("penetration step must keep the platoon size")
    if new_layout.n_av != old.n_av + 1:
        raise ValueError("new layout must add exactly one AV")
    if new_layout.av_indices[: old.n_av] != old.av_indices:
        raise ValueError(
            f"existing AV slots changed: {old.av_indices!r} -> {new_layout.av_indices!r}"
        )
    u = np.asarray(u_init, dtype=float).reshape(-1)
    if u.size != prev.omega_star.n_intervals:
        raise ValueError(
            f"u_init has {u.size} intervals, schedule has {prev.omega_star.n_intervals}"
        )
    return ControlSchedule(prev.omega_star.tau, np.column_stack([prev.omega_star.omega, u]))

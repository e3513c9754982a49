"""Bando-Follow-the-Leader car-following model and its analytic properties.

All quantities are SI: positions in m, speeds in m/s, accelerations in m/s^2.
Headway h always means front-bumper-to-rear-bumper gap, i.e.
``x_lead - x - vehicle_length``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelParams",
    "WellPosednessBounds",
    "optimal_velocity",
    "optimal_velocity_deriv",
    "equilibrium_headway",
    "bando_ftl_acc",
    "bando_ftl_partials",
    "theorem_bounds",
    "safe_min_deceleration",
]


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the Bando-FtL model.

    Attributes:
        alpha: gain on the optimal-velocity relaxation term (1/s).
        beta: gain on the follow-the-leader term (m^2/s).
        vehicle_length: physical vehicle length l (m).
        v_max: free-flow speed, the supremum of the optimal-velocity
            function (m/s).
        d_s: desired-headway offset of the optimal-velocity function (m).
            Headways near d_s give roughly half of v_max.
    """

    alpha: float = 0.1
    beta: float = 525.0
    vehicle_length: float = 4.5
    v_max: float = 30.0
    d_s: float = 20.0

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "vehicle_length", "v_max", "d_s"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"ModelParams.{name} must be positive, got {value!r}")


def _ov_denominator(p: ModelParams) -> float:
    return 1.0 + math.tanh(p.vehicle_length + p.d_s)


def optimal_velocity(h, p: ModelParams):
    """Optimal-velocity function V(h).

    V(h) = v_max * (tanh(h - d_s) + tanh(l + d_s)) / (1 + tanh(l + d_s)).

    Monotone increasing in h, positive for h > 0, and V(h) -> v_max as
    h -> inf. Accepts scalars or numpy arrays. Raises for h <= 0: a
    non-positive headway is a collision state, never a valid query.
    """
    if np.any(np.asarray(h) <= 0.0):
        raise ValueError("optimal_velocity requires positive headway")
    return p.v_max * (np.tanh(h - p.d_s) + math.tanh(p.vehicle_length + p.d_s)) / _ov_denominator(p)


def optimal_velocity_deriv(h, p: ModelParams):
    """Derivative V'(h) = v_max * sech^2(h - d_s) / (1 + tanh(l + d_s))."""
    if np.any(np.asarray(h) <= 0.0):
        raise ValueError("optimal_velocity_deriv requires positive headway")
    return p.v_max / (np.cosh(h - p.d_s) ** 2 * _ov_denominator(p))


def equilibrium_headway(v: float, p: ModelParams) -> float:
    """Headway h* with V(h*) = v, the uniform-flow equilibrium gap.

    Inverse of :func:`optimal_velocity`; requires 0 < v < v_max.
    """
    if not 0.0 < v < p.v_max:
        raise ValueError(f"equilibrium speed must lie in (0, v_max), got {v!r}")
    target = v * _ov_denominator(p) / p.v_max - math.tanh(p.vehicle_length + p.d_s)
    if not -1.0 < target < 1.0:
        raise ValueError(f"no positive equilibrium headway for speed {v!r}")
    return p.d_s + math.atanh(target)


def bando_ftl_acc(x, x_lead, v, v_lead, p: ModelParams):
    """Acceleration of a human-driven vehicle following (x_lead, v_lead).

    Acc = alpha * (V(h) - v) + beta * (v_lead - v) / h^2 with
    h = x_lead - x - vehicle_length. Requires h > 0. Accepts scalars or
    numpy arrays (elementwise).
    """
    h = x_lead - x - p.vehicle_length
    if np.any(h <= 0.0):
        raise ValueError("bando_ftl_acc requires positive headway")
    return p.alpha * (optimal_velocity(h, p) - v) + p.beta * (v_lead - v) / h**2


def bando_ftl_partials(x, x_lead, v, v_lead, p: ModelParams):
    """Partial derivatives of Acc with respect to (x, x_lead, v, v_lead).

    Returns:
        Tuple (d_x, d_xlead, d_v, d_vlead) with
            d_x      = -alpha * V'(h) + 2 beta (v_lead - v) / h^3
            d_xlead  = -d_x
            d_v      = -alpha - beta / h^2
            d_vlead  = +beta / h^2
        where h = x_lead - x - vehicle_length. d_xlead = -d_x holds exactly
        because Acc depends on positions only through their difference.
    """
    h = x_lead - x - p.vehicle_length
    if np.any(h <= 0.0):
        raise ValueError("bando_ftl_partials requires positive headway")
    d_x = -p.alpha * optimal_velocity_deriv(h, p) + 2.0 * p.beta * (v_lead - v) / h**3
    d_v = -p.alpha - p.beta / h**2
    d_vlead = p.beta / h**2
    return d_x, -d_x, d_v, d_vlead


@dataclass(frozen=True)
class WellPosednessBounds:
    """A-priori bounds for one follower over a fixed horizon.

    Produced by :func:`theorem_bounds`. The scalar fields are the worst
    cases over the horizon; the envelope methods give the pointwise-in-time
    bounds they were derived from.

    Attributes:
        A: auxiliary constant -v0 - alpha*T*v_max + alpha*gap0 - beta/gap0.
        d_min: guaranteed lower bound on the headway over [0, T] (m),
            the positive root of alpha*d^2 - A*d - beta = 0.
        B: decay rate alpha + beta/d_min^2 (1/s).
        velocity_upper: supremum of the velocity envelope (m/s).
        acc_lower: infimum of the acceleration envelope (m/s^2).
        acc_upper: supremum of the acceleration envelope (m/s^2).
    """

    A: float
    d_min: float
    B: float
    velocity_upper: float
    acc_lower: float
    acc_upper: float
    v0: float
    v_lead_max: float
    horizon: float
    params: ModelParams

    def velocity_envelope(self, t, v_lead=None):
        """Pointwise velocity bounds (lower, upper) at times t.

        The lower bound v0*exp(-B t) depends on time; the upper bound
        depends on the leader speed (pointwise array, or the stored
        supremum when omitted).
        """
        p = self.params
        if v_lead is None:
            v_lead = self.v_lead_max
        lower = self.v0 * np.exp(-self.B * np.asarray(t, dtype=float))
        upper = np.maximum(self.v0, p.v_max + (p.beta / p.alpha) * np.asarray(v_lead, dtype=float) / self.d_min**2)
        return np.broadcast_arrays(lower, upper)

    def acceleration_envelope(self, t, v_lead=None):
        """Pointwise acceleration bounds (lower, upper) at times t."""
        p = self.params
        if v_lead is None:
            v_lead = self.v_lead_max
        t = np.asarray(t, dtype=float)
        lower = np.full_like(t, -self.B * self.velocity_upper)
        upper = p.alpha * p.v_max - p.alpha * self.v0 * np.exp(-self.B * t) + p.beta * np.asarray(v_lead, dtype=float) / self.d_min**2
        return np.broadcast_arrays(lower, upper)


def theorem_bounds(
    p: ModelParams,
    horizon: float,
    initial_gap: float,
    v0_follower: float,
    v_lead_max: float | None = None,
) -> WellPosednessBounds:
    """A-priori headway/velocity/acceleration bounds for a single follower.

    Args:
        p: model parameters.
        horizon: length T of the time window (s).
        initial_gap: headway at t = 0 (m), must be positive.
        v0_follower: follower speed at t = 0 (m/s), nonnegative.
        v_lead_max: supremum of the leader speed over [0, T]; defaults to
            p.v_max, which covers any leader that respects the model's
            free-flow speed.

    Returns:
        WellPosednessBounds. d_min is always positive, so the follower
        never collides with its leader on [0, T].
    """
    if not initial_gap > 0.0:
        raise ValueError(f"initial_gap must be positive, got {initial_gap!r}")
    if v0_follower < 0.0:
        raise ValueError(f"v0_follower must be nonnegative, got {v0_follower!r}")
    if not horizon > 0.0:
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    if v_lead_max is None:
        v_lead_max = p.v_max
    A = -v0_follower - p.alpha * horizon * p.v_max + p.alpha * initial_gap - p.beta / initial_gap
    d_min = (A + math.sqrt(A * A + 4.0 * p.alpha * p.beta)) / (2.0 * p.alpha)
    B = p.alpha + p.beta / d_min**2
    velocity_upper = max(v0_follower, p.v_max + (p.beta / p.alpha) * v_lead_max / d_min**2)
    acc_lower = -B * velocity_upper
    acc_upper = p.alpha * p.v_max - p.alpha * v0_follower * math.exp(-B * horizon) + p.beta * v_lead_max / d_min**2
    return WellPosednessBounds(
        A=A,
        d_min=d_min,
        B=B,
        velocity_upper=velocity_upper,
        acc_lower=acc_lower,
        acc_upper=acc_upper,
        v0=v0_follower,
        v_lead_max=v_lead_max,
        horizon=horizon,
        params=p,
    )


def safe_min_deceleration(initial_gaps, initial_speeds, d_safe: float) -> float:
    """Largest constant deceleration that keeps every gap above d_safe.

    For a vehicle braking at constant rate a < 0 from speed v, the distance
    to standstill is v^2 / (2|a|). The binding vehicle gives

        a_min = -max_k  v_k^2 / (2 (gap_k - d_safe)),

    so braking at a_min stops the worst-placed vehicle exactly at gap
    d_safe against a frozen leader. Requires every gap > d_safe. Returns
    0.0 when all speeds are zero.
    """
    gaps = np.asarray(initial_gaps, dtype=float)
    speeds = np.asarray(initial_speeds, dtype=float)
    if gaps.shape != speeds.shape:
        raise ValueError("initial_gaps and initial_speeds must have the same shape")
    bad = np.nonzero(gaps <= d_safe)[0]
    if bad.size:
        raise ValueError(f"gaps at indices {bad.tolist()} do not exceed d_safe = {d_safe!r}")
    if np.any(speeds < 0.0):
        raise ValueError("initial_speeds must be nonnegative")
    if gaps.size == 0:
        return 0.0
    return -float(np.max(speeds**2 / (2.0 * (gaps - d_safe))))

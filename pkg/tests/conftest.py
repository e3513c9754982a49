"""Shared builders for platoon test scenarios."""

import numpy as np
import pytest

from platoonopt.dynamics import InitialState, LeaderTrajectory, uniform_grid
from platoonopt.model import ModelParams, equilibrium_headway, optimal_velocity


@pytest.fixture
def params():
    return ModelParams()


def constant_leader(horizon, dt, speed, x_start=0.0):
    """Leader cruising at a fixed speed."""
    grid = uniform_grid(horizon, dt)
    return LeaderTrajectory(
        grid=grid,
        x=x_start + speed * grid,
        v=np.full(grid.size, float(speed)),
        a=np.zeros(grid.size),
    )


def equilibrium_platoon(n, speed, p, leader_x0=0.0):
    """Initial state with every vehicle at the equilibrium gap for ``speed``."""
    spacing = equilibrium_headway(speed, p) + p.vehicle_length
    x0 = leader_x0 - spacing * np.arange(1, n + 1)
    return InitialState(x0=x0, v0=np.full(n, float(speed)))


def spaced_platoon(n, gaps, speeds, p, leader_x0=0.0):
    """Initial state with explicit bumper-to-bumper gaps behind the leader."""
    gaps = np.asarray(gaps, dtype=float)
    speeds = np.asarray(speeds, dtype=float)
    x0 = leader_x0 - np.cumsum(gaps + p.vehicle_length)
    return InitialState(x0=x0, v0=speeds)


def dip_leader(grid, v_base, amp, period, t0=10.0):
    """Single raised-cosine velocity dip with the exact position integral."""
    t = grid
    inside = np.clip(t - t0, 0.0, period)
    phase = 2.0 * np.pi * inside / period
    v = v_base - 0.5 * amp * (1.0 - np.cos(phase))
    a = -(np.pi * amp / period) * np.sin(phase)
    a[(t < t0) | (t > t0 + period)] = 0.0
    x = v_base * t - 0.5 * amp * (inside - (period / (2.0 * np.pi)) * np.sin(phase))
    return LeaderTrajectory(grid=grid, x=x, v=v, a=a)

"""One fully specified optimal-control instance, bundled for solvers."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import (
    ControlSchedule,
    InitialState,
    LeaderTrajectory,
    PlatoonLayout,
    StateTrajectory,
    simulate_forward,
)
from .model import ModelParams
from .objective import EnergyParams, ObjectiveConfig, total_objective

__all__ = ["OcProblem"]


@dataclass(frozen=True)
class OcProblem:
    """Platoon, leader, initial state, and objective on a fixed grid.

    The state grid is the leader's sampling grid; control schedules passed
    to the methods must have their boundaries on it. ``energy`` only feeds
    evaluation metrics, never the objective.
    """

    layout: PlatoonLayout
    params: ModelParams
    leader: LeaderTrajectory
    init: InitialState
    obj: ObjectiveConfig
    energy: EnergyParams = EnergyParams()

    def __post_init__(self) -> None:
        if self.init.n != self.layout.n_vehicles:
            raise ValueError("initial state size does not match layout")
        gap0 = np.concatenate([[self.leader.x[0]], self.init.x0[:-1]]) - self.init.x0
        if np.any(gap0 - self.params.vehicle_length <= 0.0):
            raise ValueError("initial bumper-to-bumper gaps must be positive")

    @property
    def grid(self) -> np.ndarray:
        return self.leader.grid

    @property
    def horizon(self) -> float:
        return self.leader.horizon

    def with_mu(self, mu: float) -> "OcProblem":
        """Copy of this problem with the penalty weight replaced."""
        return replace(self, obj=replace(self.obj, mu=mu))

    def with_objective(self, obj: ObjectiveConfig) -> "OcProblem":
        return replace(self, obj=obj)

    def simulate(self, c: ControlSchedule) -> StateTrajectory:
        return simulate_forward(self.layout, self.params, self.leader, c, self.init)

    def objective(self, c: ControlSchedule, states: StateTrajectory | None = None) -> float:
        """Objective value of a schedule (simulating first unless given a trajectory)."""
        if states is None:
            states = self.simulate(c)
        return total_objective(states, c, self.obj, self.layout, self.params, self.leader)

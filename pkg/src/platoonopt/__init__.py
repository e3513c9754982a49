"""Simulation and adjoint-based optimal control of mixed-autonomy platoons.

A platoon of vehicles follows a leader with a prescribed trajectory. Human
drivers obey the Bando-Follow-the-Leader car-following model; autonomous
vehicles apply piecewise-constant accelerations chosen by a projected
gradient solver whose gradients come from a discrete adjoint sweep. State
constraints (safety gap, maximum gap, nonnegative speed) enter through
quadratic penalties escalated until a feasibility audit passes.

Typical use goes through ``scenario``: load a JSON config, build the
problem, solve, report. The lower layers (model, dynamics, objective,
adjoint, optimizer) are importable on their own for custom setups.
"""

from .model import (
    ModelParams,
    WellPosednessBounds,
    bando_ftl_acc,
    bando_ftl_partials,
    equilibrium_headway,
    optimal_velocity,
    optimal_velocity_deriv,
    safe_min_deceleration,
    theorem_bounds,
)
from .dynamics import (
    CollisionError,
    ControlSchedule,
    InitialState,
    LeaderTrajectory,
    PlatoonLayout,
    StateTrajectory,
    acceleration_series,
    simulate_forward,
    uniform_grid,
)
from .objective import (
    EnergyParams,
    Metrics,
    ObjectiveConfig,
    compute_metrics,
    energy_metric,
    total_objective,
)
from .problem import OcProblem
from .adjoint import adjoint_gradient, finite_difference_gradient
from .optimizer import (
    FeasibilityReport,
    OptimizationResult,
    SolverOptions,
    audit_feasibility,
    solve,
    warm_start_penetration,
)
from .scenario import (
    ConfigError,
    ScenarioConfig,
    baseline_all_human,
    build_leader,
    build_problem,
    initial_schedule,
    load_config,
    load_leader_csv,
    load_trajectories_csv,
    export_trajectories_csv,
    percent_reduction,
    placement_rule,
    relative_difference,
    report,
    simulate_scenario,
    solve_scenario,
    sweep_penetration,
    synth_leader_stop_and_go,
    write_leader_csv,
)

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "WellPosednessBounds",
    "bando_ftl_acc",
    "bando_ftl_partials",
    "equilibrium_headway",
    "optimal_velocity",
    "optimal_velocity_deriv",
    "safe_min_deceleration",
    "theorem_bounds",
    "CollisionError",
    "ControlSchedule",
    "InitialState",
    "LeaderTrajectory",
    "PlatoonLayout",
    "StateTrajectory",
    "acceleration_series",
    "simulate_forward",
    "uniform_grid",
    "EnergyParams",
    "Metrics",
    "ObjectiveConfig",
    "compute_metrics",
    "energy_metric",
    "total_objective",
    "OcProblem",
    "adjoint_gradient",
    "finite_difference_gradient",
    "FeasibilityReport",
    "OptimizationResult",
    "SolverOptions",
    "audit_feasibility",
    "solve",
    "warm_start_penetration",
    "ConfigError",
    "ScenarioConfig",
    "baseline_all_human",
    "build_leader",
    "build_problem",
    "initial_schedule",
    "load_config",
    "load_leader_csv",
    "load_trajectories_csv",
    "export_trajectories_csv",
    "percent_reduction",
    "placement_rule",
    "relative_difference",
    "report",
    "simulate_scenario",
    "solve_scenario",
    "sweep_penetration",
    "synth_leader_stop_and_go",
    "write_leader_csv",
    "__version__",
]

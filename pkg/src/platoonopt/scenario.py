"""Scenario configuration, leader trajectories, baselines, and reporting.

This is the reproducibility harness around the library core: a JSON
config schema with dotted-key overrides, a synthetic stop-and-go leader
generator, a CSV loader for recorded leader trajectories, the all-human
baseline, reduction reports, long-format trajectory export, and the
penetration sweep protocol (one extra AV per leg, warm-started from the
previous optimum).

Every output is a pure function of the config document, so runs are
byte-for-byte reproducible.
"""

from __future__ import annotations

import copy
import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .dynamics import (
    ControlSchedule,
    InitialState,
    LeaderTrajectory,
    PlatoonLayout,
    StateTrajectory,
    acceleration_series,
    simulate_forward,
    uniform_grid,
)
from .model import ModelParams, equilibrium_headway
from .objective import EnergyParams, Metrics, ObjectiveConfig, compute_metrics
from .optimizer import OptimizationResult, SolverOptions, solve, warm_start_penetration
from .problem import OcProblem

__all__ = [
    "Metrics",
    "ScenarioConfig",
    "ConfigError",
    "default_document",
    "apply_overrides",
    "load_config",
    "synth_leader_stop_and_go",
    "load_leader_csv",
    "write_leader_csv",
    "build_leader",
    "build_initial_state",
    "build_problem",
    "mimic_schedule",
    "smoothed_leader_schedule",
    "initial_schedule",
    "baseline_all_human",
    "simulate_scenario",
    "solve_scenario",
    "percent_reduction",
    "relative_difference",
    "ReportRow",
    "ReportTable",
    "report",
    "export_trajectories_csv",
    "load_trajectories_csv",
    "TrajectoryTable",
    "placement_rule",
    "SweepRow",
    "sweep_penetration",
]


class ConfigError(ValueError):
    """A scenario document failed validation."""


# ---------------------------------------------------------------------------
# config schema

_SCHEMA_VERSION = 1

# Sections with a fixed key set are deep-merged onto these defaults; the
# kind-tagged sections ("initial", "leader") are replaced wholesale and
# validated against the per-kind key sets below.
_DEFAULT_DOC: dict = {
    "schema_version": _SCHEMA_VERSION,
    "horizon": 600.0,
    "dt_state": 0.1,
    "dt_control": 5.0,
    "model": {
        "alpha": 0.1,
        "beta": 525.0,
        "vehicle_length": 4.5,
        "v_max": 30.0,
        "d_s": 20.0,
    },
    "platoon": {"n_vehicles": 20, "av_indices": []},
    "initial": {"kind": "equilibrium", "speed": None},
    "objective": {
        "mode": "full",
        "mu": 10.0,
        "d_safe": 5.0,
        "d_max": 120.0,
        "velocity_penalty": True,
    },
    "solver": {
        "mu0": 10.0,
        "mu_growth": 10.0,
        "mu_max": 1e7,
        "outer_max": 8,
        "inner_max": 200,
        "armijo_c": 1e-4,
        "armijo_shrink": 0.5,
        "step0": 1.0,
        "step_min": 1e-14,
        "grad_tol": 1e-6,
        "violation_tol": 1e-3,
        "box": None,
        "init_schedule": "smoothed",
        "init_smooth_window": None,
    },
    "energy": {
        "C0": 0.0,
        "C1": 0.0,
        "C2": 0.0025,
        "C3": 5e-5,
        "p0": 0.0,
        "p1": 0.0,
        "p2": 0.0,
        "q0": 0.8,
        "q1": 0.03,
    },
    "leader": {
        "kind": "synthetic",
        "v_base": 28.0,
        "amplitude": 8.0,
        "period": 20.0,
        "n_waves": 12,
    },
}

_KIND_KEYS = {
    "initial": {
        "equilibrium": {"kind", "speed"},
        "uniform_gap": {"kind", "gap", "speed"},
        "explicit": {"kind", "x0", "v0"},
    },
    "leader": {
        "synthetic": {"kind", "v_base", "amplitude", "period", "n_waves"},
        "csv": {"kind", "path"},
    },
}

_KIND_DEFAULTS = {
    ("initial", "equilibrium"): {"speed": None},
    ("initial", "uniform_gap"): {},
    ("initial", "explicit"): {},
    ("leader", "synthetic"): dict(_DEFAULT_DOC["leader"]),
    ("leader", "csv"): {},
}


def default_document() -> dict:
    """Fresh copy of the complete default scenario document."""
    return copy.deepcopy(_DEFAULT_DOC)


def _merge_document(user: dict) -> dict:
    doc = default_document()
    for key, value in user.items():
        if key not in doc:
            raise ConfigError(f"unknown config key {key!r}")
        if key in ("initial", "leader"):
            if not isinstance(value, dict) or "kind" not in value:
                raise ConfigError(f"{key!r} must be an object with a 'kind' field")
            kind = value["kind"]
            if kind not in _KIND_KEYS[key]:
                options = sorted(_KIND_KEYS[key])
                raise ConfigError(f"{key}.kind must be one of {options}, got {kind!r}")
            merged = dict(_KIND_DEFAULTS[(key, kind)])
            merged.update(value)
            doc[key] = merged
        elif isinstance(doc[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{key!r} must be an object")
            for sub, subval in value.items():
                if sub not in doc[key]:
                    raise ConfigError(f"unknown config key {key}.{sub!r}")
                doc[key][sub] = subval
        else:
            doc[key] = value
    return doc


def _parse_override_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text  # bare strings like csv paths


def apply_overrides(doc: dict, overrides: Sequence[str]) -> dict:
    """Apply ``key.path=value`` pairs in place; unknown paths are rejected."""
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        parts = key.strip().split(".")
        node = doc
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f"override names unknown config key {key.strip()!r}")
            node = node[part]
        leaf = parts[-1]
        if not isinstance(node, dict) or leaf not in node:
            raise ConfigError(f"override names unknown config key {key.strip()!r}")
        node[leaf] = _parse_override_value(raw.strip())
    return doc


def _require_number(doc: dict, path: str, positive: bool = True) -> float:
    node = doc
    for part in path.split("."):
        node = node[part]
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"{path} must be a number, got {node!r}")
    if positive and not node > 0:
        raise ConfigError(f"{path} must be positive, got {node!r}")
    return float(node)


def _validate_grids(horizon: float, dt_state: float, dt_control: float) -> None:
    ratio = dt_control / dt_state
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ConfigError(
            f"dt_control must be an integer multiple of dt_state, got {dt_control}/{dt_state}"
        )
    count = horizon / dt_control
    if abs(count - round(count)) > 1e-9 or round(count) < 1:
        raise ConfigError(
            f"horizon must be an integer number of control intervals, got {horizon}/{dt_control}"
        )


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario: typed components plus the resolved document."""

    horizon: float
    dt_state: float
    dt_control: float
    model: ModelParams
    platoon: PlatoonLayout
    initial: dict
    objective: ObjectiveConfig
    solver: SolverOptions
    energy: EnergyParams
    leader_spec: dict
    init_schedule: str
    init_smooth_window: float | None
    document: dict
    base_dir: Path

    def to_json(self) -> str:
        return json.dumps(self.document, indent=2, sort_keys=True)


def load_config(
    source: str | Path | dict,
    overrides: Sequence[str] = (),
    base_dir: str | Path | None = None,
) -> ScenarioConfig:
    """Parse, merge with defaults, override, validate, and type a scenario.

    ``source`` is a JSON file path or an already-parsed document. Relative
    leader CSV paths resolve against the config file's directory; pass
    ``base_dir`` to anchor them when loading from a dict (default: the
    working directory).
    """
    if isinstance(source, dict):
        user = copy.deepcopy(source)
        if base_dir is None:
            base_dir = Path.cwd()
    else:
        path = Path(source)
        try:
            user = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        if base_dir is None:
            base_dir = path.parent
    if not isinstance(user, dict):
        raise ConfigError("config document must be a JSON object")
    base_dir = Path(base_dir)

    doc = _merge_document(user)
    apply_overrides(doc, overrides)

    if doc["schema_version"] != _SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {doc['schema_version']!r}, expected {_SCHEMA_VERSION}"
        )
    horizon = _require_number(doc, "horizon")
    dt_state = _require_number(doc, "dt_state")
    dt_control = _require_number(doc, "dt_control")
    _validate_grids(horizon, dt_state, dt_control)

    try:
        model = ModelParams(**{k: float(v) for k, v in doc["model"].items()})
        platoon = PlatoonLayout(
            n_vehicles=int(doc["platoon"]["n_vehicles"]),
            av_indices=tuple(int(i) for i in doc["platoon"]["av_indices"]),
        )
        o = doc["objective"]
        objective = ObjectiveConfig(
            mode=o["mode"],
            mu=float(o["mu"]),
            d_safe=float(o["d_safe"]),
            d_max=float(o["d_max"]),
            velocity_penalty=bool(o["velocity_penalty"]),
        )
        s = dict(doc["solver"])
        init_schedule = s.pop("init_schedule")
        init_smooth_window = s.pop("init_smooth_window")
        if init_smooth_window is not None:
            init_smooth_window = float(init_smooth_window)
        box = s.pop("box")
        solver = SolverOptions(
            **{k: (int(v) if k in ("outer_max", "inner_max") else float(v)) for k, v in s.items()},
            box=None if box is None else (float(box[0]), float(box[1])),
        )
        energy = EnergyParams(**{k: float(v) for k, v in doc["energy"].items()})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid config value: {e}") from e
    if init_schedule not in ("smoothed", "mimic", "zeros"):
        raise ConfigError(
            f"solver.init_schedule must be 'smoothed', 'mimic', or 'zeros', got {init_schedule!r}"
        )
    if init_smooth_window is not None and init_smooth_window <= 0:
        raise ConfigError("solver.init_smooth_window must be positive or null")

    leader_spec = doc["leader"]
    extra = set(leader_spec) - _KIND_KEYS["leader"][leader_spec["kind"]]
    if extra:
        raise ConfigError(f"leader section has keys {sorted(extra)} not valid for its kind")
    missing = _KIND_KEYS["leader"][leader_spec["kind"]] - set(leader_spec)
    if missing:
        raise ConfigError(f"leader section is missing {sorted(missing)}")
    initial_spec = doc["initial"]
    extra = set(initial_spec) - _KIND_KEYS["initial"][initial_spec["kind"]]
    if extra:
        raise ConfigError(f"initial section has keys {sorted(extra)} not valid for its kind")
    missing = _KIND_KEYS["initial"][initial_spec["kind"]] - set(initial_spec)
    if missing:
        raise ConfigError(f"initial section is missing {sorted(missing)}")

    return ScenarioConfig(
        horizon=horizon,
        dt_state=dt_state,
        dt_control=dt_control,
        model=model,
        platoon=platoon,
        initial=initial_spec,
        objective=objective,
        solver=solver,
        energy=energy,
        leader_spec=leader_spec,
        init_schedule=init_schedule,
        init_smooth_window=init_smooth_window,
        document=doc,
        base_dir=base_dir,
    )


# ---------------------------------------------------------------------------
# leader trajectories

def synth_leader_stop_and_go(
    v_base: float,
    amplitude: float,
    period: float,
    n_waves: int,
    horizon: float,
    dt: float,
) -> LeaderTrajectory:
    """Smooth stop-and-go leader: contiguous raised-cosine velocity dips.

    The wave block of n_waves periods is centered on [0, horizon]; outside
    it the leader cruises at v_base. Velocity dips to exactly
    v_base - amplitude at mid-wave, and the position is the closed-form
    integral, so no quadrature error enters the trajectory.
    """
    if amplitude < 0.0 or amplitude >= v_base:
        raise ValueError(
            f"amplitude must lie in [0, v_base) to keep the leader moving, "
            f"got amplitude={amplitude}, v_base={v_base}"
        )
    if period <= 0.0 or n_waves < 0:
        raise ValueError("period must be positive and n_waves nonnegative")
    if n_waves * period > horizon + 1e-9:
        raise ValueError(
            f"wave block of {n_waves} x {period} s does not fit in horizon {horizon} s"
        )
    grid = uniform_grid(horizon, dt)
    t0 = 0.5 * (horizon - n_waves * period)
    tau = np.clip(grid - t0, 0.0, n_waves * period)
    phase = 2.0 * np.pi * (tau / period)
    v = v_base - 0.5 * amplitude * (1.0 - np.cos(phase))
    x = v_base * grid - 0.5 * amplitude * (tau - (period / (2.0 * np.pi)) * np.sin(phase))
    a = -(np.pi * amplitude / period) * np.sin(phase)
    a[(grid <= t0) | (grid >= t0 + n_waves * period)] = 0.0
    return LeaderTrajectory(grid=grid, x=x, v=v, a=a)


def load_leader_csv(path: str | Path, dt: float, horizon: float) -> LeaderTrajectory:
    """Read a recorded leader from CSV and resample onto the state grid.

    The file needs a ``t,v`` or ``t,x`` header (seconds, m/s or m). The
    sampled column is interpolated with a monotone cubic; a velocity file
    is integrated to positions with the trapezoid rule, a position file is
    differentiated with central differences. Velocities must be
    nonnegative everywhere (the rejection message lists the offending data
    rows, 1-based counting the header).
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty leader file") from None
        header = [h.strip().lower() for h in header]
        if header not in (["t", "v"], ["t", "x"]):
            raise ValueError(f"{path}: header must be 't,v' or 't,x', got {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value {row!r}") from None
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two data rows")
    data = np.asarray(rows)
    t_in, y_in = data[:, 0], data[:, 1]
    if np.any(np.diff(t_in) <= 0.0):
        k = int(np.flatnonzero(np.diff(t_in) <= 0.0)[0])
        raise ValueError(f"{path}: time must be strictly increasing (row {k + 2})")
    if t_in[0] > 1e-9 or t_in[-1] < horizon - 1e-9:
        raise ValueError(
            f"{path}: data covers [{t_in[0]}, {t_in[-1]}] s but the scenario needs [0, {horizon}] s"
        )
    if header[1] == "v":
        bad = np.flatnonzero(y_in < 0.0)
        if bad.size:
            listed = ", ".join(str(i + 2) for i in bad[:10])
            raise ValueError(f"{path}: negative velocities at rows {listed}")

    grid = uniform_grid(horizon, dt)
    y = PchipInterpolator(t_in, y_in)(grid)
    if header[1] == "v":
        v = np.maximum(y, 0.0)  # monotone interpolation cannot undershoot, but be safe
        x = np.concatenate([[0.0], np.cumsum(0.5 * dt * (v[1:] + v[:-1]))])
    else:
        x = y
        v = np.gradient(x, dt)
        bad = np.flatnonzero(v < 0.0)
        if bad.size:
            listed = ", ".join(f"t={grid[i]:g}" for i in bad[:10])
            raise ValueError(f"{path}: position data implies negative velocity at {listed}")
    a = np.gradient(v, dt)
    return LeaderTrajectory(grid=grid, x=x, v=v, a=a)


def write_leader_csv(leader: LeaderTrajectory, path: str | Path) -> None:
    """Write the leader's velocity profile as a loadable ``t,v`` file."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "v"])
        for t, v in zip(leader.grid, leader.v):
            writer.writerow([repr(float(t)), repr(float(v))])


def build_leader(cfg: ScenarioConfig) -> LeaderTrajectory:
    spec = cfg.leader_spec
    if spec["kind"] == "synthetic":
        return synth_leader_stop_and_go(
            v_base=float(spec["v_base"]),
            amplitude=float(spec["amplitude"]),
            period=float(spec["period"]),
            n_waves=int(spec["n_waves"]),
            horizon=cfg.horizon,
            dt=cfg.dt_state,
        )
    return load_leader_csv(cfg.base_dir / spec["path"], cfg.dt_state, cfg.horizon)


# ---------------------------------------------------------------------------
# problem assembly

def build_initial_state(cfg: ScenarioConfig, leader: LeaderTrajectory) -> InitialState:
    """Initial platoon state behind leader position leader.x[0].

    kind 'equilibrium' spaces everyone at the equilibrium headway of the
    given speed (default: the leader's initial speed); 'uniform_gap' uses
    an explicit gap; 'explicit' takes raw arrays.
    """
    spec = cfg.initial
    n = cfg.platoon.n_vehicles
    if spec["kind"] == "explicit":
        return InitialState(np.asarray(spec["x0"], float), np.asarray(spec["v0"], float))
    if spec["kind"] == "equilibrium":
        speed = float(leader.v[0]) if spec["speed"] is None else float(spec["speed"])
        gap = equilibrium_headway(speed, cfg.model)
    else:
        speed = float(spec["speed"])
        gap = float(spec["gap"])
    spacing = gap + cfg.model.vehicle_length
    x0 = float(leader.x[0]) - spacing * np.arange(1, n + 1)
    return InitialState(x0=x0, v0=np.full(n, speed))


def build_problem(cfg: ScenarioConfig, leader: LeaderTrajectory | None = None) -> OcProblem:
    """Assemble the optimal control problem a config describes.

    Also enforces the feasible-start assumption: every AV must begin
    inside its headway constraints, otherwise no control can satisfy them
    at t = 0 and the penalty loop cannot converge.
    """
    if leader is None:
        leader = build_leader(cfg)
    init = build_initial_state(cfg, leader)
    gaps0 = (
        np.concatenate([[leader.x[0]], init.x0[:-1]]) - init.x0 - cfg.model.vehicle_length
    )
    av = list(cfg.platoon.av_indices)
    bad = [
        i
        for i, g in zip(av, gaps0[av])
        if not (cfg.objective.d_safe <= g <= cfg.objective.d_max)
    ]
    if bad:
        raise ConfigError(
            f"initial AV gaps must lie within [d_safe, d_max] = "
            f"[{cfg.objective.d_safe}, {cfg.objective.d_max}] m; vehicles {bad} do not"
        )
    return OcProblem(
        layout=cfg.platoon,
        params=cfg.model,
        leader=leader,
        init=init,
        obj=cfg.objective,
        energy=cfg.energy,
    )


def mimic_schedule(problem: OcProblem, tau: np.ndarray) -> ControlSchedule:
    """Feasible starting controls: each AV drives like the human it replaces.

    Simulates the all-human twin of the platoon and averages the Bando-FtL
    acceleration of every AV slot over each control interval. Unlike the
    zero schedule this follows the leader through deep waves, so it does
    not collide on stop-and-go scenarios.
    """
    twin = PlatoonLayout(problem.layout.n_vehicles, ())
    empty = ControlSchedule(tau, np.zeros((tau.size - 1, 0)))
    states = simulate_forward(twin, problem.params, problem.leader, empty, problem.init)
    if problem.layout.n_av == 0:
        return empty
    acc = acceleration_series(states, twin, problem.params, problem.leader, None)
    dt = float(states.grid[1] - states.grid[0])
    bounds = np.round(tau / dt).astype(int)
    counts = np.diff(bounds)
    omega = (
        np.add.reduceat(acc[:-1, list(problem.layout.av_indices)], bounds[:-1], axis=0)
        / counts[:, None]
    )
    return ControlSchedule(tau, omega)


def smoothed_leader_schedule(
    problem: OcProblem, tau: np.ndarray, window: float
) -> ControlSchedule:
    """Starting controls that track a low-pass filtered copy of the leader.

    The leader speed is moving-averaged over ``window`` seconds (centered,
    edge-padded) and each AV is told to follow that filtered profile: the
    control on every interval is the filtered speed change across the
    interval divided by its length. On wave-driven scenarios this starts
    the search near the smoothing optimum instead of inside the basin
    where every AV rides the wave, which plain descent cannot escape.
    """
    if problem.layout.n_av == 0:
        return ControlSchedule(tau, np.zeros((tau.size - 1, 0)))
    leader = problem.leader
    dt = float(leader.grid[1] - leader.grid[0])
    w = max(2, int(round(window / dt)))
    padded = np.pad(leader.v, (w // 2, w - 1 - w // 2), mode="edge")
    filtered = np.convolve(padded, np.ones(w) / w, mode="valid")
    bounds = np.round(tau / dt).astype(int)
    omega = (filtered[bounds[1:]] - filtered[bounds[:-1]]) / np.diff(tau)
    return ControlSchedule(tau, np.tile(omega[:, None], (1, problem.layout.n_av)))


def initial_schedule(cfg: ScenarioConfig, problem: OcProblem) -> ControlSchedule:
    """Starting ControlSchedule for the config's chosen init kind."""
    tau = uniform_grid(cfg.horizon, cfg.dt_control)
    if cfg.init_schedule == "zeros":
        return ControlSchedule(tau, np.zeros((tau.size - 1, problem.layout.n_av)))
    if cfg.init_schedule == "mimic":
        return mimic_schedule(problem, tau)
    window = cfg.init_smooth_window
    if window is None:
        window = 4.0 * cfg.dt_control
    return smoothed_leader_schedule(problem, tau, window)


def baseline_all_human(cfg: ScenarioConfig, leader: LeaderTrajectory | None = None):
    """Simulate the config's platoon with every vehicle human-driven.

    Returns (StateTrajectory, Metrics); the metrics are the denominator
    for every percent-reduction figure.
    """
    if leader is None:
        leader = build_leader(cfg)
    layout = PlatoonLayout(cfg.platoon.n_vehicles, ())
    init = build_initial_state(cfg, leader)
    tau = uniform_grid(cfg.horizon, cfg.dt_control)
    c = ControlSchedule(tau, np.zeros((tau.size - 1, 0)))
    states = simulate_forward(layout, cfg.model, leader, c, init)
    metrics = compute_metrics(states, layout, cfg.model, leader, c, cfg.energy)
    return states, metrics


def simulate_scenario(cfg: ScenarioConfig):
    """Forward-run the configured platoon with its initial control schedule.

    AVs, if any, drive the config's init schedule; an all-human config is
    the plain baseline simulation. Returns (states, schedule, problem).
    """
    problem = build_problem(cfg)
    c = initial_schedule(cfg, problem)
    return problem.simulate(c), c, problem


def solve_scenario(cfg: ScenarioConfig) -> OptimizationResult:
    """Build the problem a config describes and run the penalty-loop solver."""
    problem = build_problem(cfg)
    return solve(problem, cfg.solver, initial_schedule(cfg, problem))


# ---------------------------------------------------------------------------
# reporting

def percent_reduction(baseline: float, value: float) -> float | None:
    """100 * (baseline - value) / baseline, or None for a zero baseline."""
    if baseline == 0.0:
        return None
    return 100.0 * (baseline - value) / baseline


def relative_difference(greedy: float, full: float) -> float | None:
    """Greedy-vs-full relative difference, 100 * (greedy - full) / greedy."""
    if greedy == 0.0:
        return None
    return 100.0 * (greedy - full) / greedy


@dataclass(frozen=True)
class ReportRow:
    label: str
    total_sq_acc: float
    sq_acc_reduction_pct: float | None
    total_fuel: float
    fuel_reduction_pct: float | None


@dataclass(frozen=True)
class ReportTable:
    rows: tuple[ReportRow, ...]

    def to_csv(self) -> str:
        out = ["label,total_sq_acc,sq_acc_reduction_pct,total_fuel,fuel_reduction_pct"]
        for r in self.rows:
            red_a = "" if r.sq_acc_reduction_pct is None else f"{r.sq_acc_reduction_pct:.2f}"
            red_f = "" if r.fuel_reduction_pct is None else f"{r.fuel_reduction_pct:.2f}"
            out.append(f"{r.label},{r.total_sq_acc!r},{red_a},{r.total_fuel!r},{red_f}")
        return "\n".join(out) + "\n"

    def to_text(self) -> str:
        width = max(len(r.label) for r in self.rows)
        head = f"{'scenario':<{width}}  {'total sq acc':>14}  {'red %':>8}  {'total fuel':>12}  {'red %':>8}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            red_a = "--" if r.sq_acc_reduction_pct is None else f"{r.sq_acc_reduction_pct:.2f}"
            red_f = "--" if r.fuel_reduction_pct is None else f"{r.fuel_reduction_pct:.2f}"
            lines.append(
                f"{r.label:<{width}}  {r.total_sq_acc:>14.4f}  {red_a:>8}  {r.total_fuel:>12.4f}  {red_f:>8}"
            )
        return "\n".join(lines) + "\n"


def report(entries: Sequence[tuple[str, Metrics]], baseline: Metrics) -> ReportTable:
    """Reduction table of named runs against the all-human baseline."""
    rows = [
        ReportRow("baseline (all human)", baseline.total_sq_acc, None, baseline.total_fuel, None)
    ]
    for label, m in entries:
        rows.append(
            ReportRow(
                label,
                m.total_sq_acc,
                percent_reduction(baseline.total_sq_acc, m.total_sq_acc),
                m.total_fuel,
                percent_reduction(baseline.total_fuel, m.total_fuel),
            )
        )
    return ReportTable(tuple(rows))


# ---------------------------------------------------------------------------
# trajectory export

_KINDS = ("x", "v", "a", "headway")


class TrajectoryTable(NamedTuple):
    grid: np.ndarray
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray
    headway: np.ndarray
    is_av: np.ndarray


def export_trajectories_csv(
    states: StateTrajectory,
    accelerations: np.ndarray,
    headways: np.ndarray,
    layout: PlatoonLayout,
    path: str | Path,
) -> None:
    """Long-format dump: one row per (sample, vehicle, quantity).

    Columns are t, vehicle, kind, is_av, value with kind in {x, v, a,
    headway}. Values are written with repr so a reload is bit-exact.
    """
    r1, n = states.x.shape
    if accelerations.shape != (r1, n) or headways.shape != (r1, n):
        raise ValueError("accelerations and headways must match the trajectory shape")
    if layout.n_vehicles != n:
        raise ValueError("layout does not match the trajectory")
    is_av = layout.is_av_mask().astype(int)
    arrays = {"x": states.x, "v": states.v, "a": accelerations, "headway": headways}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "vehicle", "kind", "is_av", "value"])
        for k, t in enumerate(states.grid):
            ts = repr(float(t))
            for i in range(n):
                flag = is_av[i]
                for kind in _KINDS:
                    writer.writerow([ts, i, kind, flag, repr(float(arrays[kind][k, i]))])


def load_trajectories_csv(path: str | Path) -> TrajectoryTable:
    """Inverse of export_trajectories_csv (bit-exact for its own output)."""
    times: dict[float, int] = {}
    cells: dict[str, dict[tuple[int, int], float]] = {kind: {} for kind in _KINDS}
    av_flags: dict[int, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["t", "vehicle", "kind", "is_av", "value"]:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for row in reader:
            t, vehicle, kind, flag, value = row
            tf = float(t)
            if tf not in times:
                times[tf] = len(times)
            i = int(vehicle)
            av_flags[i] = int(flag)
            cells[kind][(times[tf], i)] = float(value)
    grid = np.array(sorted(times, key=times.get))
    if np.any(np.diff(grid) <= 0):
        raise ValueError(f"{path}: sample times out of order")
    n = max(av_flags) + 1
    out = {}
    for kind in _KINDS:
        arr = np.full((grid.size, n), np.nan)
        for (k, i), val in cells[kind].items():
            arr[k, i] = val
        if np.any(np.isnan(arr)):
            raise ValueError(f"{path}: missing {kind} samples")
        out[kind] = arr
    is_av = np.array([bool(av_flags[i]) for i in range(n)])
    return TrajectoryTable(grid, out["x"], out["v"], out["a"], out["headway"], is_av)


# ---------------------------------------------------------------------------
# penetration sweep

def placement_rule(n_av: int) -> tuple[int, ...]:
    """First AV directly behind the leader, then every fourth slot."""
    return tuple(4 * k for k in range(n_av))


@dataclass(frozen=True)
class SweepRow:
    n_av: int
    av_indices: tuple[int, ...]
    total_sq_acc: float
    sq_acc_reduction_pct: float | None
    total_fuel: float
    fuel_reduction_pct: float | None
    converged: bool

    @staticmethod
    def csv_header() -> str:
        return "n_av,av_indices,total_sq_acc,sq_acc_reduction_pct,total_fuel,fuel_reduction_pct,converged"

    def to_csv_line(self) -> str:
        red_a = "" if self.sq_acc_reduction_pct is None else f"{self.sq_acc_reduction_pct:.2f}"
        red_f = "" if self.fuel_reduction_pct is None else f"{self.fuel_reduction_pct:.2f}"
        idx = ";".join(str(i) for i in self.av_indices)
        return (
            f"{self.n_av},{idx},{self.total_sq_acc!r},{red_a},"
            f"{self.total_fuel!r},{red_f},{int(self.converged)}"
        )


def _leg_config(cfg: ScenarioConfig, av: tuple[int, ...]) -> ScenarioConfig:
    doc = copy.deepcopy(cfg.document)
    doc["platoon"]["av_indices"] = list(av)
    return load_config(doc, base_dir=cfg.base_dir)


def _solve_leg_cold(doc: dict, base_dir: str, av: list[int]) -> OptimizationResult:
    cfg = load_config(doc, base_dir=base_dir)
    return solve_scenario(_leg_config(cfg, tuple(av)))


def _u_init_single_av(cfg: ScenarioConfig, leader: LeaderTrajectory) -> np.ndarray:
    """Optimized schedule of one AV alone behind the leader (the sweep seed)."""
    init = build_initial_state(cfg, leader)
    lone = OcProblem(
        layout=PlatoonLayout(1, (0,)),
        params=cfg.model,
        leader=leader,
        init=InitialState(init.x0[:1], init.v0[:1]),
        obj=cfg.objective,
        energy=cfg.energy,
    )
    return solve(lone, cfg.solver, initial_schedule(cfg, lone)).omega_star.omega[:, 0]


def sweep_penetration(
    cfg: ScenarioConfig,
    max_avs: int,
    warm_start: bool = True,
    parallel: int | None = None,
) -> tuple[list[SweepRow], list[OptimizationResult]]:
    """Re-optimize the scenario with 0, 1, ..., max_avs AVs.

    Placement follows the config's av_indices when given (legs take
    prefixes of that list) and the every-fourth-slot rule otherwise. With
    warm_start each leg starts from the previous optimum plus the
    single-AV seed schedule for the new AV; this serializes the legs.
    Cold-started legs are independent and may run in parallel.
    """
    placement = cfg.platoon.av_indices or placement_rule(max_avs)
    if max_avs > len(placement):
        raise ConfigError(
            f"sweep of {max_avs} AVs needs {max_avs} slots, config placement has {len(placement)}"
        )
    if placement and placement[-1] >= cfg.platoon.n_vehicles:
        raise ConfigError("AV placement exceeds the platoon size")
    if warm_start and parallel:
        raise ConfigError("parallel sweep legs require warm_start=False (legs are chained)")

    legs = [tuple(placement[:m]) for m in range(max_avs + 1)]
    results: list[OptimizationResult] = []
    if not warm_start and parallel and parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = [
                pool.submit(_solve_leg_cold, cfg.document, str(cfg.base_dir), list(av))
                for av in legs
            ]
            results = [f.result() for f in futures]
    else:
        leader = build_leader(cfg)
        u_init = _u_init_single_av(cfg, leader) if warm_start and max_avs else None
        prev: OptimizationResult | None = None
        for av in legs:
            leg_cfg = _leg_config(cfg, av)
            problem = build_problem(leg_cfg, leader)
            if warm_start and prev is not None:
                start = warm_start_penetration(prev, problem.layout, u_init)
            else:
                start = initial_schedule(leg_cfg, problem)
            result = solve(problem, leg_cfg.solver, start)
            results.append(result)
            prev = result

    base = results[0].final_metrics
    rows = [
        SweepRow(
            n_av=len(av),
            av_indices=av,
            total_sq_acc=res.final_metrics.total_sq_acc,
            sq_acc_reduction_pct=(
                None if not av else percent_reduction(base.total_sq_acc, res.final_metrics.total_sq_acc)
            ),
            total_fuel=res.final_metrics.total_fuel,
            fuel_reduction_pct=(
                None if not av else percent_reduction(base.total_fuel, res.final_metrics.total_fuel)
            ),
            converged=res.converged,
        )
        for av, res in zip(legs, results)
    ]
    return rows, results

"""Config schema, leader construction, baselines, reports, and sweeps."""

import json
import math

import numpy as np
import pytest

from platoonopt.dynamics import ControlSchedule, PlatoonLayout, uniform_grid
from platoonopt.model import equilibrium_headway
from platoonopt.objective import Metrics
from platoonopt.scenario import (
    ConfigError,
    SweepRow,
    apply_overrides,
    baseline_all_human,
    build_initial_state,
    build_leader,
    build_problem,
    default_document,
    export_trajectories_csv,
    initial_schedule,
    load_config,
    load_leader_csv,
    load_trajectories_csv,
    mimic_schedule,
    placement_rule,
    report,
    simulate_scenario,
    smoothed_leader_schedule,
    sweep_penetration,
    synth_leader_stop_and_go,
    write_leader_csv,
)
from platoonopt.dynamics import acceleration_series


SMALL_DOC = {
    "horizon": 60.0,
    "platoon": {"n_vehicles": 6, "av_indices": []},
    "leader": {"kind": "synthetic", "v_base": 20.0, "amplitude": 4.0,
               "period": 15.0, "n_waves": 2},
}


def small_config(**platoon):
    doc = json.loads(json.dumps(SMALL_DOC))
    doc["platoon"].update(platoon)
    return load_config(doc)


# ---------------------------------------------------------------------------
# config loading and validation

def test_defaults_load():
    cfg = load_config({})
    assert cfg.horizon == 600.0
    assert cfg.dt_state == 0.1
    assert cfg.dt_control == 5.0
    assert cfg.platoon.n_vehicles == 20
    assert cfg.platoon.n_av == 0
    assert cfg.init_schedule == "smoothed"
    assert cfg.init_smooth_window is None
    assert cfg.objective.mode == "full"


def test_default_document_is_a_copy():
    doc = default_document()
    doc["horizon"] = 1.0
    assert default_document()["horizon"] == 600.0


def test_load_config_from_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(SMALL_DOC))
    cfg = load_config(path)
    assert cfg.horizon == 60.0
    assert cfg.base_dir == tmp_path


def test_load_config_rejects_bad_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown config key"):
        load_config({"horizzon": 100.0})
    with pytest.raises(ConfigError, match="unknown config key"):
        load_config({"platoon": {"n_vehicle": 5}})


def test_schema_version_checked():
    with pytest.raises(ConfigError, match="schema_version"):
        load_config({"schema_version": 99})


def test_grid_divisibility_enforced():
    with pytest.raises(ConfigError, match="integer multiple"):
        load_config({"dt_control": 0.25})
    with pytest.raises(ConfigError, match="control intervals"):
        load_config({"horizon": 601.0})


def test_kind_sections_replaced_not_merged():
    cfg = load_config({"initial": {"kind": "uniform_gap", "gap": 30.0, "speed": 25.0}})
    assert cfg.initial == {"kind": "uniform_gap", "gap": 30.0, "speed": 25.0}
    with pytest.raises(ConfigError, match="missing"):
        load_config({"initial": {"kind": "uniform_gap", "gap": 30.0}})
    with pytest.raises(ConfigError, match="kind"):
        load_config({"initial": {"kind": "parked"}})
    with pytest.raises(ConfigError):
        load_config({"leader": {"kind": "csv", "path": "x.csv", "v_base": 20.0}})


def test_overrides_apply_and_parse_json():
    cfg = load_config(SMALL_DOC, overrides=[
        "objective.mu=25",
        "platoon.av_indices=[0, 4]",
        "objective.velocity_penalty=false",
        "solver.init_schedule=zeros",
    ])
    assert cfg.objective.mu == 25.0
    assert cfg.platoon.av_indices == (0, 4)
    assert cfg.objective.velocity_penalty is False
    assert cfg.init_schedule == "zeros"


def test_overrides_reject_unknown_paths():
    doc = default_document()
    with pytest.raises(ConfigError, match="unknown config key"):
        apply_overrides(doc, ["platoon.av_indice=[0]"])
    with pytest.raises(ConfigError, match="key=value"):
        apply_overrides(doc, ["platoon.av_indices"])


def test_invalid_values_are_config_errors():
    with pytest.raises(ConfigError):
        load_config({"model": {"alpha": -0.1}})
    with pytest.raises(ConfigError):
        load_config({"horizon": -5.0})
    with pytest.raises(ConfigError):
        load_config({"solver": {"init_schedule": "jazz"}})
    with pytest.raises(ConfigError):
        load_config({"solver": {"init_smooth_window": -2.0}})


def test_av_initial_gap_window_checked():
    # an AV placed outside [d_safe, d_max] at t = 0 cannot be optimized
    # into feasibility and is rejected up front
    doc = json.loads(json.dumps(SMALL_DOC))
    doc["platoon"]["av_indices"] = [0]
    doc["initial"] = {"kind": "uniform_gap", "gap": 4.0, "speed": 20.0}
    with pytest.raises(ConfigError):
        build_problem(load_config(doc))
    doc["initial"] = {"kind": "uniform_gap", "gap": 20.0, "speed": 20.0}
    build_problem(load_config(doc))  # inside the window: fine


# ---------------------------------------------------------------------------
# synthetic leader

def test_synth_leader_zero_amplitude_is_cruise():
    leader = synth_leader_stop_and_go(25.0, 0.0, 20.0, 2, 100.0, 0.1)
    np.testing.assert_array_equal(leader.v, np.full(leader.grid.size, 25.0))
    np.testing.assert_allclose(leader.x, 25.0 * leader.grid, rtol=1e-14)
    assert not leader.a.any()


def test_synth_leader_dips_to_exact_minimum():
    # mid-wave instants land on the grid for these choices
    leader = synth_leader_stop_and_go(20.0, 8.0, 20.0, 2, 100.0, 0.1)
    assert math.isclose(float(leader.v.min()), 12.0, rel_tol=1e-12)
    assert float(leader.v.max()) == 20.0
    # cruise segments before and after the centered wave block
    t0 = (100.0 - 40.0) / 2.0
    assert np.all(leader.v[leader.grid <= t0] == 20.0)
    assert np.all(leader.a[leader.grid >= t0 + 40.0] == 0.0)


def test_synth_leader_validation():
    with pytest.raises(ValueError, match="amplitude"):
        synth_leader_stop_and_go(20.0, 20.0, 10.0, 1, 100.0, 0.1)
    with pytest.raises(ValueError, match="fit"):
        synth_leader_stop_and_go(20.0, 5.0, 60.0, 2, 100.0, 0.1)
    with pytest.raises(ValueError):
        synth_leader_stop_and_go(20.0, 5.0, -1.0, 2, 100.0, 0.1)


# ---------------------------------------------------------------------------
# leader CSV round trips

def test_leader_csv_roundtrip(tmp_path):
    leader = synth_leader_stop_and_go(20.0, 6.0, 20.0, 2, 80.0, 0.1)
    path = tmp_path / "leader.csv"
    write_leader_csv(leader, path)
    loaded = load_leader_csv(path, 0.1, 80.0)
    np.testing.assert_allclose(loaded.v, leader.v, rtol=0, atol=1e-12)
    # positions are rebuilt by trapezoid integration: O(dt^2) drift only
    assert np.max(np.abs(loaded.x - (leader.x - leader.x[0]))) < 0.01


def test_leader_csv_velocity_and_position_agree(tmp_path):
    t = np.arange(0.0, 30.0 + 1e-9, 0.5)
    v_path = tmp_path / "v.csv"
    x_path = tmp_path / "x.csv"
    v_path.write_text("t,v\n" + "".join(f"{ti},10.0\n" for ti in t))
    x_path.write_text("t,x\n" + "".join(f"{ti},{10.0 * ti}\n" for ti in t))
    from_v = load_leader_csv(v_path, 0.1, 30.0)
    from_x = load_leader_csv(x_path, 0.1, 30.0)
    np.testing.assert_allclose(from_v.v, 10.0, rtol=1e-12)
    np.testing.assert_allclose(from_x.v, from_v.v, rtol=0, atol=1e-6)
    np.testing.assert_allclose(from_x.x - from_x.x[0], from_v.x, rtol=0, atol=1e-6)


def test_leader_csv_rejects_negative_velocity_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,v\n0,5\n1,-1\n2,5\n3,-2\n4,5\n")
    with pytest.raises(ValueError, match="rows 3, 5"):
        load_leader_csv(path, 0.1, 4.0)


def test_leader_csv_rejects_nonmonotone_time(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,v\n0,5\n2,5\n2,5\n3,5\n")
    with pytest.raises(ValueError, match="strictly increasing"):
        load_leader_csv(path, 0.1, 3.0)


def test_leader_csv_requires_coverage(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("t,v\n0,5\n10,5\n")
    with pytest.raises(ValueError, match="covers"):
        load_leader_csv(path, 0.1, 20.0)


# ---------------------------------------------------------------------------
# baseline simulation

def test_baseline_equilibrium_is_quiet():
    cfg = load_config({"horizon": 60.0,
                       "platoon": {"n_vehicles": 4},
                       "leader": {"kind": "synthetic", "v_base": 25.0,
                                  "amplitude": 0.0, "period": 10.0, "n_waves": 0}})
    states, metrics = baseline_all_human(cfg)
    assert metrics.total_sq_acc < 1e-12
    assert np.max(np.abs(states.v - 25.0)) < 1e-9


def test_baseline_shows_string_instability():
    cfg = load_config({"horizon": 100.0,
                       "platoon": {"n_vehicles": 8},
                       "leader": {"kind": "synthetic", "v_base": 20.0,
                                  "amplitude": 8.0, "period": 20.0, "n_waves": 1}})
    states, metrics = baseline_all_human(cfg)
    per = metrics.per_vehicle_sq_acc
    # the disturbance amplifies monotonically down the platoon
    assert np.all(np.diff(per) > 0.0)
    assert per[-1] > 3.0 * per[0]
    assert math.isclose(metrics.total_sq_acc, float(per.sum()), rel_tol=1e-12)


def test_default_scenario_baseline_regression():
    # all-human run of the stock 20-vehicle scenario; these figures anchor
    # every percent-reduction number in the docs
    _, metrics = baseline_all_human(load_config({}))
    assert math.isclose(metrics.total_sq_acc, 21859.68435351776, rel_tol=1e-6)
    assert math.isclose(metrics.total_fuel, 40803.08746480843, rel_tol=1e-6)


# ---------------------------------------------------------------------------
# starting schedules

def test_initial_schedule_dispatch():
    doc = json.loads(json.dumps(SMALL_DOC))
    doc["platoon"]["av_indices"] = [0, 4]

    cfg_zero = load_config(doc, overrides=["solver.init_schedule=zeros"])
    problem = build_problem(cfg_zero)
    assert not initial_schedule(cfg_zero, problem).omega.any()

    cfg_mimic = load_config(doc, overrides=["solver.init_schedule=mimic"])
    tau = uniform_grid(cfg_mimic.horizon, cfg_mimic.dt_control)
    np.testing.assert_array_equal(
        initial_schedule(cfg_mimic, problem).omega,
        mimic_schedule(problem, tau).omega)

    cfg_smooth = load_config(doc)
    np.testing.assert_array_equal(
        initial_schedule(cfg_smooth, problem).omega,
        smoothed_leader_schedule(problem, tau, 4.0 * cfg_smooth.dt_control).omega)

    cfg_window = load_config(doc, overrides=["solver.init_smooth_window=30"])
    np.testing.assert_array_equal(
        initial_schedule(cfg_window, problem).omega,
        smoothed_leader_schedule(problem, tau, 30.0).omega)


def test_mimic_schedule_matches_all_human_twin():
    cfg = small_config(av_indices=[1])
    problem = build_problem(cfg)
    tau = uniform_grid(cfg.horizon, cfg.dt_control)
    c = mimic_schedule(problem, tau)
    twin = PlatoonLayout(6, ())
    states = baseline_all_human(cfg)[0]
    acc = acceleration_series(states, twin, cfg.model, build_leader(cfg), None)
    # interval 3 covers grid cells 150..199
    expected = acc[150:200, 1].mean()
    assert math.isclose(c.omega[3, 0], expected, rel_tol=1e-12)


def test_smoothed_schedule_flattens_the_wave():
    cfg = small_config(av_indices=[0])
    problem = build_problem(cfg)
    tau = uniform_grid(cfg.horizon, cfg.dt_control)
    narrow = smoothed_leader_schedule(problem, tau, 5.0)
    wide = smoothed_leader_schedule(problem, tau, 40.0)
    assert np.abs(wide.omega).max() < np.abs(narrow.omega).max()
    # all AV columns are identical copies
    cfg2 = small_config(av_indices=[0, 3])
    problem2 = build_problem(cfg2)
    c2 = smoothed_leader_schedule(problem2, tau, 20.0)
    np.testing.assert_array_equal(c2.omega[:, 0], c2.omega[:, 1])


def test_simulate_scenario_is_baseline_when_all_human():
    cfg = small_config()
    states, c, problem = simulate_scenario(cfg)
    assert c.omega.shape[1] == 0
    base_states, _ = baseline_all_human(cfg)
    np.testing.assert_array_equal(states.x, base_states.x)


# ---------------------------------------------------------------------------
# reporting

def make_metrics(total_sq, total_fuel):
    return Metrics(n_vehicles=2, horizon=10.0,
                   per_vehicle_sq_acc=np.array([total_sq / 2] * 2),
                   total_sq_acc=total_sq,
                   per_vehicle_fuel=np.array([total_fuel / 2] * 2),
                   total_fuel=total_fuel)


def test_report_percent_reductions():
    baseline = make_metrics(100.0, 200.0)
    table = report([("same", make_metrics(100.0, 200.0)),
                    ("half", make_metrics(50.0, 100.0))], baseline)
    assert table.rows[0].label == "baseline (all human)"
    assert table.rows[0].sq_acc_reduction_pct is None
    assert table.rows[1].sq_acc_reduction_pct == 0.0
    assert table.rows[2].sq_acc_reduction_pct == 50.0
    assert table.rows[2].fuel_reduction_pct == 50.0


def test_report_render_formats():
    baseline = make_metrics(100.0, 200.0)
    table = report([("half", make_metrics(50.0, 100.0))], baseline)
    csv_text = table.to_csv()
    lines = csv_text.splitlines()
    assert lines[0] == "label,total_sq_acc,sq_acc_reduction_pct,total_fuel,fuel_reduction_pct"
    assert lines[1].split(",")[2] == ""  # baseline has no reduction
    assert lines[2].split(",")[2] == "50.00"
    text = table.to_text()
    assert "--" in text.splitlines()[2]
    assert "50.00" in text


# ---------------------------------------------------------------------------
# trajectory export

def test_trajectory_export_roundtrip(tmp_path):
    cfg = small_config(av_indices=[2])
    states, c, problem = simulate_scenario(cfg)
    layout = problem.layout
    leader = problem.leader
    acc = acceleration_series(states, layout, cfg.model, leader, c)
    hw = states.headways(cfg.model, leader)
    path = tmp_path / "traj.csv"
    export_trajectories_csv(states, acc, hw, layout, path)

    n_rows = len(path.read_text().splitlines())
    assert n_rows == 1 + states.grid.size * 6 * 4

    table = load_trajectories_csv(path)
    np.testing.assert_array_equal(table.grid, states.grid)
    np.testing.assert_array_equal(table.x, states.x)
    np.testing.assert_array_equal(table.v, states.v)
    np.testing.assert_array_equal(table.a, acc)
    np.testing.assert_array_equal(table.headway, hw)
    np.testing.assert_array_equal(table.is_av, [False, False, True, False, False, False])


def test_exported_headways_are_consistent(tmp_path):
    cfg = small_config()
    states, c, problem = simulate_scenario(cfg)
    hw = states.headways(cfg.model, problem.leader)
    lead_x = np.concatenate([problem.leader.x[:, None], states.x[:, :-1]], axis=1)
    np.testing.assert_allclose(hw, lead_x - states.x - cfg.model.vehicle_length,
                               rtol=0, atol=1e-12)


# ---------------------------------------------------------------------------
# penetration sweep

def test_placement_rule():
    assert placement_rule(0) == ()
    assert placement_rule(3) == (0, 4, 8)


def test_sweep_rows_and_warm_start():
    cfg = small_config()
    rows, results = sweep_penetration(cfg, 2, warm_start=True)
    assert [r.n_av for r in rows] == [0, 1, 2]
    assert rows[0].av_indices == ()
    assert rows[1].av_indices == (0,)
    assert rows[2].av_indices == (0, 4)
    assert rows[0].sq_acc_reduction_pct is None
    for row, res in zip(rows, results):
        assert row.converged == res.converged
        assert row.total_sq_acc == res.final_metrics.total_sq_acc
    assert all(r.converged for r in rows)
    # a single AV already soaks up most of this gentle wave; both controlled
    # legs should come in far below the human-only baseline
    assert rows[1].total_sq_acc < rows[0].total_sq_acc
    assert rows[1].sq_acc_reduction_pct > 90.0
    assert rows[2].sq_acc_reduction_pct > 90.0
    line = rows[2].to_csv_line()
    assert line.startswith("2,0;4,")
    assert SweepRow.csv_header().startswith("n_av,av_indices,")


def test_sweep_cold_start_leg0_matches_warm():
    cfg = small_config()
    warm_rows, _ = sweep_penetration(cfg, 1, warm_start=True)
    cold_rows, _ = sweep_penetration(cfg, 1, warm_start=False)
    assert warm_rows[0].total_sq_acc == cold_rows[0].total_sq_acc
    assert cold_rows[1].converged


def test_sweep_rejects_parallel_warm_start():
    cfg = small_config()
    with pytest.raises(ConfigError, match="warm_start"):
        sweep_penetration(cfg, 1, warm_start=True, parallel=2)


def test_sweep_respects_configured_placement():
    cfg = small_config(av_indices=[1, 3])
    rows, _ = sweep_penetration(cfg, 2, warm_start=True)
    assert rows[1].av_indices == (1,)
    assert rows[2].av_indices == (1, 3)
    with pytest.raises(ConfigError, match="slots"):
        sweep_penetration(cfg, 3, warm_start=True)


# ---------------------------------------------------------------------------
# initial state builders

def test_build_initial_state_kinds():
    cfg = load_config({"horizon": 60.0,
                       "platoon": {"n_vehicles": 3},
                       "leader": {"kind": "synthetic", "v_base": 24.0,
                                  "amplitude": 0.0, "period": 10.0, "n_waves": 0}})
    leader = build_leader(cfg)
    init = build_initial_state(cfg, leader)
    heq = equilibrium_headway(24.0, cfg.model)
    spacing = heq + cfg.model.vehicle_length
    np.testing.assert_allclose(init.x0, leader.x[0] - spacing * np.arange(1, 4),
                               rtol=1e-12)
    np.testing.assert_array_equal(init.v0, np.full(3, 24.0))

    cfg2 = load_config({"horizon": 60.0,
                        "platoon": {"n_vehicles": 2},
                        "leader": {"kind": "synthetic", "v_base": 24.0,
                                   "amplitude": 0.0, "period": 10.0, "n_waves": 0},
                        "initial": {"kind": "explicit", "x0": [-30.0, -70.0],
                                    "v0": [20.0, 21.0]}})
    init2 = build_initial_state(cfg2, build_leader(cfg2))
    np.testing.assert_array_equal(init2.x0, [-30.0, -70.0])
    np.testing.assert_array_equal(init2.v0, [20.0, 21.0])

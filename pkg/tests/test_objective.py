"""Running cost, penalties, objective quadrature, and the fuel metric."""

import math

import numpy as np
import pytest

from platoonopt.dynamics import (
    ControlSchedule,
    InitialState,
    PlatoonLayout,
    acceleration_series,
    simulate_forward,
)
from platoonopt.model import bando_ftl_acc, equilibrium_headway
from platoonopt.objective import (
    EnergyParams,
    ObjectiveConfig,
    compute_metrics,
    energy_metric,
    headway_penalty,
    running_cost,
    running_cost_partials,
    total_objective,
    velocity_penalty,
)

from conftest import constant_leader, equilibrium_platoon, spaced_platoon


OBJ = ObjectiveConfig(mode="full", mu=10.0, d_safe=5.0, d_max=120.0)


def feasible_av_run(params, omega_value, horizon=20.0, n_av=2):
    leader = constant_leader(horizon, 0.1, 25.0, x_start=100.0)
    layout = PlatoonLayout(n_av, tuple(range(n_av)))
    x0 = 60.0 - 60.0 * np.arange(n_av)
    init = InitialState(x0=x0, v0=np.full(n_av, 25.0))
    c = ControlSchedule.zeros(horizon, 5.0, n_av).replace_omega(
        np.full((int(horizon / 5.0), n_av), omega_value))
    states = simulate_forward(layout, params, leader, c, init)
    return layout, leader, c, states


# ---------------------------------------------------------------------------
# penalty hinges

def test_headway_penalty_zero_on_feasible_side():
    for gap in (5.0, 6.0, 80.0):
        value, deriv = headway_penalty(gap, 5.0, "min")
        assert value == 0.0 and deriv == 0.0
    for gap in (120.0, 30.0):
        value, deriv = headway_penalty(gap, 120.0, "max")
        assert value == 0.0 and deriv == 0.0


def test_headway_penalty_violation_values():
    value, deriv = headway_penalty(3.0, 5.0, "min")
    assert value == 4.0 and deriv == -4.0
    value, deriv = headway_penalty(130.0, 120.0, "max")
    assert value == 100.0 and deriv == 20.0


def test_headway_penalty_smooth_at_threshold():
    eps = 1e-8
    v_in, d_in = headway_penalty(5.0 - eps, 5.0, "min")
    assert v_in < 1e-15 and abs(d_in) < 1e-7
    v_out, d_out = headway_penalty(5.0 + eps, 5.0, "min")
    assert v_out == 0.0 and d_out == 0.0


def test_headway_penalty_rejects_unknown_kind():
    with pytest.raises(ValueError):
        headway_penalty(10.0, 5.0, "soft")


def test_velocity_penalty_hinge():
    value, deriv = velocity_penalty(-2.0)
    assert value == 4.0 and deriv == -4.0
    value, deriv = velocity_penalty(3.0)
    assert value == 0.0 and deriv == 0.0


def test_constant_violation_integrates_to_slack_sq_times_horizon(params):
    # an AV pinned one meter below d_safe accrues penalty mu * 1^2 per second
    horizon = 15.0
    leader = constant_leader(horizon, 0.1, 10.0)
    layout = PlatoonLayout(1, (0,))
    gap0 = OBJ.d_safe - 1.0
    init = InitialState(x0=np.array([-gap0 - params.vehicle_length]),
                        v0=np.array([10.0]))
    c = ControlSchedule.zeros(horizon, 5.0, 1)
    states = simulate_forward(layout, params, leader, c, init)
    value = total_objective(states, c, OBJ, layout, params, leader)
    assert math.isclose(value, OBJ.mu * 1.0 * horizon, rel_tol=1e-12)


# ---------------------------------------------------------------------------
# running cost

def test_running_cost_zero_at_equilibrium(params):
    speed = 20.0
    leader = constant_leader(10.0, 0.1, speed)
    layout = PlatoonLayout(3, (1,))
    init = equilibrium_platoon(3, speed, params)
    y = np.concatenate([init.x0, init.v0])
    cost = running_cost(0.0, y, np.zeros(3), layout, params, leader, OBJ)
    assert abs(cost) < 1e-24


def test_running_cost_greedy_counts_only_av_effort(params):
    leader = constant_leader(10.0, 0.1, 20.0)
    layout = PlatoonLayout(2, (1,))
    init = equilibrium_platoon(2, 20.0, params)
    y = np.concatenate([init.x0, init.v0])
    obj = ObjectiveConfig(mode="greedy", mu=10.0, d_safe=5.0, d_max=120.0)
    cost = running_cost(0.0, y, np.array([0.0, 2.0]), layout, params, leader, obj)
    assert cost == 4.0


def test_running_cost_componentwise_oracle(params):
    leader = constant_leader(10.0, 0.1, 18.0)
    layout = PlatoonLayout(3, (1,))
    x = np.array([-25.0, -60.0, -95.0])
    v = np.array([17.0, 15.0, 18.0])
    u = np.array([0.0, -0.6, 0.0])
    lx, lv = leader.state_at(1.5)
    acc0 = bando_ftl_acc(x[0], lx, v[0], lv, params)
    acc2 = bando_ftl_acc(x[2], x[1], v[2], v[1], params)
    gap1 = x[0] - x[1] - params.vehicle_length
    pen_min, _ = headway_penalty(gap1, OBJ.d_safe, "min")
    pen_max, _ = headway_penalty(gap1, OBJ.d_max, "max")
    expected = acc0**2 + acc2**2 + 0.36 + OBJ.mu * (pen_min + pen_max)
    got = running_cost(1.5, np.concatenate([x, v]), u, layout, params, leader, OBJ)
    assert math.isclose(got, expected, rel_tol=1e-14)


def test_running_cost_partials_at_equilibrium(params):
    leader = constant_leader(10.0, 0.1, 20.0)
    layout = PlatoonLayout(3, (1,))
    init = equilibrium_platoon(3, 20.0, params)
    y = np.concatenate([init.x0, init.v0])
    u = np.array([0.0, 0.7, 0.0])
    L_y, L_u = running_cost_partials(0.0, y, u, layout, params, leader, OBJ)
    np.testing.assert_allclose(L_y, 0.0, atol=1e-12)
    np.testing.assert_array_equal(L_u, [0.0, 1.4, 0.0])


def test_running_cost_partials_match_fd(params):
    leader = constant_leader(10.0, 0.1, 18.0)
    layout = PlatoonLayout(4, (1, 3))
    # AV 3 sits below d_safe so the min-headway penalty contributes
    x = np.array([-24.0, -52.0, -85.0, -93.0])
    v = np.array([17.0, 16.0, 18.0, 15.0])
    y = np.concatenate([x, v])
    u = np.array([0.0, 0.4, 0.0, -1.1])
    L_y, L_u = running_cost_partials(1.0, y, u, layout, params, leader, OBJ)
    step = 1e-6
    for j in range(8):
        hi, lo = y.copy(), y.copy()
        hi[j] += step
        lo[j] -= step
        fd = (running_cost(1.0, hi, u, layout, params, leader, OBJ)
              - running_cost(1.0, lo, u, layout, params, leader, OBJ)) / (2 * step)
        assert abs(L_y[j] - fd) <= 1e-5 * max(1.0, abs(fd))
    for j in range(4):
        hi, lo = u.copy(), u.copy()
        hi[j] += step
        lo[j] -= step
        fd = (running_cost(1.0, y, hi, layout, params, leader, OBJ)
              - running_cost(1.0, y, lo, layout, params, leader, OBJ)) / (2 * step)
        assert abs(L_u[j] - fd) <= 1e-6 * max(1.0, abs(fd))


def test_min_penalty_pushes_av_backward(params):
    # one meter inside the safety margin: dL/dx = +2 mu, i.e. moving the AV
    # back (smaller x, larger gap) lowers the cost
    leader = constant_leader(10.0, 0.1, 10.0)
    layout = PlatoonLayout(1, (0,))
    gap = OBJ.d_safe - 1.0
    y = np.array([-gap - params.vehicle_length, 10.0])
    L_y, _ = running_cost_partials(0.0, y, np.zeros(1), layout, params, leader, OBJ)
    assert math.isclose(L_y[0], 2.0 * OBJ.mu, rel_tol=1e-14)


# ---------------------------------------------------------------------------
# total objective

def test_total_objective_zero_at_equilibrium(params):
    speed = 22.0
    horizon = 40.0
    leader = constant_leader(horizon, 0.1, speed)
    layout = PlatoonLayout(4, (2,))
    init = equilibrium_platoon(4, speed, params)
    c = ControlSchedule.zeros(horizon, 5.0, 1)
    states = simulate_forward(layout, params, leader, c, init)
    assert total_objective(states, c, OBJ, layout, params, leader) < 1e-12


def test_total_objective_constant_control_closed_form(params):
    horizon, a = 20.0, 0.1
    layout, leader, c, states = feasible_av_run(params, a, horizon=horizon)
    value = total_objective(states, c, OBJ, layout, params, leader)
    assert math.isclose(value, 2.0 * a**2 * horizon, rel_tol=1e-12)


def test_total_objective_mu_invariant_when_feasible(params):
    layout, leader, c, states = feasible_av_run(params, 0.05)
    lo = total_objective(states, c, OBJ, layout, params, leader)
    hi = total_objective(states, c,
                         ObjectiveConfig(mode="full", mu=1e6, d_safe=5.0, d_max=120.0),
                         layout, params, leader)
    assert lo == hi


def test_greedy_never_exceeds_full(params):
    horizon = 30.0
    from conftest import dip_leader
    from platoonopt.dynamics import uniform_grid

    leader = dip_leader(uniform_grid(horizon, 0.1), v_base=20.0, amp=2.0, period=8.0)
    layout = PlatoonLayout(4, (2,))
    init = equilibrium_platoon(4, 20.0, params)
    c = ControlSchedule.zeros(horizon, 5.0, 1)
    states = simulate_forward(layout, params, leader, c, init)
    greedy = total_objective(states, c,
                             ObjectiveConfig(mode="greedy", mu=10.0, d_safe=5.0, d_max=120.0),
                             layout, params, leader)
    full = total_objective(states, c, OBJ, layout, params, leader)
    assert greedy <= full
    assert full > greedy  # HVs are actually accelerating in this scenario


def test_objective_config_validation():
    with pytest.raises(ValueError):
        ObjectiveConfig(mode="cooperative")
    with pytest.raises(ValueError):
        ObjectiveConfig(mu=-1.0)
    with pytest.raises(ValueError):
        ObjectiveConfig(d_safe=10.0, d_max=8.0)


# ---------------------------------------------------------------------------
# fuel metric

def coasting_run(params, horizon=100.0):
    leader = constant_leader(horizon, 0.1, 30.0, x_start=100.0)
    layout = PlatoonLayout(1, (0,))
    init = InitialState(x0=np.array([0.0]), v0=np.array([10.0]))
    c = ControlSchedule.zeros(horizon, 5.0, 1)
    states = simulate_forward(layout, params, leader, c, init)
    acc = acceleration_series(states, layout, params, leader, c)
    return states, acc


def test_energy_speed_squared_term(params):
    states, acc = coasting_run(params)
    ep = EnergyParams(C2=1.0, C3=0.0, q0=0.0, q1=0.0)
    per_vehicle, total = energy_metric(states, acc, ep)
    assert math.isclose(total, 10.0**2 * 100.0, rel_tol=1e-12)
    assert per_vehicle.shape == (1,)
    assert per_vehicle[0] == total


def test_energy_no_positive_acceleration_no_q_term(params):
    horizon = 20.0
    leader = constant_leader(horizon, 0.1, 30.0, x_start=200.0)
    layout = PlatoonLayout(1, (0,))
    init = InitialState(x0=np.array([0.0]), v0=np.array([15.0]))
    c = ControlSchedule.zeros(horizon, 5.0, 1).replace_omega(
        np.full((4, 1), -0.5))
    states = simulate_forward(layout, params, leader, c, init)
    acc = acceleration_series(states, layout, params, leader, c)
    ep = EnergyParams(C2=0.0, C3=0.0, q0=0.8, q1=0.03)
    _, total = energy_metric(states, acc, ep)
    assert total == 0.0


def test_energy_all_terms_against_closed_forms(params):
    # single AV, v(t) = 10 + 0.2 t over T = 50; every integral has an exact
    # antiderivative
    horizon, v0, a = 50.0, 10.0, 0.2
    leader = constant_leader(horizon, 0.1, 30.0, x_start=300.0)
    layout = PlatoonLayout(1, (0,))
    init = InitialState(x0=np.array([0.0]), v0=np.array([v0]))
    c = ControlSchedule(np.array([0.0, horizon]), np.array([[a]]))
    states = simulate_forward(layout, params, leader, c, init)
    acc = acceleration_series(states, layout, params, leader, c)
    ep = EnergyParams(C0=5.0, C1=1.0, C2=0.7, C3=0.1, p0=2.0, p1=3.0, p2=0.6,
                      q0=0.8, q1=0.03)
    _, total = energy_metric(states, acc, ep)

    T = horizon
    vT = v0 + a * T
    dist = v0 * T + 0.5 * a * T**2
    int_v2 = (vT**3 - v0**3) / (3 * a)
    int_v3 = (vT**4 - v0**4) / (4 * a)
    q_term = a**2 * (ep.q0 * T + ep.q1 * dist)
    expected = (ep.C0 + ep.C1 * dist + ep.p0 * vT + 0.5 * ep.p1 * vT**2
                + ep.p2 / 3.0 * vT**3 + ep.C2 * int_v2 + ep.C3 * int_v3 + q_term)
    assert math.isclose(total, expected, rel_tol=1e-6)


def test_energy_c2_scaling(params):
    states, acc = coasting_run(params)
    base = EnergyParams()
    doubled = EnergyParams(C2=2.0 * base.C2)
    _, f1 = energy_metric(states, acc, base)
    _, f2 = energy_metric(states, acc, doubled)
    assert math.isclose(f2 - f1, base.C2 * 10.0**2 * 100.0, rel_tol=1e-9)


def test_compute_metrics_av_effort_is_exact(params):
    horizon = 20.0
    layout, leader, c, states = feasible_av_run(params, 0.1, horizon=horizon)
    m = compute_metrics(states, layout, params, leader, c, EnergyParams())
    assert m.n_vehicles == 2
    assert m.horizon == horizon
    np.testing.assert_allclose(m.per_vehicle_sq_acc,
                               np.full(2, 0.1**2 * horizon), rtol=1e-12)
    assert math.isclose(m.total_sq_acc, float(np.sum(m.per_vehicle_sq_acc)), rel_tol=1e-12)
    assert math.isclose(m.total_fuel, float(np.sum(m.per_vehicle_fuel)), rel_tol=1e-12)


def test_compute_metrics_hv_uses_trapezoid(params):
    speed = 20.0
    horizon = 10.0
    leader = constant_leader(horizon, 0.1, speed)
    layout = PlatoonLayout(2, (0,))
    init = equilibrium_platoon(2, speed, params)
    c = ControlSchedule.zeros(horizon, 5.0, 1)
    states = simulate_forward(layout, params, leader, c, init)
    acc = acceleration_series(states, layout, params, leader, c)
    w = np.full(states.grid.size, 0.1)
    w[0] = w[-1] = 0.05
    m = compute_metrics(states, layout, params, leader, c, EnergyParams())
    assert math.isclose(m.per_vehicle_sq_acc[1], float(w @ acc[:, 1] ** 2),
                        rel_tol=1e-12, abs_tol=1e-30)

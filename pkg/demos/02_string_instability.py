"""
String instability of an all-human platoon
==========================================

A platoon of Bando-FtL drivers amplifies speed perturbations as they
propagate upstream: each follower brakes a little later and a little
harder than the vehicle ahead. This script simulates the stock 20-car
scenario behind the synthetic stop-and-go leader and tabulates how the
squared-acceleration cost grows down the platoon.

With matplotlib installed a speed-trace figure is written to
demos/out/string_instability.png.
"""

from pathlib import Path

import numpy as np

from platoonopt.dynamics import PlatoonLayout, acceleration_series
from platoonopt.scenario import baseline_all_human, build_leader, load_config

cfg = load_config({})  # the stock scenario: 20 vehicles, 600 s, 12 waves
leader = build_leader(cfg)
print(f"leader: {cfg.leader_spec}")
print(f"platoon: {cfg.platoon.n_vehicles} human drivers, horizon {cfg.horizon:g} s")

states, metrics = baseline_all_human(cfg, leader)

# -- amplification table ------------------------------------------------------
layout = PlatoonLayout(cfg.platoon.n_vehicles, ())
acc = acceleration_series(states, layout, cfg.model, leader, None)
print("\n  vehicle   int a^2 dt   peak |a| [m/s^2]")
for i in range(cfg.platoon.n_vehicles):
    peak = np.max(np.abs(acc[:, i]))
    print(f"  {i:7d}   {metrics.per_vehicle_sq_acc[i]:10.2f}   {peak:16.3f}")

leader_peak = float(np.max(np.abs(leader.a)))
last_peak = float(np.max(np.abs(acc[:, -1])))
print(f"\nleader peak |a| = {leader_peak:.3f} m/s^2")
print(f"vehicle {cfg.platoon.n_vehicles} peak |a| = {last_peak:.3f} m/s^2 "
      f"({last_peak / leader_peak:.1f}x the leader)")
print(f"total squared acceleration = {metrics.total_sq_acc:.2f}")
print(f"total fuel proxy = {metrics.total_fuel:.2f}")

min_hw = float(states.headways(cfg.model, leader).min())
print(f"minimum headway anywhere = {min_hw:.2f} m (never a collision)")

# -- optional figure ----------------------------------------------------------
try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    out = Path(__file__).parent / "out"
    out.mkdir(exist_ok=True)
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(leader.grid, leader.v, "k", lw=1.5, label="leader")
    for i in (0, 9, 19):
        ax.plot(states.grid, states.v[:, i], lw=0.8, label=f"vehicle {i + 1}")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("speed [m/s]")
    ax.set_title("speed perturbations grow down the platoon")
    ax.legend(loc="lower right", ncol=4, fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "string_instability.png", dpi=120)
    print(f"\nfigure written to {out / 'string_instability.png'}")

"""
The Bando follow-the-leader model in isolation
==============================================

Every human-driven vehicle in this package accelerates according to

    a = alpha * (V(h) - v) + beta * (v_lead - v) / h**2

where h is the bumper-to-bumper gap to the vehicle ahead. This script
walks through the pieces: the optimal velocity curve V, the equilibrium
spacing it induces, and the a-priori bounds that guarantee a follower
never reaches zero gap.
"""

import numpy as np

from platoonopt.model import (
    ModelParams,
    bando_ftl_acc,
    equilibrium_headway,
    optimal_velocity,
    safe_min_deceleration,
    theorem_bounds,
)

params = ModelParams()
print("model parameters:", params)

# -- the optimal velocity curve ---------------------------------------------
# V(h) rises smoothly from 0 to v_max; d_s sets where the knee sits.
print("\n  gap h [m]   V(h) [m/s]")
for h in (5.0, 10.0, 20.0, 30.0, 50.0, 100.0):
    print(f"  {h:9.1f}   {optimal_velocity(h, params):10.4f}")

# -- equilibrium spacing -----------------------------------------------------
# At the gap h* with V(h*) = v, a vehicle cruising at v behind a leader
# at the same speed feels zero acceleration. This is the spacing used to
# initialize every platoon in the stock scenarios.
for v in (15.0, 20.0, 28.0):
    h_eq = equilibrium_headway(v, params)
    a = bando_ftl_acc(0.0, h_eq + params.vehicle_length, v, v, params)
    print(f"\nequilibrium at v = {v:g} m/s: h* = {h_eq:.3f} m "
          f"(residual acceleration {a:.2e})")

# -- response away from equilibrium -----------------------------------------
v = 20.0
h_eq = equilibrium_headway(v, params)
print("\nperturbing the gap around h* at matched speeds:")
for dh in (-5.0, -1.0, 1.0, 5.0):
    a = bando_ftl_acc(0.0, h_eq + dh + params.vehicle_length, v, v, params)
    print(f"  gap h* {dh:+.0f} m  ->  a = {a:+.4f} m/s^2")

# -- worst-case bounds -------------------------------------------------------
# For a single follower the model admits closed-form envelopes: the gap
# never falls below d_min and the speed stays inside an exponential
# lower bound and a headway-limited upper bound, both computable before
# simulating anything.
bounds = theorem_bounds(params, horizon=100.0, initial_gap=h_eq, v0_follower=v,
                        v_lead_max=25.0)
print(f"\nguaranteed minimum gap over 100 s: d_min = {bounds.d_min:.4f} m")
lo, hi = bounds.velocity_envelope(np.array([0.0, 1.0, 10.0, 100.0]))
print("velocity envelope samples (lower / upper):")
for t, a, b in zip((0.0, 1.0, 10.0, 100.0), lo, hi):
    print(f"  t = {t:5.1f} s   {a:8.4f} / {b:8.4f} m/s")

# -- safe braking ------------------------------------------------------------
# Given current gaps and speeds, this is the gentlest constant
# deceleration that still stops every vehicle before the safety gap.
a_min = safe_min_deceleration([55.0, 30.0], [10.0, 8.0], d_safe=5.0)
print(f"\nsafe constant deceleration for gaps [55, 30] m at [10, 8] m/s: "
      f"{a_min:.4f} m/s^2")

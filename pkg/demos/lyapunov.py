"""
Entropy-like Lyapunov functions
===============================

Closed forms against quadrature, convergence in l, and the decrease of V
along a trajectory.
"""

import numpy as np

from riboflow import (
    LyapunovSpec,
    RateNetwork,
    SimOptions,
    Transform,
    build_model,
    convergence_gap,
    find_equilibrium,
    lyapunov_profile,
    make_kinetics,
    simulate_reduced,
    v_general,
    v_hill,
    v_lab,
    v_ltv,
)

n, nbar = np.array([20.0, 50.0, 80.0]), np.array([40.0, 55.0, 55.0])
print("V_LTV:", v_ltv(n, nbar))

# closed form vs the integral definition
a, b, l = (2, 3, 2), (2, 0, 2), 25.0
thetas = [Transform.power_over_shifted_power(l, x, y) for x, y in zip(a, b)]
print("V_lab closed form:", v_lab(l, a, b, n, nbar), "quadrature:", v_general(thetas, n, nbar))
print("hill_32 - hill_22 - V_LTV:", v_hill("hill_32", 350, n, nbar) - v_hill("hill_22", 350, n, nbar) - v_ltv(n, nbar))

# as l grows, V_lab approaches the weighted LTV function
grid = np.array(np.meshgrid(*[np.linspace(5, 95, 5)] * 3)).reshape(3, -1).T
for l in (25, 100, 200, 1e3, 1e4):
    print(f"  l={l:g}: gap {convergence_gap(l, a, b, grid, nbar):.4g}")

# V decreases along a trajectory of the saturating triangle
edges = [(1, 2), (2, 3), (3, 1)]
model = build_model(3, edges, [100, 100, 100])
rates = RateNetwork(model, [make_kinetics("saturating_power", k, e, l=25.0, a=3.0, b=3.0) for e, k in zip(edges, (100, 60, 20))])
eq = find_equilibrium(model, rates, 150.0).point
traj = simulate_reduced(model, rates, [20.0, 50.0, 80.0], SimOptions(rel_tol=1e-12, abs_tol=1e-12, t_end=10.0, dense_output_stride=0.01))
for spec in (LyapunovSpec.lab(25, (3, 3, 3), (3, 3, 3)), LyapunovSpec.lab(25, a, b), LyapunovSpec.ltv()):
    prof = lyapunov_profile(traj, spec, eq, rates)
    print(f"{spec.name}: V(0)={prof.values[0]:.4g} V(10)={prof.values[-1]:.3g} max dV/dt={prof.max_interior_derivative():.3g} chain rule gap={prof.chain_rule_mismatch():.2g}")

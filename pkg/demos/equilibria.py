"""
Equilibria on level sets
========================

One equilibrium per level, increasing in the level; limits when the
graph is not strongly connected.
"""

import numpy as np

from riboflow import build_model, classify_nsc_limit, equilibrium_curve, find_equilibrium, make_kinetics

edges = [(1, 2), (2, 3), (3, 1)]
model = build_model(3, edges, [5, 25, 50])

for l in (1.0, 10.0, 100.0):
    rates = [make_kinetics("saturating_power", k, e, l=l, a=3.0, b=3.0) for e, k in zip(edges, (100, 40, 60))]
    curve = equilibrium_curve(model, rates, np.linspace(0, 80, 50))
    print(f"l={l:g}: strictly increasing {bool(np.all(curve.monotone(strict=True)))}, e(40) = {find_equilibrium(model, rates, 40.0).point}")

# two different starts on the level 40 land on the same point
rates = [make_kinetics("mass_action", k, e) for e, k in zip(edges, (100, 40, 60))]
a = find_equilibrium(model, rates, 40.0, n0=[5.0, 25.0, 10.0]).point
b = find_equilibrium(model, rates, 40.0, n0=[0.0, 0.0, 40.0]).point
print("mass action, level 40:", a, b)

# 2 <-> 3 feeds the trap {1}
nsc_edges = [(2, 3), (3, 2), (3, 1)]
nsc = build_model(3, nsc_edges, [100, 100, 100])
nsc_rates = [make_kinetics("mass_action", k, e) for e, k in zip(nsc_edges, (15, 25, 35))]
for n0 in ([0.0, 40.0, 40.0], [50.0, 50.0, 50.0]):
    rep = classify_nsc_limit(nsc, nsc_rates, n0)
    print(f"from {n0}: rule {rep.rule}, predicted {rep.predicted_limit}, observed {rep.observed_limit}")

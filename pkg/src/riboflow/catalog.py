"""Builders for the bundled example scenarios.

``python3 -m riboflow.catalog`` regenerates ``scenarios/*.json``.
"""

import math
import os
from typing import Dict, List

import numpy as np

from .graph import build_model
from .lyapunov import LyapunovSpec
from .rates import RateSpec, TimeCoefficient, make_kinetics
from .scenario import GridSpec, InitialSpec, Scenario, emit_scenario, parse_scenario
from .simulator import SimOptions

TRIANGLE = ((1, 2), (2, 3), (3, 1))
SCENARIO_DIR = os.path.join(os.path.dirname(__file__), "scenarios")


def _triangle_rates(kinetics: str, ks, **params) -> List[RateSpec]:
    return [make_kinetics(kinetics, k, e, **params) for e, k in zip(TRIANGLE, ks)]


def triangle_massaction() -> Scenario:
    model = build_model(3, TRIANGLE, (5, 25, 50))
    return Scenario(
        "triangle_massaction",
        model,
        tuple(_triangle_rates("mass_action", (100, 40, 60))),
        InitialSpec(states=((1.0, 20.0, 19.0), (4.0, 5.0, 31.0), (2.5, 12.5, 25.0))),
        "equilibria",
        {"r_grid": {"start": 0.0, "stop": 80.0, "num": 50}, "ensemble_levels": [20.0, 40.0, 60.0], "ensemble_count": 5},
        SimOptions(rel_tol=1e-12, abs_tol=1e-12, t_end=1.0, dense_output_stride=0.001),
        description="Triangle with capacities (5, 25, 50) and mass-action rates k12=100, k23=40, k31=60.",
    )


def triangle_rational(l: float) -> Scenario:
    model = build_model(3, TRIANGLE, (5, 25, 50))
    return Scenario(
        f"triangle_rational_l{l:g}",
        model,
        tuple(_triangle_rates("saturating_power", (100, 40, 60), l=l, a=3.0, b=3.0)),
        InitialSpec(states=((1.0, 20.0, 19.0),)),
        "equilibria",
        {"r_grid": {"start": 0.0, "stop": 80.0, "num": 50}, "ensemble_levels": [20.0, 40.0, 60.0], "ensemble_count": 5},
        SimOptions(t_end=20.0, dense_output_stride=0.01),
        description=f"Triangle with capacities (5, 25, 50) and rates k n^3/(l+n)^3 s^3/(l+s)^3, l={l:g}.",
    )


def example2_nsc() -> Scenario:
    model = build_model(3, ((2, 3), (3, 2), (3, 1)), (100, 100, 100))
    rates = (
        make_kinetics("mass_action", 15, (2, 3)),
        make_kinetics("mass_action", 25, (3, 2)),
        make_kinetics("mass_action", 35, (3, 1)),
    )
    return Scenario(
        "example2_nsc",
        model,
        rates,
        InitialSpec(states=((0.0, 40.0, 40.0), (50.0, 50.0, 50.0))),
        "equilibria",
        {},
        # draining compartments undershoot zero by about 1.3 abs_tol, so keep the guard tight
        SimOptions(rel_tol=1e-12, abs_tol=1e-12, t_end=5.0, dense_output_stride=0.01),
        description="Not strongly connected model 2->3, 3->2, 3->1 with capacities 100 and mass-action rates.",
    )


def _example13_rates(perturbed: bool) -> List[RateSpec]:
    kbar = (40.0, 25.0, 50.0)
    decay = (3 / 100, 5 / 100, 2 / 100)
    out = []
    for e, k, r in zip(TRIANGLE, kbar, decay):
        coef = TimeCoefficient.decaying(k, 1.0, r) if perturbed else TimeCoefficient.constant(k)
        out.append(make_kinetics("monod", coef, e, l=100.0))
    return out


def example13(perturbed: bool = True) -> Scenario:
    model = build_model(3, TRIANGLE, (100, 100, 100))
    name = "example13_perturbed" if perturbed else "example13_nominal"
    return Scenario(
        name,
        model,
        tuple(_example13_rates(perturbed)),
        InitialSpec(states=((5.0, 45.0, 100.0),)),
        "simulate",
        {"compare_nominal": perturbed},
        SimOptions(t_end=1000.0, dense_output_stride=0.5),
        description="Triangle with Monod rates (l=100) and exponentially decaying perturbations of k=(40, 25, 50).",
    )


def example14_periodic() -> Scenario:
    model = build_model(3, TRIANGLE, (100, 100, 100))
    ks = (
        TimeCoefficient.sinusoid(100.0, 3.0, 2.0, 1.0, 0.5, "cos"),
        TimeCoefficient.sinusoid(100.0, 7.0, 5.0, 3.0, -2.5, "sin"),
        TimeCoefficient.sinusoid(100.0, 2.0, 1.0, 2.0, -1.0, "cos"),
    )
    rates = tuple(make_kinetics("monod", k, e, l=100.0) for e, k in zip(TRIANGLE, ks))
    states = ((5.0, 45.0, 100.0), (100.0, 50.0, 0.0), (0.0, 100.0, 50.0), (50.0, 0.0, 100.0), (50.0, 50.0, 50.0))
    return Scenario(
        "example14_periodic",
        model,
        rates,
        InitialSpec(states=states),
        "entrain",
        {"n_periods": 40},
        SimOptions(t_end=4 * math.pi, dense_output_stride=0.01),
        description="Triangle with Monod rates (l=100) and 2*pi-periodic coefficients; five starts on the level 150.",
    )


def example15_members() -> List[LyapunovSpec]:
    return [
        LyapunovSpec.lab(25, (3, 3, 3), (3, 3, 3)),
        LyapunovSpec.lab(25, (1, 2, 3), (0, 0, 1)),
        LyapunovSpec.lab(25, (3, 1, 1), (3, 1, 1)),
        LyapunovSpec.lab(25, (2, 3, 2), (2, 0, 2)),
        LyapunovSpec.lab(100, (2, 3, 2), (2, 0, 2)),
        LyapunovSpec.lab(200, (2, 3, 2), (2, 0, 2)),
        LyapunovSpec.ltv(weights=(2, 3, 2)),
        LyapunovSpec.ltv(),
    ]


def example15_saturating() -> Scenario:
    model = build_model(3, TRIANGLE, (100, 100, 100))
    return Scenario(
        "example15_saturating",
        model,
        tuple(_triangle_rates("saturating_power", (100, 60, 20), l=25.0, a=3.0, b=3.0)),
        InitialSpec(states=((20.0, 50.0, 80.0),)),
        "lyapunov",
        {
            "members": example15_members(),
            "surface": {"n1": [0.0, 100.0, 51], "n2": [0.0, 100.0, 51]},
        },
        SimOptions(rel_tol=1e-13, abs_tol=1e-13, t_end=40.0, dense_output_stride=0.001),
        description="Triangle with rates k n^3/(25+n)^3 s^3/(25+s)^3, k=(100, 60, 20), on the level 150.",
    )


def ring100_edges(m: int = 100, reach: int = 8) -> List[tuple]:
    return [(i, (i - 1 + d) % m + 1) for d in range(1, reach + 1) for i in range(1, m + 1)]


def ring100_hill() -> Scenario:
    m = 100
    edges = ring100_edges(m)
    coef = {d: 20 - 2 * (d - 1) for d in range(1, 9)}
    rates = []
    for i, j in edges:
        d = (j - i) % m
        rates.append(make_kinetics("modified_hill", coef[d], (i, j), l=350.0))
    caps = [50.0] * 50 + [100.0] * 50
    model = build_model(m, edges, caps)
    # fixed seeded draw, stored explicitly so the file is self-contained
    n0 = np.round(np.array(caps) * np.random.default_rng(0).uniform(0.1, 0.9, m), 3)
    return Scenario(
        "ring100_hill",
        model,
        tuple(rates),
        InitialSpec(states=(tuple(float(x) for x in n0),)),
        "lyapunov",
        {"members": [LyapunovSpec.hill("hill_32", 350), LyapunovSpec.hill("hill_22", 350), LyapunovSpec.ltv(), LyapunovSpec.hill("hill_1505", 350)]},
        # fixed steps sampled at step ends: no dense-output interpolation error in dV/dt
        SimOptions(method="fixed_rk4", max_step=5e-7, t_end=0.05, dense_output_stride=5e-7),
        GridSpec("graded", 1e-9, 4000),
        description="Ring of 100 compartments, offsets 1..8 with k=20,18,...,6, rates k n^3/(350+n^2) s^3/(350+s^2).",
    )


def all_scenarios() -> Dict[str, Scenario]:
    out = [
        triangle_massaction(),
        triangle_rational(1.0),
        triangle_rational(10.0),
        triangle_rational(100.0),
        example2_nsc(),
        example13(True),
        example13(False),
        example14_periodic(),
        example15_saturating(),
        ring100_hill(),
    ]
    return {sc.name: sc for sc in out}


def bundled_path(name: str) -> str:
    return os.path.join(SCENARIO_DIR, f"{name}.json")


def load_bundled(name: str) -> Scenario:
    return parse_scenario(bundled_path(name))


def bundled_names() -> List[str]:
    return sorted(f[:-5] for f in os.listdir(SCENARIO_DIR) if f.endswith(".json"))


def write_all(directory: str = SCENARIO_DIR) -> List[str]:
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, sc in all_scenarios().items():
        path = os.path.join(directory, f"{name}.json")
        emit_scenario(sc, path)
        paths.append(path)
    return paths


if __name__ == "__main__":
    for p in write_all():
        print(p)

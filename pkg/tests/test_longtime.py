import math
import warnings

import numpy as np
import pytest
from scipy.optimize import fsolve

from riboflow import (
    DenominatorPoly,
    RateSpec,
    SimOptions,
    TimeCoefficient,
    build_model,
    classify_nsc_limit,
    common_period,
    entrainment_analysis,
    equilibrium_curve,
    find_equilibrium,
    make_kinetics,
    simulate_reduced,
)
from riboflow.errors import LevelSetMismatch, MixedPeriods, NotStronglyConnected, ValidationError
from riboflow.longtime import newton_on_level, restrict_rates

from conftest import TRIANGLE


def test_boundary_levels(triangle_ma):
    model, rates = triangle_ma
    eq = find_equilibrium(model, rates, 0.0)
    assert np.all(eq.point == 0) and eq.residual == 0
    eq = find_equilibrium(model, rates, 80.0)
    assert np.array_equal(eq.point, model.c) and eq.residual == 0


def test_triangle_equilibrium_hand_value(triangle_ma):
    # all three fluxes equal 4687.5 at (2.5, 6.25, 31.25)
    model, rates = triangle_ma
    eq = find_equilibrium(model, rates, 40.0, tol=1e-12)
    assert np.allclose(eq.point, [2.5, 6.25, 31.25], rtol=0, atol=1e-9)


def test_multistart_and_root_finder_oracle(triangle_ma):
    model, rates = triangle_ma
    a = find_equilibrium(model, rates, 40.0, n0=[5.0, 25.0, 10.0]).point
    b = find_equilibrium(model, rates, 40.0, n0=[0.0, 0.0, 40.0]).point
    assert np.abs(a - b).sum() < 1e-6
    # long simulation from a third start
    sim = simulate_reduced(model, rates, [2.0, 20.0, 18.0], SimOptions(t_end=5.0, dense_output_stride=5.0)).final
    assert np.abs(sim - a).sum() < 1e-6

    c = model.c

    def eqs(x):
        return [100 * x[0] * (c[1] - x[1]) - 40 * x[1] * (c[2] - x[2]), 40 * x[1] * (c[2] - x[2]) - 60 * x[2] * (c[0] - x[0]), x.sum() - 30.0]

    root = fsolve(eqs, [3.0, 5.0, 22.0], xtol=1e-14)
    assert np.allclose(find_equilibrium(model, rates, 30.0).point, root, atol=1e-8)


def test_curve_monotone_with_endpoints(triangle):
    for rates in (
        [make_kinetics("mass_action", k, e) for e, k in zip(TRIANGLE, (100, 40, 60))],
        [make_kinetics("saturating_power", k, e, l=10.0, a=3.0, b=3.0) for e, k in zip(TRIANGLE, (100, 40, 60))],
    ):
        curve = equilibrium_curve(triangle, rates, np.linspace(0, 80, 17))
        assert np.all(curve.points[0] == 0) and np.array_equal(curve.points[-1], triangle.c)
        assert np.all(curve.monotone(strict=True))
        assert np.max(curve.level_errors()) < 1e-10
    two = equilibrium_curve(triangle, rates, [0.0, 80.0])
    assert two.points.shape == (2, 3)
    assert "r,e_1,e_2,e_3,residual" == two.to_csv().splitlines()[0]
    with pytest.raises(ValidationError):
        equilibrium_curve(triangle, rates, [10.0, 5.0])


def test_equilibrium_errors(triangle_ma, ex2):
    model, rates = triangle_ma
    with pytest.raises(NotStronglyConnected):
        find_equilibrium(*ex2, 50.0)
    with pytest.raises(LevelSetMismatch):
        find_equilibrium(model, rates, 40.0, n0=[1.0, 1.0, 1.0])
    with pytest.raises(ValidationError):
        find_equilibrium(model, rates, 100.0)
    periodic = [make_kinetics("mass_action", TimeCoefficient.sinusoid(1.0, 2.0, 1.0, 1.0), e) for e in TRIANGLE]
    with pytest.raises(ValidationError):
        find_equilibrium(model, periodic, 40.0)


def test_newton_on_level_linear():
    # f(x) = A x with a compartmental A; kernel direction scaled to the level
    a = np.array([[-1.0, 2.0], [1.0, -2.0]])
    x, res, ok = newton_on_level(lambda y: a @ y, np.array([1.0, 1.0]), 3.0, np.array([10.0, 10.0]), 1e-12)
    assert ok and np.allclose(x, [2.0, 1.0], atol=1e-12)


def test_nsc_low_level(ex2):
    rep = classify_nsc_limit(*ex2, [0.0, 40.0, 40.0])
    assert rep.rule == "two_component"
    assert np.max(np.abs(rep.observed_limit - [80.0, 0.0, 0.0])) < 1e-4
    assert rep.agreement


def test_nsc_high_level(ex2):
    model, rates = ex2
    rep = classify_nsc_limit(model, rates, [50.0, 50.0, 50.0])
    assert abs(rep.observed_limit[0] - 100.0) < 1e-4
    # independent 2-cycle model on compartments 2 and 3
    sub = build_model(2, [(1, 2), (2, 1)], [100, 100])
    sub_rates = [make_kinetics("mass_action", 15, (1, 2)), make_kinetics("mass_action", 25, (2, 1))]
    ref = find_equilibrium(sub, sub_rates, 50.0).point
    assert np.max(np.abs(rep.observed_limit[1:] - ref)) < 1e-4
    # closed form: 15 n2 (100 - n3) = 25 n3 (100 - n2) with n2 + n3 = 50
    n2 = fsolve(lambda x: 15 * x * (50 + x) - 25 * (50 - x) * (100 - x), 25.0, xtol=1e-14)[0]
    assert abs(ref[0] - n2) < 1e-8
    assert rep.agreement


def test_nsc_chain_drains():
    model = build_model(2, [(1, 2)], [10.0, 10.0])
    rep = classify_nsc_limit(model, [make_kinetics("mass_action", 1.0, (1, 2))], [3.0, 4.0])
    assert np.max(np.abs(rep.observed_limit - [0.0, 7.0])) < 1e-4
    assert np.max(np.abs(rep.predicted_limit - [0.0, 7.0])) < 1e-9


def test_restrict_rates():
    rates = [make_kinetics("mass_action", 1.0, (2, 3)), make_kinetics("mass_action", 2.0, (3, 2)), make_kinetics("mass_action", 3.0, (3, 1))]
    sub = restrict_rates(rates, [2, 3])
    assert [r.edge for r in sub] == [(1, 2), (2, 1)]
    # Psi on an inner edge that reads compartment 1
    outside = RateSpec((2, 3), TimeCoefficient.constant(1.0), psi=DenominatorPoly.from_terms([(1.0, [1, 0, 0], [0, 0, 0])]))
    with pytest.raises(ValidationError):
        restrict_rates([outside], [2, 3])
    inner = make_kinetics("monod_psi", 1.0, (2, 3), m=3, l=2.0)
    (proj,) = restrict_rates([inner], [2, 3])
    n, s = np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 6.0])
    assert proj.psi_value(n[1:], s[1:]) == inner.psi_value(n, s)


def _ex14():
    model = build_model(3, TRIANGLE, [100, 100, 100])
    ks = (
        TimeCoefficient.sinusoid(100.0, 3.0, 2.0, 1.0, 0.5),
        TimeCoefficient.sinusoid(100.0, 7.0, 5.0, 3.0, -2.5, "sin"),
        TimeCoefficient.sinusoid(100.0, 2.0, 1.0, 2.0, -1.0),
    )
    return model, [make_kinetics("monod", k, e, l=100.0) for e, k in zip(TRIANGLE, ks)]


def test_common_period():
    _, rates = _ex14()
    assert common_period(rates) == pytest.approx(2 * math.pi)
    const = [make_kinetics("mass_action", 1.0, e) for e in TRIANGLE]
    assert common_period(const) == 1.0
    bad = rates[:2] + [make_kinetics("monod", TimeCoefficient.sinusoid(100.0, 2.0, 1.0, math.sqrt(2)), (3, 1), l=100.0)]
    with pytest.raises(MixedPeriods):
        common_period(bad)
    decay = rates[:2] + [make_kinetics("monod", TimeCoefficient.decaying(1.0, 1.0, 1.0), (3, 1), l=100.0)]
    with pytest.raises(MixedPeriods):
        common_period(decay)


def test_entrainment_short_run():
    model, rates = _ex14()
    ens = [np.array([5.0, 45.0, 100.0]), np.array([100.0, 50.0, 0.0])]
    est = entrainment_analysis(model, rates, ens, 12, 64)
    assert est.period == pytest.approx(2 * math.pi)
    assert len(est.l1_history) == 11
    assert est.periodicity_residual < 1e-4 and est.spread < 1e-4
    assert est.samples.shape == (64, 3)
    assert np.allclose(est.samples.sum(axis=1), 150.0, rtol=1e-10)
    assert est.to_csv().splitlines()[0] == "phase,n_1,n_2,n_3"


def test_entrainment_constant_and_identical():
    model = build_model(3, TRIANGLE, [100, 100, 100])
    rates = [make_kinetics("monod", k, e, l=100.0) for e, k in zip(TRIANGLE, (40, 25, 50))]
    x = np.array([5.0, 45.0, 100.0])
    est = entrainment_analysis(model, rates, [x, x.copy()], 12, 32, period=20.0)
    assert np.all(est.ic_spread_history == 0)
    assert est.periodicity_residual < 1e-6
    eq = find_equilibrium(model, rates, 150.0).point
    assert np.max(np.abs(est.samples - eq)) < 1e-6


def test_entrainment_errors_and_warning():
    model, rates = _ex14()
    with pytest.raises(LevelSetMismatch):
        entrainment_analysis(model, rates, [np.array([5.0, 45.0, 100.0]), np.array([1.0, 1.0, 1.0])], 2)
    psi_rates = [make_kinetics("monod_psi", 1.0, e, l=10.0, m=3) for e in TRIANGLE]
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        entrainment_analysis(model, psi_rates, [np.array([50.0, 50.0, 50.0])], 1, 16, period=1.0)
    assert any("Psi" in str(x.message) for x in w)


def test_slow_kinetics_polish_relative_to_flux():
    # fluxes of order 1e-3: an absolute residual test would stop ~1e-5 away
    model = build_model(3, TRIANGLE, [5, 25, 50])
    rates = [make_kinetics("saturating_power", k, e, l=100.0, a=3.0, b=3.0) for e, k in zip(TRIANGLE, (100, 40, 60))]
    a = find_equilibrium(model, rates, 60.0, n0=[5.0, 5.0, 50.0]).point
    b = find_equilibrium(model, rates, 60.0, n0=[0.0, 25.0, 35.0]).point
    assert np.abs(a - b).sum() < 1e-7

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riboflow import DenominatorPoly, RateSpec, TimeCoefficient, Transform, eval_rate, make_kinetics, rate_envelope
from riboflow.errors import BadParameter, NonFiniteInput, UnboundedCoefficient
from riboflow.rates import factor_general, factor_quasi_ltv

C3 = np.array([100.0, 100.0, 100.0])

TRANSFORMS = [
    Transform.identity(),
    Transform.power(2.0),
    Transform.monod(100.0),
    Transform.hill_ratio(350.0, 2.0),
    Transform.power_over_shifted_power(25.0, 3.0, 3.0),
    Transform.power_over_shifted_power(25.0, 2.0, 0.0),
    Transform.power_over_power_sum(350.0, 3.0, 2.0),
    Transform.power_over_power_sum(350.0, 1.5, 0.5),
]


def test_mass_action_value():
    spec = make_kinetics("mass_action", 3.0, (1, 2))
    assert eval_rate(spec, [4.0, 1.0, 0.0], [6.0, 7.0, 0.0], 0.0) == 3.0 * 4.0 * 7.0


def test_monod_hand_value():
    spec = make_kinetics("monod", 40.0, (1, 2), l=100.0)
    n = np.array([100.0, 50.0, 0.0])
    assert eval_rate(spec, n, C3 - n, 0.0) == pytest.approx(20 / 3, rel=1e-15)
    spec = make_kinetics("monod", 1.0, (1, 2), l=100.0)
    n = np.array([100.0, 0.0, 0.0])
    assert eval_rate(spec, n, C3 - n, 0.0) == pytest.approx(0.25, rel=1e-15)


@pytest.mark.parametrize("tr", TRANSFORMS, ids=lambda t: t.kind)
def test_zero_content_gives_zero_rate(tr):
    spec = RateSpec((1, 2), TimeCoefficient.constant(5.0), tr, tr)
    assert eval_rate(spec, [0.0, 3.0], [1.0, 4.0], 1.0) == 0.0
    assert eval_rate(spec, [3.0, 0.0], [1.0, 0.0], 1.0) == 0.0


@pytest.mark.parametrize("tr", TRANSFORMS, ids=lambda t: t.kind)
def test_transform_shape(tr):
    r = np.linspace(0.0, 500.0, 2001)
    v = tr(r)
    assert v[0] == 0.0
    assert np.all(np.isfinite(v)) and np.all(v >= 0)
    assert np.all(np.diff(v) > 0)
    # log and hat are consistent with the value
    assert np.allclose(np.exp(tr.log(r[1:])), v[1:], rtol=1e-12)
    assert np.allclose(tr.hat(r[1:]) * r[1:], v[1:], rtol=1e-12)
    assert Transform.from_dict(tr.to_dict()) == tr


def test_transform_constraints():
    with pytest.raises(BadParameter):
        Transform.power_over_shifted_power(1.0, 2.0, 3.0)
    with pytest.raises(BadParameter):
        Transform.monod(0.0)
    with pytest.raises(BadParameter):
        Transform.from_dict({"kind": "monod"})
    with pytest.raises(BadParameter):
        Transform.from_dict({"kind": "cubic"})


def test_hill_with_unit_exponent_is_monod():
    r = np.linspace(0, 300, 301)
    n = np.stack([r, 300 - r], axis=1)
    a = make_kinetics("hill", 2.0, (1, 2), l=30.0, L=1.0)
    b = make_kinetics("monod", 2.0, (1, 2), l=30.0)
    for x in n:
        s = np.array([300.0, 300.0]) - x
        assert eval_rate(a, x, s, 0.0) == pytest.approx(eval_rate(b, x, s, 0.0), rel=1e-14, abs=0)


def test_modified_hill_formula():
    spec = make_kinetics("modified_hill", 20.0, (1, 2), l=350.0)
    c = np.array([50.0, 100.0])
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = rng.uniform(0, 1, 2) * c
        s = c - n
        expect = 20.0 * n[0] ** 3 * s[1] ** 3 / ((350 + n[0] ** 2) * (350 + s[1] ** 2))
        assert eval_rate(spec, n, s, 0.0) == pytest.approx(expect, rel=1e-13)


def test_monod_psi_form_matches_transform_form():
    a = make_kinetics("monod_psi", 40.0, (3, 1), l=100.0, m=3)
    b = make_kinetics("monod", 40.0, (3, 1), l=100.0)
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = rng.uniform(0, 100, 3)
        s = C3 - n
        # (l + n)(l + s) = 1 + Psi
        assert eval_rate(a, n, s, 0.0) == pytest.approx(eval_rate(b, n, s, 0.0), rel=1e-13)


def test_time_coefficients():
    d = TimeCoefficient.decaying(40.0, 1.0, 0.03)
    assert d(0.0) == 80.0
    assert d.bounds() == (40.0, 80.0)
    assert d.nominal() == TimeCoefficient.constant(40.0)
    s = TimeCoefficient.sinusoid(100.0, 7.0, 5.0, 3.0, -2.5, "sin")
    assert s(1.0) == pytest.approx(100 * (7 + 5 * math.sin(3 - 2.5)))
    assert s.bounds() == (200.0, 1200.0)
    assert s.period == pytest.approx(2 * math.pi / 3)
    p = TimeCoefficient.piecewise([(0.0, TimeCoefficient.constant(1.0)), (2.0, TimeCoefficient.constant(3.0))])
    assert p(1.999) == 1.0 and p(2.0) == 3.0
    assert p.breakpoints == (2.0,)
    assert not p.is_constant
    for k in (d, s, p, TimeCoefficient.constant(2.5)):
        assert TimeCoefficient.from_dict(k.to_dict()) == k


def test_time_coefficient_rejects_nonpositive():
    with pytest.raises(BadParameter):
        TimeCoefficient.sinusoid(1.0, 1.0, 2.0, 1.0)
    with pytest.raises(BadParameter):
        TimeCoefficient.constant(0.0)
    with pytest.raises(BadParameter):
        TimeCoefficient.sinusoid(1.0, 1.0, 0.5, 1.0).nominal()


def test_envelopes():
    spec = make_kinetics("monod", 10.0, (1, 2), l=100.0)
    lo, hi = rate_envelope(spec, C3)
    assert lo(30.0, 40.0) == hi(30.0, 40.0) == pytest.approx(10.0 * 30 / 130 * 40 / 140)

    spec = make_kinetics("monod", TimeCoefficient.decaying(40.0, 1.0, 0.03), (1, 2), l=100.0)
    lo, hi = rate_envelope(spec, C3)
    assert hi(50.0, 50.0) == pytest.approx(2 * lo(50.0, 50.0))

    psi = make_kinetics("monod_psi", 1.0, (1, 2), l=100.0, m=3)
    assert 1.0 + psi.psi_value(C3, C3) == 40000.0
    lo, hi = rate_envelope(psi, C3)
    assert lo(100.0, 100.0) == pytest.approx(100.0 * 100.0 / 40000.0)
    # the lower envelope bounds every admissible state from below
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = rng.uniform(0, 100, 3)
        s = C3 - n
        assert lo(n[0], s[1]) <= eval_rate(psi, n, s, 0.0) * (1 + 1e-14) <= hi(n[0], s[1]) * (1 + 1e-14)

    grow = RateSpec((1, 2), TimeCoefficient.decaying(1.0, 1.0, -0.1))
    with pytest.raises(UnboundedCoefficient):
        rate_envelope(grow, C3)


def test_factorizations():
    ma = make_kinetics("mass_action", 7.0, (1, 2))
    n = np.array([30.0, 20.0, 10.0])
    assert factor_general(ma, n, 0.0, C3) == 7.0 * 80.0
    assert factor_quasi_ltv(ma, n, 0.0, C3) == factor_general(ma, n, 0.0, C3)

    k31 = TimeCoefficient.decaying(50.0, 1.0, 0.02)
    mo = make_kinetics("monod", k31, (3, 1), l=100.0)
    t = 3.0
    assert factor_general(mo, n, t, C3) == pytest.approx(k31(t) * 70.0 / 170.0, rel=1e-15)
    assert factor_quasi_ltv(mo, n, t, C3) == pytest.approx(k31(t) / 110.0 * 70.0 / 170.0, rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(
    st.sampled_from(TRANSFORMS),
    st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3),
    st.floats(0.0, 50.0),
)
def test_factor_reconstruction(tr, frac, t):
    spec = RateSpec((2, 3), TimeCoefficient.sinusoid(2.0, 3.0, 1.0, 1.0), tr, tr)
    n = np.array(frac) * C3
    direct = eval_rate(spec, n, C3 - n, t)
    g = factor_general(spec, n, t, C3) * float(tr(n[1]))
    assert g == pytest.approx(direct, rel=1e-14, abs=1e-300)
    if n[1] > 0:
        q = factor_quasi_ltv(spec, n, t, C3) * n[1]
        assert q == pytest.approx(direct, rel=1e-14, abs=1e-300)


def test_nonfinite_inputs():
    spec = make_kinetics("mass_action", 1.0, (1, 2))
    with pytest.raises(NonFiniteInput):
        eval_rate(spec, [np.nan, 1.0], [1.0, 1.0], 0.0)
    with pytest.raises(NonFiniteInput):
        eval_rate(spec, [1.0, 1.0], [1.0, 1.0], math.inf)


def test_denominator_poly():
    p = DenominatorPoly.from_terms([(2.0, [1, 0], [0, 1]), (0.5, [0, 0], [0, 0])])
    assert p(np.array([3.0, 5.0]), np.array([7.0, 11.0])) == 2 * 3 * 11 + 0.5
    with pytest.raises(BadParameter):
        DenominatorPoly.from_terms([(-1.0, [0], [0])])
    spec = RateSpec((1, 2), TimeCoefficient.constant(1.0), psi=p)
    assert RateSpec.from_dict(spec.to_dict()) == spec

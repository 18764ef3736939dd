import dataclasses
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptpdm import expr as ex
from ptpdm import operators as op
from ptpdm import perturbative as pt
from ptpdm.errors import ParityError, PoleError
from strategies import even_polynomials

nonzero = st.builds(Fraction, st.integers(1, 4) | st.integers(-4, -1), st.integers(1, 3))
XS = ex.sample_points((-1.2, 1.2), 40, seed=11)
PROPERTY = settings(max_examples=20, deadline=None)


def cubic():
    return pt.ModelSpec(ex.parse("x^2/2"), c0=0, c1=Fraction(-2, 3), epsilon=0.05, domain=(-3, 3))


def poschl_teller(lam=3):
    return pt.ModelSpec(ex.parse("l*(l-1)/2*sec(x)^2", {"l": lam}), c0=Fraction(1, 3), c1=Fraction(-1, 3))


@st.composite
def models(draw):
    return pt.ModelSpec(draw(even_polynomials(max_degree=6)), c0=draw(nonzero), c1=draw(nonzero), epsilon=0.01)


# ----------------------------------------------------------------- derivation

def test_cubic_closed_forms():
    pdm = pt.derive_pdm(cubic())
    assert ex.simplify(ex.sub(pdm.Vi, ex.parse("x^3"))).is_zero
    assert ex.simplify(ex.sub(pdm.M2, ex.parse("6*x^2"))).is_zero
    assert ex.simplify(ex.sub(pdm.Veff2, ex.parse("(3*x^4 - 4)/2"))).is_zero


def test_generator_coefficients_of_cubic():
    g = pt.build_generator(cubic())
    assert ex.render(g.R0) == ex.render(ex.simplify(ex.parse("-x^2")))
    assert g.S3 == ex.simplify(ex.const(Fraction(4, 3)))


def test_trivial_constants_give_hermitian_model():
    m = pt.ModelSpec(ex.parse("x^2"), c0=0, c1=0)
    pdm = pt.derive_pdm(m)
    assert pdm.Vi.is_zero and pdm.M2.is_zero and pdm.Veff2.is_zero


@PROPERTY
@given(models())
def test_derived_parities(m):
    pdm = pt.derive_pdm(m)
    assert pdm.Vi.is_zero or ex.parity_of(pdm.Vi) is ex.Parity.ODD
    for e in (pdm.M2, pdm.Veff2):
        assert e.is_zero or ex.parity_of(e) is ex.Parity.EVEN


@PROPERTY
@given(models())
def test_residuals_and_identities_vanish(m):
    assert pt.check_condition_system(m).passed
    ids = pt.check_operator_conditions(m)
    assert ids.passed
    assert all(ids.structural_zero.values())


@PROPERTY
@given(models(), st.sampled_from(["Vi", "M2", "Veff2"]))
def test_one_percent_corruption_is_detected(m, which):
    pdm = pt.derive_pdm(m)
    bad = dataclasses.replace(pdm, **{which: ex.simplify(ex.mul(Fraction(101, 100), getattr(pdm, which)))})
    res = pt.check_condition_system(m, pdm=bad)
    assert max(res.residuals.values()) >= 1e-4


@pytest.mark.parametrize("which", ["Vi", "M2", "Veff2"])
def test_corruption_hook_on_examples(which):
    for m in (cubic(), poschl_teller()):
        bad = pt.corrupt(pt.derive_pdm(m), 0.01, which)
        assert not pt.check_condition_system(m, pdm=bad).passed


def test_odd_potential_is_rejected():
    with pytest.raises(ParityError):
        pt.ModelSpec(ex.parse("x^3 + x^2"), c1=1)


def test_pole_in_domain_is_rejected():
    with pytest.raises(PoleError):
        pt.ModelSpec(ex.parse("sec(x)^2"), domain=(-1.6, 1.6))


def test_complex_constants_rejected():
    with pytest.raises(ValueError):
        pt.ModelSpec(ex.parse("x^2"), c0=complex(0, 1))


def test_regime_warning():
    m = cubic().with_epsilon(1.0)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        v = pt.regime_check(pt.derive_pdm(m), np.linspace(-3, 3, 50))
    assert v > pt.REGIME_LIMIT and rec


def test_mass_positivity():
    pdm = pt.derive_pdm(cubic())
    assert pdm.check_mass(XS)
    neg = dataclasses.replace(pdm, M2=ex.parse("-1000*x^2"), epsilon=1.0)
    assert not neg.check_mass(XS)


# ---------------------------------------------------------------- observables

@PROPERTY
@given(models())
def test_observable_paths_agree(m):
    g = pt.build_generator(m)
    Xc, Pc = pt.closed_form_observables(m)
    for which, closed in (("x", Xc), ("p", Pc)):
        a = pt.observable_by_commutators(which, g)
        b = pt.observable_by_sums(which, g)
        for u, v, w in zip(a.orders(), b.orders(), closed.orders()):
            assert op.op_max_deviation(u, v, XS) <= 1e-9
            assert op.op_max_deviation(u, w, XS) <= 1e-9


@PROPERTY
@given(models())
def test_first_order_position_is_anti_hermitian(m):
    X = pt.observable_orders("x", m)
    assert op.op_max_deviation(op.adjoint(X.O1), -X.O1, XS) <= 1e-9


@pytest.mark.parametrize("which", ["x", "p"])
def test_observables_reduce_at_zero_coupling(which):
    for m in (cubic(), poschl_teller()):
        o = pt.observable_orders(which, m).at(0.0)
        base = op.POSITION if which == "x" else op.MOMENTUM
        assert op.op_max_deviation(o, base, XS) == 0.0


def test_observable_continuity_in_coupling():
    X = pt.observable_orders("x", poschl_teller())
    d = [op.op_max_deviation(X.at(e), op.POSITION, XS) for e in (1e-4, 5e-5, 2.5e-5)]
    assert d[0] > d[1] > d[2]
    assert d[0] / d[1] == pytest.approx(2.0, rel=0.05)


# -------------------------------------------------------------- wavefunctions

@PROPERTY
@given(models())
def test_q1_squared_two_ways(m):
    g = pt.build_generator(m)
    assert op.op_max_deviation(pt.q1_squared(g), pt.q1_squared_from_w(g), XS) <= 1e-9


def test_wavefunction_map_zero_coupling():
    psi = ex.parse("cos(x)^3")
    m = poschl_teller().with_epsilon(0.0)
    assert ex.max_relative_deviation(pt.map_wavefunction(psi, m), psi, XS) == 0.0


def test_wavefunction_first_order_is_odd_and_imaginary():
    w = pt.wavefunction_orders(ex.parse("cos(x)^3"), poschl_teller())
    v = ex.evaluate_array(w.first, XS)
    assert np.allclose(v.real, 0.0)
    assert ex.parity_of(w.first) is ex.Parity.ODD


# ------------------------------------------------------------------ units

@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_scales_round_trip(length, mass, hbar, x, p, e):
    s = pt.DimensionalScales(length, mass, hbar)
    back = s.to_dimensional(*s.to_dimensionless(x, p, e))
    assert np.allclose(back, (x, p, e), rtol=1e-14, atol=1e-300)

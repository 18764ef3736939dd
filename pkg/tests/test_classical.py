import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ptpdm import classical as cl
from ptpdm.errors import MassError, SingularRegionError


def model(eps=0.2, V0=1.0, k=1.0, m0=1.0):
    return cl.build_classical_pt_model(V0, k, m0, eps)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-1.5, 1.5), st.floats(0.0, 0.3))
def test_hamilton_gradients_match_finite_differences(x, p, eps):
    cm = model(eps)
    assume(cm.mass_factor(x) > 0.1)
    h = 1e-6
    dx = (cm.H(x + h, p) - cm.H(x - h, p)) / (2 * h)
    dp = (cm.H(x, p + h) - cm.H(x, p - h)) / (2 * h)
    assert cm.dH_dx(x, p) == pytest.approx(dx, rel=1e-6, abs=1e-6)
    assert cm.dH_dp(x, p) == pytest.approx(dp, rel=1e-6, abs=1e-6)
    gx, gp = cl._scalar_grad(cm)(x, p)
    assert gx == pytest.approx(float(cm.dH_dx(x, p)), rel=1e-12, abs=1e-12)
    assert gp == pytest.approx(float(cm.dH_dp(x, p)), rel=1e-12, abs=1e-12)


def test_zero_coupling_reduces_to_hermitian_quantities():
    cm = model(0.0)
    x = np.linspace(-1, 1, 9)
    p = np.linspace(-2, 2, 9)
    assert np.array_equal(cm.X(x, p), x)
    assert np.array_equal(cm.P(x, p), p)
    assert np.array_equal(cm.mass(x), np.ones_like(x))


def test_continuity_in_coupling():
    x = np.linspace(-0.9, 0.9, 7)
    p = np.linspace(-1, 1, 7)
    base = model(0.0)
    d = []
    for e in (0.01, 0.005):
        cm = model(e)
        d.append((
            np.max(np.abs(cm.H(x, p) - base.H(x, p))),
            np.max(np.abs(cm.mass(x) - base.mass(x))),
            np.max(np.abs(cm.X(x, p).imag)),
            np.max(np.abs(cm.X(x, p).real - x)),
        ))
    ratios = np.array(d[0]) / np.array(d[1])
    assert ratios[0] == pytest.approx(4.0, rel=1e-3)
    assert ratios[1] == pytest.approx(4.0, rel=1e-3)
    assert ratios[2] == pytest.approx(2.0, rel=1e-3)
    assert ratios[3] == pytest.approx(4.0, rel=1e-3)


@pytest.mark.parametrize("eps, amp", [(0.0, 0.3), (0.2, 0.3), (0.2, 0.6)])
def test_energy_conservation(eps, amp):
    traj = cl.integrate_trajectory(model(eps), amp, 0.0, steps=10_000)
    assert traj.energy_drift <= 1e-6


@pytest.mark.parametrize("eps", [0.0, 0.2])
def test_small_oscillation_period(eps):
    cm = model(eps)
    traj = cl.integrate_trajectory(cm, 0.02, 0.0, steps=10_000)
    assert traj.period() == pytest.approx(cm.period_estimate, rel=0.01)


def test_second_order_variant_is_less_accurate():
    cm = model(0.2)
    a = cl.integrate_trajectory(cm, 0.6, 0.0, steps=2000, order=2).energy_drift
    b = cl.integrate_trajectory(cm, 0.6, 0.0, steps=2000, order=4).energy_drift
    assert b < a


def test_singular_region():
    with pytest.raises(SingularRegionError):
        cl.integrate_trajectory(model(0.2), math.pi / 2, 0.0, steps=10)


def test_mass_window():
    with pytest.raises(MassError):
        cl.build_classical_pt_model(1.0, 1.0, 1.0, 0.3, x_range=(-1.5, 1.5))
    with pytest.raises(MassError):
        cl.ClassicalModel(1.0, 1.0, 1.0, 5.0)


def test_quantum_parameters_invert_scales():
    q = cl.quantum_pt_parameters(2.0, 1.5, 0.7, 0.1, 1e-3)
    nu = q["hbar"] ** 2 * 1.5**2 / 0.7
    assert nu == pytest.approx(1e-3)
    assert nu * q["lam"] * (q["lam"] - 1) / 2 == pytest.approx(2.0)


def test_hbar_limit():
    rep = cl.check_hbar_limit(model(0.2))
    assert rep.passed
    assert rep.monotone
    assert rep.points == 20

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptpdm import expr as ex
from ptpdm import perturbative as pt
from ptpdm import spectral as sp
from ptpdm.errors import MassError
from strategies import even_polynomials

nonzero = st.builds(Fraction, st.integers(1, 3) | st.integers(-3, -1), st.integers(1, 3))


def cubic(eps=0.05, domain=(-10.0, 10.0)):
    return pt.ModelSpec(ex.parse("x^2/2"), c0=0, c1=Fraction(-2, 3), epsilon=eps, domain=domain)


def test_grid_geometry():
    g = sp.Grid(-1.0, 1.0, 99)
    assert g.spacing == pytest.approx(0.02)
    assert g.points.size == 99 and g.midpoints.size == 100
    assert np.array_equal(g.points, -g.points[::-1])
    assert g.refine().spacing == pytest.approx(g.spacing / 2)


@pytest.mark.parametrize("args", [(1.0, -1.0, 100), (-1.0, 1.0, 8)])
def test_grid_rejects_bad_input(args):
    with pytest.raises(ValueError):
        sp.Grid(*args)


@settings(max_examples=15, deadline=None)
@given(even_polynomials(max_degree=4), nonzero, nonzero, st.floats(0.0, 0.05))
def test_pdm_matrix_is_exactly_symmetric(Vr, c0, c1, eps):
    m = pt.ModelSpec(Vr, c0=c0, c1=c1, epsilon=eps, domain=(-1.0, 1.0))
    pdm = pt.derive_pdm(m)
    try:
        a = sp.discretize_pdm(m, pdm, sp.Grid(-1.0, 1.0, 64))
    except MassError:
        return
    d = a.dense()
    assert np.array_equal(d, d.T)
    assert np.all(np.isreal(sp.eigen_lowest(a, 3)))


def test_pt_matrix_is_pt_symmetric_on_symmetric_grid():
    a = sp.discretize_pt(cubic(), sp.Grid(-10, 10, 200))
    assert a.pt_deviation() == 0.0
    d = a.dense()
    assert a.is_symmetric() and not np.allclose(d, d.conj().T)


def test_second_order_grid_convergence():
    m = pt.ModelSpec(ex.parse("x^2/2"), domain=(-10, 10))
    g = sp.Grid(-10, 10, 200)
    e = [sp.eigen_lowest(sp._h0_matrix(m, gg), 3) for gg in (g, g.refine(), g.refine().refine())]
    ratio = (e[0] - e[1]) / (e[1] - e[2])
    assert np.all(np.abs(ratio - 4.0) <= 0.5)


def test_harmonic_levels():
    res = sp.harmonic_levels()
    assert np.all(res.abs_error <= 1e-6)


def test_poschl_teller_levels():
    res = sp.poschl_teller_levels(lam=3)
    assert np.all(res.rel_error <= 1e-5)


def test_sparse_and_dense_paths_agree():
    m = cubic(0.1)
    a = sp.discretize_pt(m, sp.Grid(-10, 10, 800))
    small = sp.discretize_pt(m, sp.Grid(-10, 10, 300))
    w = sp.eigen_lowest(a, 4)
    ws = sp.eigen_lowest(small, 4)
    assert np.allclose(w, ws, atol=5e-3)
    assert np.max(np.abs(w.imag)) < 1e-10


def test_rayleigh_polish_is_stationary():
    a = sp.discretize_pt(cubic(0.1), sp.Grid(-10, 10, 800))
    w, v = sp.eigen_lowest(a, 2, vectors=True)
    wp = sp.eigen_lowest(a, 2, polish=True)
    assert np.allclose(w, wp, rtol=1e-10)


def test_neville_is_exact_for_polynomials():
    xs = [0.4, 0.3, 0.2, 0.1]
    ys = [1 + 2 * x - 3 * x**2 + x**3 for x in xs]
    assert sp.neville(xs, ys) == pytest.approx(1.0, abs=1e-13)


def test_slope_fit_recovers_power():
    eps = np.array([0.02, 0.04, 0.06, 0.08, 0.1])
    assert sp.fit_slope(eps, 3.0 * eps**4) == pytest.approx(4.0, abs=1e-12)
    assert math.isnan(sp.fit_slope(eps[:3], eps[:3] ** 4))


@pytest.mark.parametrize("sweep", [[0.1], [0.01, 0.02, 0.03, 0.035], [0.0, 0.1, 0.2, 0.3]])
def test_sweep_validation(sweep):
    with pytest.raises(ValueError):
        sp.compare_spectra(cubic(), sp.Grid(-10, 10, 200), sweep, 2)


def test_sweep_is_deterministic_across_workers():
    g = sp.Grid(-10, 10, 600)
    sweep = [0.02, 0.04, 0.06, 0.08, 0.1]
    a = sp.compare_spectra(cubic(), g, sweep, 2, jobs=1, refine=False)
    b = sp.compare_spectra(cubic(), g, sweep, 2, jobs=3, refine=False)
    assert np.array_equal(a.E_pt, b.E_pt) and np.array_equal(a.E_pdm, b.E_pdm)


def test_cubic_second_order_matches_anharmonic_result():
    # ground-state shift of p^2/2 + x^2/2 + g x^3 is -11 g^2 / 8; here g = i
    g = sp.Grid(-10, 10, 1200)
    a, b = (sp.rs_second_order_oracle(cubic(), gg, 1)[0] for gg in (g, g.refine()))
    assert (4 * b.resolvent - a.resolvent) / 3 == pytest.approx(11 / 8, rel=1e-7)
    assert (4 * b.pdm_expectation - a.pdm_expectation) / 3 == pytest.approx(11 / 8, rel=1e-7)
    assert b.tail < 1e-9


def test_three_way_cubic():
    res = sp.three_way_second_order(cubic(), sp.Grid(-10, 10, 1200))
    assert res.passed
    assert res.full_solve == pytest.approx(11 / 8, rel=1e-6)


def test_mass_error_when_mass_turns_negative():
    m = pt.ModelSpec(ex.parse("x^2/2"), c0=-10, c1=Fraction(1, 3), epsilon=0.5, domain=(-10, 10))
    with pytest.raises(MassError):
        sp.discretize_pdm(m, pt.derive_pdm(m), sp.Grid(-10, 10, 100))


def test_reality_of_pt_spectrum():
    rep = sp.compare_spectra(cubic(), sp.Grid(-10, 10, 600), [0.02, 0.04, 0.06, 0.08, 0.1], 3, refine=False)
    assert rep.reality_ok()
    rows = list(rep.rows())
    assert len(rows) == 15 and rows[0][:2] == (0.02, 0)

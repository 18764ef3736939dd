import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptpdm import examples as exm
from ptpdm import expr as ex
from ptpdm import operators as op
from ptpdm import perturbative as pt
from ptpdm import transcription as tr


def _diff_terms(report):
    return {(a.name, t.order, t.power) for a in report.audits for t in a.mismatches()}


# ------------------------------------------------------------ reproductions

def test_cubic_reproduction_passes():
    rep = exm.reproduce_cubic()
    assert rep.passed, rep.to_text()
    assert json.loads(json.dumps(rep.to_json()))["passed"]


@pytest.mark.parametrize("mu", [1, "1/2", 2])
def test_cubic_reproduction_other_frequencies(mu):
    assert exm.reproduce_cubic(mu=mu, audit=False).passed


def test_poschl_teller_reproduction_passes():
    rep = exm.reproduce_poschl_teller()
    assert rep.passed, rep.to_text()


@pytest.mark.parametrize("lam", [4, 5])
def test_poschl_teller_other_depths(lam):
    assert exm.reproduce_poschl_teller(lam=lam, audit=False).passed


def test_reports_are_deterministic():
    a = exm.reproduce_poschl_teller(seed=3).to_json()
    b = exm.reproduce_poschl_teller(seed=3).to_json()
    assert a == b


def test_unknown_example():
    with pytest.raises(KeyError):
        exm.reproduce("square-well")


def test_lambda_must_exceed_two():
    with pytest.raises(ValueError):
        exm.PoschlTellerExample(lam=2)


# --------------------------------------------------------------------- units

examples_st = st.one_of(
    st.builds(exm.PoschlTellerExample, lam=st.sampled_from([3, 4, "7/2"]), k=st.floats(0.2, 5),
              m0=st.floats(0.2, 5), hbar=st.floats(0.2, 5)),
    st.builds(exm.CubicExample, mu=st.sampled_from([1, 2]), m0=st.floats(0.2, 5), hbar=st.floats(0.2, 5),
              length=st.floats(0.2, 5)),
)


@settings(max_examples=60, deadline=None)
@given(examples_st, st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(1e-4, 1.0))
def test_unit_conversion_round_trip(example, x, p, e, eps):
    d = exm.convert_units(example, "to_dimensional", x=x, p=p, energy=e, eps=eps)
    back = exm.convert_units(example, "to_dimensionless", **d)
    for key, v in (("x", x), ("p", p), ("energy", e), ("eps", eps)):
        assert back[key] == pytest.approx(v, rel=1e-14, abs=1e-300)


def test_poschl_teller_coupling_conversion():
    pt3 = exm.PoschlTellerExample(lam=3)
    assert pt3.V0 == 3.0
    assert pt3.eps_dimensional(1.0) == 12.0


def test_convert_units_rejects_unknown_direction():
    with pytest.raises(ValueError):
        exm.convert_units(exm.CubicExample(), "sideways", x=1.0)


# ------------------------------------------------------------ typeset audit

def test_cubic_audit_flags_known_slips_only():
    rep = tr.audit_cubic()
    assert _diff_terms(rep) == {("closed-form-momentum", 2, 2), ("wavefunction-map", 2, 0)}
    names = {a.name for a in rep.audits if a.matches}
    assert {"closed-form-position", "cubic-position", "cubic-momentum"} <= names


def test_poschl_teller_audit_flags_known_slips_only():
    rep = tr.audit_poschl_teller(3)
    assert _diff_terms(rep) == {
        ("closed-form-position", 2, 0),
        ("closed-form-momentum", 2, 0),
        ("closed-form-momentum", 2, 2),
        ("wavefunction-map", 2, 0),
        ("wavefunction-map", 2, 1),
        ("sec2-momentum", 2, 0),
    }
    for name in ("sec2-imaginary-potential", "sec2-mass", "sec2-effective-potential", "sec2-position",
                 "sec2-ground-state"):
        assert next(a for a in rep.audits if a.name == name).matches


def test_restoring_tan_repairs_sec2_momentum():
    m = exm.PoschlTellerExample(lam=3).model()
    P = pt.observable_orders("p", m)
    xs = ex.sample_points(m.domain, 20)
    (_, _), (P1, P2) = tr.printed_pt_observables(3, restore_tan=True)
    assert op.op_max_deviation(P2, P.O2, xs) < 1e-12
    (_, _), (_, P2_lit) = tr.printed_pt_observables(3)
    assert op.op_max_deviation(P2_lit, P.O2, xs) > 1e-3


def test_audit_report_serialises():
    rep = tr.audit_poschl_teller(3)
    text = rep.to_text()
    assert "DIFF" in text and "machine:" in text
    data = json.loads(json.dumps(rep.to_json()))
    assert not data["clean"]


def test_corrected_general_forms_match_on_random_model():
    m = pt.ModelSpec(ex.parse("x^4/4 - x^2"), c0="1/2", c1="1/5")
    xs = ex.sample_points(m.domain, 30, seed=2)
    Xc, Pc = pt.closed_form_observables(m)
    for which, closed in (("x", Xc), ("p", Pc)):
        o = pt.observable_orders(which, m)
        assert max(op.op_max_deviation(a, b, xs) for a, b in zip(o.orders(), closed.orders())) < 1e-12


# ----------------------------------------------------------- numerical side

def test_poschl_teller_second_order_requires_deep_well():
    with pytest.raises(ValueError):
        exm.poschl_teller_second_order(lam=3)


def test_poschl_teller_second_order_consistency():
    res = exm.poschl_teller_second_order()
    assert res.passed
    assert np.isfinite(res.full_solve)

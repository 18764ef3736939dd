"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line with the measured quantity, the
pinned tolerance and the wall time.
"""
import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from ptpdm import classical as cl
from ptpdm import examples as exm
from ptpdm import expr as ex
from ptpdm import perturbative as pt
from ptpdm import spectral as sp
from ptpdm.cli import EXIT_FAIL, EXIT_OK, main


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail, seconds):
        with capsys.disabled():
            print(f"\n[acceptance {n}] {'PASS' if ok else 'FAIL'}  {detail}  ({seconds:.2f} s)")
    return _report


def _max_dev(rep):
    return max(c.deviation for c in rep.checks)


def _random_even_models(count=10, seed=2024):
    rng = np.random.default_rng(seed)
    models = []
    for _ in range(count):
        deg = int(rng.integers(1, 4))
        terms = [f"({Fraction(int(rng.integers(1, 7)), int(rng.integers(1, 4)))})*x^{2 * k}"
                 for k in range(1, deg + 1)]
        c0, c1 = (Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 4))) for _ in range(2))
        models.append(pt.ModelSpec(ex.parse(" + ".join(terms)), c0=c0, c1=c1 or 1, epsilon=0.01))
    return models


def test_criterion_1_cubic_golden_formulas(report):
    t = time.perf_counter()
    m = exm.CubicExample().model()
    pdm = pt.derive_pdm(m)
    xs = ex.sample_points(m.domain, 20)
    devs = [ex.max_relative_deviation(pdm.Vi, ex.parse("x^3"), xs),
            ex.max_relative_deviation(pdm.M2, ex.parse("6*x^2"), xs),
            ex.max_relative_deviation(pdm.Veff2, ex.parse("(3*x^4 - 4)/2"), xs)]
    exact = all(ex.simplify(ex.sub(a, ex.parse(b))).is_zero
                for a, b in ((pdm.Vi, "x^3"), (pdm.M2, "6*x^2"), (pdm.Veff2, "(3*x^4 - 4)/2")))
    rep = exm.reproduce_cubic(audit=False)
    dt = time.perf_counter() - t
    ok = exact and max(devs) <= 1e-12 and rep.passed and dt < 1.0
    report(1, ok, f"max dev {max(max(devs), _max_dev(rep)):.1e} <= 1e-12, exact rationals {exact}", dt)
    assert ok


def test_criterion_2_poschl_teller_golden_formulas(report):
    t = time.perf_counter()
    m = exm.PoschlTellerExample(lam=3).model()
    pdm = pt.derive_pdm(m)
    xs = ex.sample_points(m.domain, 20)
    devs = [ex.max_relative_deviation(pdm.Vi, ex.parse("12*sec(x)^4*tan(x)"), xs),
            ex.max_relative_deviation(pdm.M2, ex.parse("12*sec(x)^4*(5*sec(x)^2 - 4)"), xs)]
    rep = exm.reproduce_poschl_teller(lam=3, audit=False)
    dt = time.perf_counter() - t
    assert exm.SAMPLES == 20 and exm.POINTWISE_TOL == 1e-9
    worst = max(max(devs), _max_dev(rep))
    ok = worst <= 1e-9 and rep.passed and dt < 1.0
    report(2, ok, f"max pointwise dev {worst:.1e} <= 1e-9 at 20 points", dt)
    assert ok


def test_criterion_3_operator_identities(report):
    t = time.perf_counter()
    models = [exm.CubicExample().model(), exm.PoschlTellerExample(lam=3).model(), *_random_even_models()]
    worst = 0.0
    for m in models:
        xs = ex.sample_points(m.domain, 100)
        ids = pt.check_operator_conditions(m, xs=xs)
        worst = max(worst, ids.deviations["commutator"], ids.deviations["second_order"])
    dt = time.perf_counter() - t
    ok = worst <= 1e-9 and dt < 10.0 and len(models) == 12
    report(3, ok, f"{len(models)} models, worst coefficient dev {worst:.1e} <= 1e-9 at 100 points", dt)
    assert ok


def test_criterion_4_spectral_scaling(report):
    t = time.perf_counter()
    rep = exm.cubic_spectrum(n=2400, domain=(-12.0, 12.0), levels=4,
                             eps_values=(0.02, 0.04, 0.06, 0.08, 0.1))
    dt = time.perf_counter() - t
    slopes = np.asarray(rep.slopes)
    im = float(np.max(rep.im_max))
    ok = bool(np.all((slopes >= 3.5) & (slopes <= 4.5))) and im <= 1e-7 and dt <= 300
    report(4, ok, f"slopes {np.round(slopes, 3).tolist()} in [3.5, 4.5], max|Im E| {im:.1e} <= 1e-7", dt)
    assert ok


def test_criterion_5_unperturbed_spectra(report):
    t = time.perf_counter()
    h = sp.harmonic_levels(k=6)
    p = sp.poschl_teller_levels(lam=3, k=4)
    dt = time.perf_counter() - t
    assert np.allclose(h.exact, np.arange(6) + 0.5)
    assert np.allclose(p.exact, (np.arange(4) + 3) ** 2 / 2)
    ha, pr = float(np.max(h.abs_error)), float(np.max(p.rel_error))
    ok = ha <= 1e-6 and pr <= 1e-5 and dt < 60
    report(5, ok, f"harmonic abs {ha:.1e} <= 1e-6, Poschl-Teller rel {pr:.1e} <= 1e-5", dt)
    assert ok


def test_criterion_6_three_way_second_order(report):
    t = time.perf_counter()
    results = {"cubic": exm.cubic_second_order(), "poschl-teller": exm.poschl_teller_second_order()}
    dt = time.perf_counter() - t
    parts, ok = [], True
    for name, r in results.items():
        assert r.tolerance == max(1e-6, r.tail)
        ok &= r.spread <= r.tolerance
        parts.append(f"{name} E2 {r.rs_oracle:.9g} spread {r.spread:.1e} <= {r.tolerance:.0e}")
    ok &= results["cubic"].rs_oracle == pytest.approx(11 / 8, rel=1e-6)
    report(6, ok, "; ".join(parts), dt)
    assert ok


def test_criterion_7_classical_limit(report):
    t = time.perf_counter()
    cm = cl.build_classical_pt_model(1.0, 1.0, 1.0, 0.2)
    lim = cl.check_hbar_limit(cm)
    traj = cl.integrate_trajectory(cm, 0.3 * math.pi / 2, 0.0, steps=10_000)
    free = cl.build_classical_pt_model(1.0, 1.0, 1.0, 0.0)
    assert free.omega == math.sqrt(2.0)
    small = cl.integrate_trajectory(free, 0.02, 0.0, steps=10_000)
    period_err = abs(small.period() / free.period_estimate - 1.0)
    dt = time.perf_counter() - t
    ok = (lim.points == 20 and lim.extrapolated_deviation <= 1e-9 and traj.energy_drift <= 1e-6
          and len(traj.t) - 1 == 10_000 and period_err <= 0.01)
    report(7, ok, f"limit dev {lim.extrapolated_deviation:.1e} <= 1e-9, drift {traj.energy_drift:.1e} <= 1e-6, "
                  f"period err {period_err:.1e} <= 1e-2", dt)
    assert ok


def test_criterion_8_verification_teeth(report, tmp_path):
    t = time.perf_counter()
    largest = []
    for m in (exm.CubicExample().model(), exm.PoschlTellerExample(lam=3).model()):
        res = pt.check_condition_system(m, pdm=pt.corrupt(pt.derive_pdm(m), 0.01))
        largest.append(max(res.residuals.values()))
    worst = min(largest)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"potential": "l*(l-1)/2*sec(x)^2", "parameters": {"l": 3}, "c0": "1/3",
                               "c1": "-1/3", "epsilon": 0.05, "domain": [-1.4, 1.4],
                               "output_dir": str(tmp_path / "out")}))
    code = main(["verify", "--config", str(cfg), "--perturb", "0.01"])
    dt = time.perf_counter() - t
    ok = worst > 1e-4 and code == EXIT_FAIL
    report(8, ok, f"largest corrupted residual (weaker example) {worst:.1e} > 1e-4, CLI exit {code}", dt)
    assert ok


def test_criterion_9_transcription_audit(report, tmp_path):
    t = time.perf_counter()
    ok = True
    notes = []
    for which in ("cubic", "poschl-teller"):
        d = tmp_path / which
        code = main(["reproduce", which, "--output-dir", str(d)])
        diff = json.loads((d / f"{which}_transcription_diff.json").read_text())
        text = (d / f"{which}_transcription_diff.txt").read_text()
        rep = json.loads((d / f"{which}_report.json").read_text())
        expansions = diff["machine_expansions"]
        ok &= code == EXIT_OK and rep["passed"] and bool(expansions) and "machine:" in text
        ok &= any(f["terms"] for f in diff["formulas"])
        n_diff = sum(not f["matches"] for f in diff["formulas"])
        notes.append(f"{which}: {len(expansions)} expansions, {n_diff} typeset formula(s) differ")
    dt = time.perf_counter() - t
    report(9, ok, "; ".join(notes) + "; machine path passes criteria 1-6 above", dt)
    assert ok

import csv
import json

import numpy as np
import pytest

from ptpdm import expr as ex
from ptpdm import operators as op
from ptpdm import perturbative as pt
from ptpdm.cli import EXIT_CONFIG, EXIT_DOMAIN, EXIT_FAIL, EXIT_OK, main

CUBIC = {"potential": "x^2/2", "c0": 0, "c1": "-2/3", "epsilon": 0.05, "domain": [-3, 3]}
PT3 = {"potential": "l*(l-1)/2*sec(x)^2", "parameters": {"l": 3}, "c0": "1/3", "c1": "-1/3",
       "epsilon": 0.05, "domain": [-1.4, 1.4]}


@pytest.fixture
def run(tmp_path):
    def _run(command, cfg=None, *extra):
        argv = [command]
        if cfg is not None:
            cfg = {"output_dir": str(tmp_path / "out"), **cfg}
            path = tmp_path / "cfg.json"
            path.write_text(json.dumps(cfg))
            argv += ["--config", str(path)]
        return main(argv + list(extra))
    return _run


@pytest.fixture
def out(tmp_path):
    return tmp_path / "out"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -------------------------------------------------------------------- derive

def test_derive_cubic_writes_x_cubed(run, out):
    assert run("derive", CUBIC) == EXIT_OK
    vi = ex.parse((out / "vi.txt").read_text().strip())
    xs = np.linspace(-3, 3, 50)
    assert np.max(np.abs(ex.evaluate_array(vi, xs) - xs**3)) <= 1e-12
    model = json.loads((out / "model.json").read_text())
    assert model["schema_version"] == 1 and model["M2"]


def test_derive_trivial_constants(run, out):
    assert run("derive", {**CUBIC, "c0": 0, "c1": 0}) == EXIT_OK
    for name in ("vi.txt", "m2.txt", "veff2.txt"):
        assert (out / name).read_text().strip() == "0"


def test_derive_odd_potential_is_domain_error(run, capsys):
    assert run("derive", {**CUBIC, "potential": "x^3 + x^2"}) == EXIT_DOMAIN
    assert "parity" in capsys.readouterr().err


def test_unknown_key_names_its_path(run, capsys):
    assert run("derive", {**CUBIC, "potentail": "x^2"}) == EXIT_CONFIG
    assert "$" in capsys.readouterr().err


def test_bad_expression_is_config_error(run, capsys):
    assert run("derive", {**CUBIC, "potential": "x + * 2"}) == EXIT_CONFIG
    assert "$.potential" in capsys.readouterr().err


def test_pole_in_domain_is_domain_error(run):
    assert run("derive", {**PT3, "domain": [-1.6, 1.6]}) == EXIT_DOMAIN


# -------------------------------------------------------------------- verify

def test_verify_poschl_teller(run, out):
    assert run("verify", PT3) == EXIT_OK
    rows = read_csv(out / "residuals.csv")
    assert rows[0] == ["equation_id", "max_residual", "grid_points"]
    assert len(rows) > 1 and all(float(r[1]) <= 1e-9 for r in rows[1:])
    ids = json.loads((out / "identities.json").read_text())
    assert ids["passed"] and ids["schema_version"] == 1


def test_verify_perturb_hook_fails(run, out):
    assert run("verify", PT3, "--perturb", "0.01") == EXIT_FAIL
    rows = read_csv(out / "residuals.csv")[1:]
    assert max(float(r[1]) for r in rows) > 1e-4


def test_empty_sweep_rejected(run):
    cfg = {k: v for k, v in PT3.items() if k != "epsilon"}
    assert run("verify", {**cfg, "epsilon_sweep": []}) == EXIT_CONFIG


# ------------------------------------------------------------------ spectrum

SPEC = {k: v for k, v in CUBIC.items() if k != "epsilon"} | {
    "domain": [-12, 12], "grid_n": 2400, "levels": 2, "epsilon_sweep": [0.02, 0.04, 0.06, 0.08, 0.1]}


def test_spectrum_single_value_rejected(run):
    assert run("spectrum", {**SPEC, "epsilon_sweep": [0.1]}) == EXIT_CONFIG


def test_spectrum_outputs(run, out):
    assert run("spectrum", SPEC) == EXIT_OK
    rows = read_csv(out / "spectrum.csv")
    assert rows[0] == ["epsilon", "level", "re_E_pt", "im_E_pt", "E_pdm", "gap"]
    assert len(rows) == 1 + 5 * 2
    assert float(rows[1][0]) == 0.02 and rows[1][1] == "0"
    rep = json.loads((out / "report.json").read_text())
    assert rep["schema_version"] == 1


def test_spectrum_reruns_are_byte_identical(run, out):
    assert run("spectrum", SPEC) == EXIT_OK
    first = (out / "spectrum.csv").read_bytes()
    assert run("spectrum", SPEC, "--jobs", "3") == EXIT_OK
    assert (out / "spectrum.csv").read_bytes() == first


# -------------------------------------------------------------- wavefunction

def _psi_columns(out):
    rows = read_csv(out / "psi_mapped.csv")
    assert rows[0] == ["x", "re_psi", "im_psi", "re_Psi", "im_Psi"]
    a = np.array(rows[1:], dtype=float)
    return a[:, 0], a[:, 1] + 1j * a[:, 2], a[:, 3] + 1j * a[:, 4]


def test_wavefunction_first_order_matches_generator(run, out):
    eps = 1e-4
    assert run("wavefunction", {**PT3, "epsilon": eps, "psi": "cos(x)^3"}) == EXIT_OK
    x, psi, Psi = _psi_columns(out)
    m = pt.ModelSpec(ex.parse("3*sec(x)^2"), c0="1/3", c1="-1/3", domain=(-1.4, 1.4))
    q1psi = ex.evaluate_array(op.apply(pt.build_generator(m).Q1, ex.parse("cos(x)^3")), x)
    # real psi: order one is purely imaginary, order two purely real
    assert np.max(np.abs((Psi - psi).imag / eps + 0.5 * q1psi.imag)) <= 1e-9
    assert np.max(np.abs(q1psi.real)) == 0.0


def test_wavefunction_zero_coupling_is_identity(run, out):
    assert run("wavefunction", {**PT3, "epsilon": 0.0}, "--psi", "cos(x)^3") == EXIT_OK
    _, psi, Psi = _psi_columns(out)
    assert np.array_equal(psi, Psi)


def test_wavefunction_with_pole_is_domain_error(run):
    assert run("wavefunction", {**CUBIC, "psi": "sec(x)"}) == EXIT_DOMAIN


# ----------------------------------------------------------------- classical

CLASSICAL = {"classical": {"V0": 1.0, "k": 1.0, "m0": 1.0, "epsilon": 0.2}}


def test_classical_run(run, out):
    assert run("classical", CLASSICAL) == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["energy_drift"] <= 1e-6 and rep["schema_version"] == 1
    lim = read_csv(out / "classical_limit.csv")
    assert lim[0] == ["nu", "max_deviation"] and float(lim[-1][0]) == 0.0


def test_classical_zero_coupling_position(run, out):
    cfg = {"classical": {**CLASSICAL["classical"], "epsilon": 0.0}}
    assert run("classical", cfg) == EXIT_OK
    a = np.array(read_csv(out / "classical.csv")[1:], dtype=float)
    assert np.array_equal(a[:, 4], a[:, 0]) and np.all(a[:, 5] == 0.0)


def test_classical_singular_start(run):
    cfg = {"classical": {**CLASSICAL["classical"], "x0": 1.5707963267948966}}
    assert run("classical", cfg) == EXIT_DOMAIN


# ----------------------------------------------------------------- reproduce

@pytest.mark.parametrize("which", ["cubic", "poschl-teller"])
def test_reproduce(which, tmp_path):
    d = tmp_path / which
    assert main(["reproduce", which, "--output-dir", str(d)]) == EXIT_OK
    for suffix in ("report.txt", "report.json", "transcription_diff.txt", "transcription_diff.json"):
        assert (d / f"{which}_{suffix}").exists()
    assert json.loads((d / f"{which}_report.json").read_text())["schema_version"] == 1


def test_reproduce_unknown(tmp_path):
    assert main(["reproduce", "bogus", "--output-dir", str(tmp_path)]) == EXIT_CONFIG

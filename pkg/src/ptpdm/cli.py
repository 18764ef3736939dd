"""Batch command-line front end.

Exit codes: 0 pass, 1 scientific check failed, 2 configuration error,
3 runtime domain error (parity, pole, mass, singular orbit).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import expr as ex
from . import perturbative as pt
from . import spectral as sp
from .classical import (
    DRIFT_TOL,
    LIMIT_TOL,
    build_classical_pt_model,
    check_hbar_limit,
    integrate_trajectory,
)
from .errors import (
    MassError,
    ParityError,
    ParseError,
    PoleError,
    SingularRegionError,
    UnboundParameterError,
)
from .examples import reproduce
from .transcription import op_text

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3
SCHEMA_VERSION = 1

_number = {"type": "number"}
_scalar = {"anyOf": [{"type": "number"}, {"type": "string", "pattern": r"^\s*-?\d+(/\d+)?\s*$"}]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "potential": {"type": "string", "minLength": 1},
        "parameters": {"type": "object", "additionalProperties": _scalar},
        "c0": _scalar,
        "c1": _scalar,
        "epsilon": _number,
        "epsilon_sweep": {"type": "array", "items": _number, "minItems": 1},
        "domain": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
        "grid_n": {"type": "integer", "minimum": 16},
        "levels": {"type": "integer", "minimum": 1},
        "output_dir": {"type": "string"},
        "seed": {"type": "integer"},
        "psi": {"type": "string", "minLength": 1},
        "example": {"enum": ["cubic", "poschl-teller"]},
        "example_parameters": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"mu": _scalar, "lambda": _scalar, "epsilon": _number},
        },
        "classical": {
            "type": "object",
            "additionalProperties": False,
            "required": ["V0", "k", "m0"],
            "properties": {
                "V0": {"type": "number", "exclusiveMinimum": 0},
                "k": {"type": "number", "exclusiveMinimum": 0},
                "m0": {"type": "number", "exclusiveMinimum": 0},
                "epsilon": _number,
                "x0": _number,
                "p0": _number,
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "steps": {"type": "integer", "minimum": 1},
                "phase_grid": {"type": "integer", "minimum": 2},
                "reach": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "residual": {"type": "number", "exclusiveMinimum": 0},
                "identity": {"type": "number", "exclusiveMinimum": 0},
                "slope_window": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
                "reality": {"type": "number", "exclusiveMinimum": 0},
                "limit": {"type": "number", "exclusiveMinimum": 0},
                "drift": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}

DEFAULT_TOLERANCES = {
    "residual": pt.RESIDUAL_TOL,
    "identity": pt.IDENTITY_TOL,
    "slope_window": list(sp.SLOPE_WINDOW),
    "reality": sp.REALITY_TOL,
    "limit": LIMIT_TOL,
    "drift": DRIFT_TOL,
}


class ConfigError(Exception):
    """Invalid configuration; the message names the offending key path."""


# ------------------------------------------------------------------ config

def _key_path(path) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in path)


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON in {path}: {err}") from None
    return validate_config(cfg)


def validate_config(cfg) -> dict:
    errors = sorted(jsonschema.Draft7Validator(CONFIG_SCHEMA).iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(f"{_key_path(err.absolute_path)}: {err.message}")
    if "epsilon" in cfg and "epsilon_sweep" in cfg:
        raise ConfigError("$: give either epsilon or epsilon_sweep, not both")
    if "domain" in cfg and not cfg["domain"][0] < cfg["domain"][1]:
        raise ConfigError("$.domain: x_min must be smaller than x_max")
    return cfg


def _require(cfg, key):
    if key not in cfg:
        raise ConfigError(f"$.{key}: required for this command")
    return cfg[key]


def tolerances(cfg) -> dict:
    return {**DEFAULT_TOLERANCES, **cfg.get("tolerances", {})}


def build_model(cfg, eps: float | None = None) -> pt.ModelSpec:
    src = _require(cfg, "potential")
    try:
        Vr = ex.parse(src, cfg.get("parameters", {}))
    except (ParseError, UnboundParameterError) as err:
        raise ConfigError(f"$.potential: {err}") from None
    if eps is None:
        eps = cfg.get("epsilon", 0.0)
    kw = {"c0": cfg.get("c0", 0), "c1": cfg.get("c1", 0), "epsilon": eps}
    if "domain" in cfg:
        kw["domain"] = tuple(cfg["domain"])
    try:
        return pt.ModelSpec(Vr, **kw)
    except (ParityError, PoleError):
        raise
    except ValueError as err:
        raise ConfigError(f"$: {err}") from None


# ------------------------------------------------------------------ output

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.bool_, bool)):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if math.isfinite(f) else None
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


def write_json(path: Path, payload: dict) -> None:
    body = {"schema_version": SCHEMA_VERSION, **payload}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(body), fh, indent=2, sort_keys=False)
        fh.write("\n")


def _outdir(cfg) -> Path:
    d = Path(cfg.get("output_dir", "ptpdm_out"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _say(msg: str) -> None:
    print(msg, flush=True)


# ---------------------------------------------------------------- commands

def cmd_derive(cfg, args) -> int:
    m = build_model(cfg)
    gen = pt.build_generator(m)
    pdm = pt.derive_pdm(m)
    out = _outdir(cfg)
    for name, e in (("vi.txt", pdm.Vi), ("m2.txt", pdm.M2), ("veff2.txt", pdm.Veff2)):
        (out / name).write_text(ex.render(e) + "\n", encoding="utf-8")
    write_json(out / "model.json", {
        "potential": ex.render(m.Vr),
        "c0": str(m.c0),
        "c1": str(m.c1),
        "epsilon": m.epsilon,
        "domain": list(m.domain),
        "R0": ex.render(gen.R0),
        "S": [ex.render(s) for s in gen.S],
        "Q1": op_text(gen.Q1),
        "Vi": ex.render(pdm.Vi),
        "M2": ex.render(pdm.M2),
        "Veff2": ex.render(pdm.Veff2),
        "mass": ex.render(pdm.mass_fn),
        "Veff": ex.render(pdm.Veff),
    })
    _say(f"Vi    = {ex.render(pdm.Vi)}")
    _say(f"M2    = {ex.render(pdm.M2)}")
    _say(f"Veff2 = {ex.render(pdm.Veff2)}")
    return EXIT_OK


def cmd_verify(cfg, args) -> int:
    if "epsilon_sweep" in cfg:
        eps = cfg["epsilon_sweep"][0]
    else:
        eps = None
    m = build_model(cfg, eps)
    tol = tolerances(cfg)
    gen = pt.build_generator(m)
    pdm = pt.derive_pdm(m)
    if args.perturb is not None:
        pdm = pt.corrupt(pdm, args.perturb)
        _say(f"test hook: derived quantities corrupted by {args.perturb:g}")
    res = pt.check_condition_system(m, gen, pdm)
    res.tolerance = tol["residual"]
    ids = pt.check_operator_conditions(m, gen, pdm, seed=cfg.get("seed", args.seed))
    ids.tolerance = tol["identity"]
    out = _outdir(cfg)
    write_csv(out / "residuals.csv", ["equation_id", "max_residual", "grid_points"],
              [(k, v, res.grid_points) for k, v in res.residuals.items()])
    write_json(out / "identities.json", {
        "deviations": ids.deviations,
        "structural_zero": ids.structural_zero,
        "sample_points": ids.sample_points,
        "tolerance": ids.tolerance,
        "residual_tolerance": res.tolerance,
        "perturb": args.perturb,
        "passed": res.passed and ids.passed,
    })
    for k, v in res.residuals.items():
        _say(f"  residual {k}: {v:.3e} {'ok' if v <= res.tolerance else 'FAIL'}")
    for k, v in ids.deviations.items():
        _say(f"  identity {k}: {v:.3e} {'ok' if v <= ids.tolerance else 'FAIL'}")
    return EXIT_OK if res.passed and ids.passed else EXIT_FAIL


def cmd_spectrum(cfg, args) -> int:
    sweep = _require(cfg, "epsilon_sweep")
    if len(sweep) < 4:
        raise ConfigError("$.epsilon_sweep: at least 4 values are needed for a slope fit")
    m = build_model(cfg, 0.0)
    tol = tolerances(cfg)
    lo, hi = m.domain
    g = sp.Grid(lo, hi, cfg.get("grid_n", 2400))
    try:
        rep = sp.compare_spectra(m, g, sweep, cfg.get("levels", 4), jobs=args.jobs,
                                 slope_window=tuple(tol["slope_window"]))
    except ValueError as err:
        if "sweep" in str(err):
            raise ConfigError(f"$.epsilon_sweep: {err}") from None
        raise
    rep.reality_tol = tol["reality"]
    out = _outdir(cfg)
    write_csv(out / "spectrum.csv", ["epsilon", "level", "re_E_pt", "im_E_pt", "E_pdm", "gap"], rep.rows())
    write_json(out / "report.json", {**rep.to_json(), "reality_tol": rep.reality_tol, "passed": rep.passed})
    for n, s in enumerate(rep.slopes):
        _say(f"  level {n}: slope {s:.3f}")
    _say(f"  max |Im E| = {float(np.max(rep.im_max)):.3e}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_wavefunction(cfg, args) -> int:
    src = args.psi or _require(cfg, "psi")
    try:
        psi = ex.parse(src, cfg.get("parameters", {}))
    except (ParseError, UnboundParameterError) as err:
        raise ConfigError(f"$.psi: {err}") from None
    m = build_model(cfg)
    for k in range(7):
        ex.check_no_poles(ex.differentiate(psi, k), m.domain)
    w = pt.wavefunction_orders(psi, m)
    xs = np.linspace(m.domain[0], m.domain[1], cfg.get("grid_n", 201))
    v0 = ex.evaluate_array(psi, xs)
    v = v0 + m.epsilon * ex.evaluate_array(w.first, xs) + m.epsilon**2 * ex.evaluate_array(w.second, xs)
    out = _outdir(cfg)
    write_csv(out / "psi_mapped.csv", ["x", "re_psi", "im_psi", "re_Psi", "im_Psi"],
              zip(xs, v0.real, v0.imag, v.real, v.imag))
    _say(f"  order 1: {ex.render(w.first)}")
    _say(f"  order 2: {ex.render(w.second)}")
    return EXIT_OK


def cmd_classical(cfg, args) -> int:
    c = _require(cfg, "classical")
    tol = tolerances(cfg)
    cm = build_classical_pt_model(c["V0"], c["k"], c["m0"], c.get("epsilon", 0.0))
    reach = c.get("reach", 0.8)
    xmax = reach * math.pi / (2 * cm.k)
    ng = c.get("phase_grid", 21)
    xg = np.linspace(-xmax, xmax, ng)
    xg = xg[cm.mass_factor(xg) > 0]
    if xg.size == 0:
        raise MassError("no positive-mass window on the requested range")
    pmax = math.sqrt(2 * cm.m0 * cm.V0)
    pg = np.linspace(-pmax, pmax, ng)
    X, P = np.meshgrid(xg, pg, indexing="ij")
    x, p = X.ravel(), P.ravel()
    Xc, Pc = cm.X(x, p), cm.P(x, p)
    out = _outdir(cfg)
    write_csv(out / "classical.csv", ["x", "p", "H", "m", "re_X", "im_X", "re_P", "im_P"],
              zip(x, p, cm.H(x, p), cm.mass(x), Xc.real, Xc.imag, Pc.real, Pc.imag))

    x0 = c.get("x0", 0.3 * math.pi / (2 * cm.k))
    traj = integrate_trajectory(cm, x0, c.get("p0", 0.0), dt=c.get("dt"), steps=c.get("steps", 10000))
    write_csv(out / "trajectory.csv", ["t", "x", "p", "energy", "re_X", "im_X", "re_P", "im_P"],
              zip(traj.t, traj.x, traj.p, traj.energy, traj.X.real, traj.X.imag, traj.P.real, traj.P.imag))

    lim = check_hbar_limit(cm, seed=cfg.get("seed", args.seed))
    lim.tolerance = tol["limit"]
    rows = [(nu, d) for nu, d in sorted(lim.raw_deviation.items(), reverse=True)]
    rows.append((0.0, lim.extrapolated_deviation))
    write_csv(out / "classical_limit.csv", ["nu", "max_deviation"], rows)
    drift_ok = traj.energy_drift <= tol["drift"]
    write_json(out / "report.json", {
        "method": traj.method,
        "steps": len(traj.t) - 1,
        "energy_drift": traj.energy_drift,
        "drift_tolerance": tol["drift"],
        "period": traj.period(),
        "period_estimate": cm.period_estimate,
        "limit_raw": {repr(k): v for k, v in lim.raw_deviation.items()},
        "limit_extrapolated": lim.extrapolated_deviation,
        "limit_monotone": lim.monotone,
        "limit_tolerance": lim.tolerance,
        "passed": drift_ok and lim.passed,
    })
    _say(f"  energy drift {traj.energy_drift:.3e} ({traj.method})")
    _say(f"  nu-limit deviation after extrapolation {lim.extrapolated_deviation:.3e}")
    return EXIT_OK if drift_ok and lim.passed else EXIT_FAIL


def cmd_reproduce(cfg, args) -> int:
    which = args.which or cfg.get("example")
    if which not in ("cubic", "poschl-teller"):
        raise ConfigError(f"$.example: unknown example {which!r} (choose cubic or poschl-teller)")
    kw = {"seed": cfg.get("seed", args.seed)}
    ep = cfg.get("example_parameters", {})
    if which == "cubic":
        kw.update({k: v for k, v in (("mu", ep.get("mu")), ("eps", ep.get("epsilon"))) if v is not None})
    else:
        kw.update({k: v for k, v in (("lam", ep.get("lambda")), ("eps", ep.get("epsilon"))) if v is not None})
    rep = reproduce(which, **kw)
    out = _outdir(cfg)
    (out / f"{which}_report.txt").write_text(rep.to_text(), encoding="utf-8")
    write_json(out / f"{which}_report.json", rep.to_json())
    if rep.audit is not None:
        (out / f"{which}_transcription_diff.txt").write_text(rep.audit.to_text(), encoding="utf-8")
        write_json(out / f"{which}_transcription_diff.json", rep.audit.to_json())
    sys.stdout.write(rep.to_text())
    if rep.audit is not None and not rep.audit.clean:
        _say(f"  transcription diff noted for {len([a for a in rep.audit.audits if not a.matches])} typeset formula(s); "
             f"see {which}_transcription_diff.txt")
    return EXIT_OK if rep.passed else EXIT_FAIL


COMMANDS = {
    "derive": cmd_derive,
    "verify": cmd_verify,
    "spectrum": cmd_spectrum,
    "wavefunction": cmd_wavefunction,
    "classical": cmd_classical,
    "reproduce": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ptpdm", description="Perturbative PT-symmetric / position-dependent-mass toolkit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "reproduce", help="JSON run configuration")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for sweeps")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--perturb", type=float, default=None, help="test hook: corrupt derived quantities")
        if name == "wavefunction":
            p.add_argument("--psi", default=None, help="wavefunction in the expression DSL")
        if name == "reproduce":
            p.add_argument("which", nargs="?", default=None, help="cubic or poschl-teller")
            p.add_argument("--output-dir", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs: must be at least 1")
        cfg = load_config(args.config) if args.config else {}
        if getattr(args, "output_dir", None):
            cfg["output_dir"] = args.output_dir
        return COMMANDS[args.command](cfg, args)
    except ConfigError as err:
        print(f"ptpdm: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ParityError as err:
        print(f"ptpdm: domain error (parity check): {err}", file=sys.stderr)
        return EXIT_DOMAIN
    except (PoleError, MassError, SingularRegionError) as err:
        print(f"ptpdm: domain error: {err}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())

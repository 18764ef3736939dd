"""Audit of reference formulas as typeset against the machine expansion.

Each reference formula is rebuilt literally (including any typesetting
slips) and compared with the pipeline output order by order and
derivative power by derivative power.  Mismatches are reported, never
raised: the machine path is authoritative.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _numbers as num
from . import expr as ex
from .expr import Expr
from .operators import NormalOp
from .perturbative import (
    ModelSpec,
    build_generator,
    derive_pdm,
    observable_orders,
    q1_squared,
    wavefunction_orders,
)

AUDIT_TOL = 1e-9


def p_series(coeffs) -> NormalOp:
    """sum_j c_j(x) p^j with each function standing left of its momentum power."""
    out = []
    for j, c in enumerate(coeffs):
        out.append(ex.mul(c, ex.const(num.power(num.neg(num.I), j))))
    return NormalOp(tuple(out))


def _derivs(V: Expr, n: int = 6) -> list[Expr]:
    return [ex.differentiate(V, k) for k in range(n)]


# ------------------------------------------------------------ literal forms

def printed_closed_form_observables(m: ModelSpec):
    """General X and P as typeset (orders 1 and 2), built literally."""
    c0, c1 = m.c0, m.c1
    V = m.Vr
    d = _derivs(V)
    iu = ex.I_UNIT
    X1 = p_series([ex.mul(-1, iu, ex.add(ex.mul(3, c1, V), c0)), ex.ZERO, ex.mul(-3, iu, c1)])
    X2 = p_series([
        ex.add(ex.mul(-1, c1, ex.add(ex.mul(6, V, d[1]), d[4])), ex.mul(-2, c0, d[1])),
        ex.mul(-6, iu, c1, d[2]),
        ex.mul(6, c1, d[1]),
    ]) * ex.mul(Fraction(3, 4), c1)
    P1 = p_series([d[2], ex.mul(2, iu, d[1])]) * ex.mul(Fraction(3, 2), c1)
    P2 = p_series([
        ex.add(ex.mul(c1, ex.add(ex.mul(3, d[1], d[2]), ex.mul(-3, V, d[4]), d[4])), ex.mul(-1, c0, d[4])),
        ex.mul(iu, ex.add(ex.mul(c1, ex.add(ex.mul(6, d[1], d[1]), ex.mul(-6, V, d[2]), ex.mul(5, d[4]))),
                          ex.mul(-2, c0, d[2]))),
        ex.mul(-9, c1, d[2]),
        ex.mul(-6, iu, c1, d[2]),
    ]) * ex.mul(Fraction(3, 4), iu, c1)
    return (X1, X2), (P1, P2)


def printed_wavefunction_operator(m: ModelSpec):
    """Operators acting on psi at orders 1 and 2, read as d/dx polynomials."""
    c0, c1 = m.c0, m.c1
    V = m.Vr
    d = _derivs(V)
    R0 = ex.add(ex.mul(3, c1, V), c0)
    first = NormalOp((ex.mul(3, c1, d[1]), ex.mul(2, R0), ex.ZERO, ex.mul(-2, c1))) * ex.mul(Fraction(1, 2), ex.I_UNIT)
    w0 = ex.mul(3, c1, ex.add(ex.mul(c1, ex.add(ex.mul(3, V, V), ex.mul(6, V, d[2]), ex.mul(-2, d[4]))),
                              ex.mul(2, c0, d[2])))
    w1 = ex.mul(6, c1, ex.add(ex.mul(c1, ex.add(ex.mul(12, V, d[1]), ex.mul(-5, d[4]))), ex.mul(4, c0, d[1])))
    w2 = ex.mul(2, ex.add(ex.mul(9, c1, c1, ex.add(ex.mul(2, V, V), ex.mul(-3, d[2]))),
                          ex.mul(12, c0, c1, V), ex.mul(2, c0, c0)))
    w3 = ex.mul(-48, c1, c1, d[1])
    w4 = ex.mul(-8, c1, R0)
    w6 = ex.mul(4, c1, c1)
    second = NormalOp((w0, w1, w2, w3, w4, ex.ZERO, w6)) * Fraction(-1, 8)
    return first, second


def _pt_params(lam, nu=1):
    lam = num.from_user_value(lam)
    nu = num.from_user_value(nu)
    V0 = num.mul(num.mul(nu, lam), num.add(lam, Fraction(-1)))
    V0 = num.mul(V0, Fraction(1, 2))
    return {"lam": lam, "nu": nu, "V0": V0}


def printed_pt_potentials(lam, nu=1) -> dict:
    """Vi, M2, Veff2 of the sec^2 model in dimensionless form, as typeset."""
    P = _pt_params(lam, nu)
    return {
        "Vi": ex.parse("(1/2)*(lam+1)*lam*(lam-1)*(lam-2)*sec(x)^4*tan(x)", P),
        "Vi_scales": ex.parse("2/nu^2*V0*(V0-nu)*sec(x)^4*tan(x)", P),
        "M2": ex.parse("2*V0*(V0-nu)/nu^2*sec(x)^4*(5*sec(x)^2-4)", P),
        "Veff2": ex.parse("V0*(V0-nu)/nu^3*sec(x)^4*(5*(V0-14*nu)*sec(x)^4-(4*V0-85*nu)*sec(x)^2-20*nu)", P),
    }


def printed_pt_observables(lam, nu=1, restore_tan: bool = False):
    """X and P of the sec^2 model (orders 1 and 2), dimensionless.

    ``restore_tan`` multiplies the momentum-free second-order momentum term
    by tan(x); without it that term is odd-parity-inconsistent.
    """
    P = _pt_params(lam, nu)

    def e(s):
        return ex.parse(s, P)

    X1 = p_series([e("-I/nu*(-V0*sec(x)^2+nu/3)"), ex.ZERO, e("-I/nu*(-nu)")])
    X2 = p_series([
        e("-V0/nu^2*sec(x)^2*((V0+2*nu)*sec(x)^2-nu)*tan(x)"),
        e("-V0/nu^2*sec(x)^2*I*nu*(3*sec(x)^2-2)"),
        e("-V0/nu^2*sec(x)^2*(-tan(x))*nu"),
    ])
    P1 = p_series([e("-V0/nu*sec(x)^2*(3*sec(x)^2-2)"), e("-V0/nu*sec(x)^2*2*I*tan(x)")])
    lead = "(3*V0*sec(x)^4-2*nu*(30*sec(x)^4-19*sec(x)^2+1))" + ("*tan(x)" if restore_tan else "")
    P2 = p_series([
        e(f"-I*V0/nu^2*sec(x)^2*{lead}"),
        e("-I*V0/nu^2*sec(x)^2*I*(V0*sec(x)^4-nu*(50*sec(x)^4-49*sec(x)^2+6))"),
        e("-I*V0/nu^2*sec(x)^2*6*nu*(3*sec(x)^2-1)*tan(x)"),
        e("-I*V0/nu^2*sec(x)^2*I*nu*(3*sec(x)^2-2)"),
    ])
    return (X1, X2), (P1, P2)


def printed_pt_ground_state(lam: int):
    """Orders 1 and 2 of the mapped ground state cos^lam(x), as typeset."""
    if num.as_integer(num.from_user_value(lam)) is None:
        raise ValueError("the ground-state form needs an integer lambda")
    P = {"lam": lam}
    first = ex.parse("cos(x)^lam*(I/6)*(lam+1)*lam*(lam-1)*(sec(x)^2+2)*tan(x)", P)
    second = ex.parse(
        "-cos(x)^lam/72*(lam+1)*lam*(lam-1)*((lam-4)*(lam-2)*(lam+15)*sec(x)^6"
        "+3*(lam-2)*(lam^2-4*lam+15)*sec(x)^4-4*(lam+1)*lam*(lam-1))", P)
    return first, second


def printed_cubic_observables(mu=1):
    """X and P of the cubic model with m0 = hbar = 1 (orders 1 and 2)."""
    P = {"mu": mu}

    def e(s):
        return ex.parse(s, P)

    X1 = p_series([e("I/mu^4*mu^2*x^2"), ex.ZERO, e("I/mu^4*2")])
    X2 = p_series([e("-x^3/mu^4"), e("-2*I/mu^6"), e("2*x/mu^6")])
    P1 = p_series([e("-I/mu^2*(-I)"), e("-I/mu^2*2*x")])
    P2 = p_series([e("I*x/mu^4"), e("-x^2/mu^4"), ex.ZERO, e("2/mu^6")])
    return (X1, X2), (P1, P2)


# ------------------------------------------------------------------ audits

@dataclass
class TermDiff:
    order: int
    power: int  # derivative power, -1 for plain functions
    printed: str
    machine: str
    deviation: float
    tolerance: float = AUDIT_TOL

    @property
    def match(self) -> bool:
        return self.deviation <= self.tolerance


@dataclass
class FormulaAudit:
    name: str
    description: str
    terms: list = field(default_factory=list)

    @property
    def matches(self) -> bool:
        return all(t.match for t in self.terms)

    def mismatches(self) -> list:
        return [t for t in self.terms if not t.match]


def _dev(a: Expr, b: Expr, xs) -> float:
    va = ex.evaluate_array(a, xs, on_pole="nan")
    vb = ex.evaluate_array(b, xs, on_pole="nan")
    ok = np.isfinite(va) & np.isfinite(vb)
    if not ok.any():
        return 0.0
    return float(np.max(np.abs(va[ok] - vb[ok]) / np.maximum(1.0, np.abs(vb[ok]))))


def audit_operators(name: str, description: str, printed, machine, xs) -> FormulaAudit:
    """Compare two sequences of order-1, order-2, ... NormalOps coefficientwise."""
    fa = FormulaAudit(name, description)
    for order, (a, b) in enumerate(zip(printed, machine), start=1):
        for k in range(max(len(a.coeffs), len(b.coeffs))):
            ca, cb = a.coeff(k), b.coeff(k)
            if ca.is_zero and cb.is_zero:
                continue
            fa.terms.append(TermDiff(order, k, ex.render(ca), ex.render(cb), _dev(ca, cb, xs)))
    return fa


def audit_functions(name: str, description: str, printed, machine, xs, first_order: int = 1) -> FormulaAudit:
    fa = FormulaAudit(name, description)
    for order, (a, b) in enumerate(zip(printed, machine), start=first_order):
        fa.terms.append(TermDiff(order, -1, ex.render(ex.simplify(a)), ex.render(b), _dev(a, b, xs)))
    return fa


@dataclass
class AuditReport:
    model: str
    audits: list
    expansions: dict  # name -> machine-generated expansion text

    @property
    def clean(self) -> bool:
        return all(a.matches for a in self.audits)

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "clean": self.clean,
            "formulas": [
                {
                    "name": a.name,
                    "description": a.description,
                    "matches": a.matches,
                    "terms": [
                        {"order": t.order, "derivative_power": t.power, "match": t.match,
                         "max_deviation": t.deviation, "printed": t.printed, "machine": t.machine}
                        for t in a.terms
                    ],
                }
                for a in self.audits
            ],
            "machine_expansions": self.expansions,
        }

    def to_text(self) -> str:
        lines = [f"printed-formula audit: {self.model}"]
        for a in self.audits:
            lines.append("")
            lines.append(f"== {a.name}: {a.description} [{'match' if a.matches else 'DIFF'}]")
            for t in a.terms:
                tag = "ok  " if t.match else "DIFF"
                where = f"eps^{t.order}" + (f" d^{t.power}" if t.power >= 0 else "")
                lines.append(f"  {tag} {where}: max rel deviation {t.deviation:.3e}")
                if not t.match:
                    lines.append(f"       printed: {t.printed}")
                    lines.append(f"       machine: {t.machine}")
        lines.append("")
        lines.append("machine expansions")
        for k, v in self.expansions.items():
            lines.append(f"  {k}: {v}")
        return "\n".join(lines) + "\n"


def op_text(o: NormalOp) -> str:
    parts = [f"[{ex.render(c)}] d^{k}" for k, c in enumerate(o.coeffs) if not c.is_zero]
    return " + ".join(parts) if parts else "0"


def _general_audits(m: ModelSpec, xs, tag: str) -> tuple[list, dict]:
    X = observable_orders("x", m)
    P = observable_orders("p", m)
    (X1, X2), (P1, P2) = printed_closed_form_observables(m)
    g = build_generator(m)
    w1 = g.Q1 * Fraction(-1, 2)
    w2 = q1_squared(g) * Fraction(1, 8)
    f1, f2 = printed_wavefunction_operator(m)
    audits = [
        audit_operators("closed-form-position", f"general position operator on the {tag} model", (X1, X2), (X.O1, X.O2), xs),
        audit_operators("closed-form-momentum", f"general momentum operator on the {tag} model", (P1, P2), (P.O1, P.O2), xs),
        audit_operators("wavefunction-map", f"general wavefunction map operators on the {tag} model", (f1, f2), (w1, w2), xs),
    ]
    expansions = {
        "wavefunction-map order 1": op_text(w1),
        "wavefunction-map order 2": op_text(w2),
    }
    return audits, expansions


def audit_cubic(mu=1, seed: int = 0) -> AuditReport:
    mu = num.from_user_value(mu)
    m = ModelSpec(ex.parse("mu^2*x^2/2", {"mu": mu}), c0=0, c1=num.mul(Fraction(-2, 3), num.power(mu, -4)),
                  domain=(-3.0, 3.0))
    xs = ex.sample_points(m.domain, 20, seed)
    audits, expansions = _general_audits(m, xs, "cubic")
    X = observable_orders("x", m)
    P = observable_orders("p", m)
    (X1, X2), (P1, P2) = printed_cubic_observables(mu)
    audits.append(audit_operators("cubic-position", "position operator of the cubic model", (X1, X2), (X.O1, X.O2), xs))
    audits.append(audit_operators("cubic-momentum", "momentum operator of the cubic model", (P1, P2), (P.O1, P.O2), xs))
    return AuditReport(f"cubic (mu={mu})", audits, expansions)


def audit_poschl_teller(lam=3, seed: int = 0) -> AuditReport:
    pp = _pt_params(lam)
    m = ModelSpec(ex.parse("lam*(lam-1)/2*sec(x)^2", pp), c0=Fraction(1, 3), c1=Fraction(-1, 3))
    xs = ex.sample_points(m.domain, 20, seed)
    audits, expansions = _general_audits(m, xs, "sec^2")
    pdm = derive_pdm(m)
    ref = printed_pt_potentials(lam)
    audits.append(audit_functions("sec2-imaginary-potential", "Vi, two typeset forms",
                                  (ref["Vi"], ref["Vi_scales"]), (pdm.Vi, pdm.Vi), xs))
    audits.append(audit_functions("sec2-mass", "mass correction M2", (ref["M2"],), (pdm.M2,), xs, first_order=2))
    audits.append(audit_functions("sec2-effective-potential", "effective potential correction Veff2",
                                  (ref["Veff2"],), (pdm.Veff2,), xs, first_order=2))
    X = observable_orders("x", m)
    P = observable_orders("p", m)
    (X1, X2), (P1, P2) = printed_pt_observables(lam)
    audits.append(audit_operators("sec2-position", "position operator of the sec^2 model", (X1, X2), (X.O1, X.O2), xs))
    audits.append(audit_operators("sec2-momentum", "momentum operator of the sec^2 model", (P1, P2), (P.O1, P.O2), xs))
    if num.as_integer(pp["lam"]) is not None:
        psi = ex.parse("cos(x)^lam", pp)
        w = wavefunction_orders(psi, m)
        g1, g2 = printed_pt_ground_state(lam)
        audits.append(audit_functions("sec2-ground-state", "mapped ground state cos^lam", (g1, g2), (w.first, w.second), xs))
        expansions["sec2-ground-state order 1"] = ex.render(w.first)
        expansions["sec2-ground-state order 2"] = ex.render(w.second)
    return AuditReport(f"sec^2 (lambda={pp['lam']})", audits, expansions)

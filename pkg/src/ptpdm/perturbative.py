"""Lowest-order map between a PT-symmetric Hamiltonian and a Hermitian PDM one.

Everything here works in dimensionless units:

    H = 1/2 p^2 + Vr(x) + i eps Vi(x)
    h = 1/2 p [1 + eps^2 M2(x)] p + Vr(x) + eps^2 Veff2(x)

with the metric generator truncated to Q1 = {R0, p} + 2 c1 p^3, so that

    R0  = 3 c1 Vr + c0
    S0  = R0',  S1 = 2 R0,  S2 = 0,  S3 = -2 c1
    Vi  = c1 Vr''' / 4 - R0 Vr'
    M2  = -3 c1 Vi'
    Veff2 = (-R0 Vi' + c1 Vi''') / 2
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from . import _numbers as num
from . import expr as ex
from . import operators as op
from .errors import ConsistencyError, ParityError
from .expr import Expr, Parity
from .operators import NormalOp

RESIDUAL_TOL = 1e-9
IDENTITY_TOL = 1e-9
OBSERVABLE_TOL = 1e-9
REGIME_LIMIT = 0.5


@dataclass(frozen=True)
class DimensionalScales:
    """Length, mass and action scales; the energy scale is hbar^2 / (m0 l^2)."""

    length: float = 1.0
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if min(self.length, self.mass, self.hbar) <= 0:
            raise ValueError("scales must be positive")

    @property
    def energy(self) -> float:
        return self.hbar**2 / (self.mass * self.length**2)

    @property
    def momentum(self) -> float:
        return self.hbar / self.length

    def to_dimensionless(self, x=None, p=None, energy=None):
        return (
            None if x is None else x / self.length,
            None if p is None else p / self.momentum,
            None if energy is None else energy / self.energy,
        )

    def to_dimensional(self, x=None, p=None, energy=None):
        return (
            None if x is None else x * self.length,
            None if p is None else p * self.momentum,
            None if energy is None else energy * self.energy,
        )


@dataclass(frozen=True)
class ModelSpec:
    """One problem instance: even real potential, two constants, coupling."""

    Vr: Expr
    c0: object = Fraction(0)
    c1: object = Fraction(0)
    epsilon: float = 0.0
    scales: DimensionalScales = field(default_factory=DimensionalScales)
    domain: tuple = (-1.4, 1.4)

    def __post_init__(self):
        object.__setattr__(self, "Vr", ex.simplify(self.Vr))
        object.__setattr__(self, "c0", num.from_user_value(self.c0))
        object.__setattr__(self, "c1", num.from_user_value(self.c1))
        if not (num.is_real(self.c0) and num.is_real(self.c1)):
            raise ValueError("c0 and c1 must be real")
        object.__setattr__(self, "epsilon", float(self.epsilon))
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError("domain must satisfy x_min < x_max")
        object.__setattr__(self, "domain", (float(lo), float(hi)))
        if not ex.is_real_coefficient(self.Vr):
            raise ValueError("Vr must be real")
        if ex.parity_of(self.Vr) is not Parity.EVEN:
            raise ParityError(f"parity check failed: Vr = {ex.render(self.Vr)} is not even")
        # Vr and four derivatives must be finite on the working domain
        for k in range(5):
            ex.check_no_poles(ex.differentiate(self.Vr, k), self.domain)

    def with_epsilon(self, epsilon: float) -> "ModelSpec":
        return dataclasses.replace(self, epsilon=epsilon)


@dataclass(frozen=True)
class FirstOrderGenerator:
    R0: Expr
    R1: object
    S: tuple  # S0, S1, S2, S3
    Q1: NormalOp

    @property
    def S0(self):
        return self.S[0]

    @property
    def S1(self):
        return self.S[1]

    @property
    def S3(self):
        return self.S[3]


@dataclass(frozen=True)
class PDMModel:
    Vr: Expr
    Vi: Expr
    M2: Expr
    Veff2: Expr
    epsilon: float

    @property
    def mass_factor(self) -> Expr:
        """1 + eps^2 M2, the inverse dimensionless mass m0/m(x)."""
        return ex.simplify(ex.add(1, ex.mul(self.epsilon**2, self.M2)))

    @property
    def mass_fn(self) -> Expr:
        """m(x)/m0 = [1 + eps^2 M2]^-1."""
        return ex.power(self.mass_factor, -1)

    @property
    def Veff(self) -> Expr:
        return ex.simplify(ex.add(self.Vr, ex.mul(self.epsilon**2, self.Veff2)))

    def check_mass(self, xs) -> bool:
        """True when 1 + eps^2 M2 > 0 at every point of ``xs``."""
        f = ex.evaluate_real(self.mass_factor, xs)
        return bool(np.all(f > 0))


def _odd_or_zero(e: Expr) -> bool:
    return e.is_zero or ex.parity_of(e) is Parity.ODD


def _even_or_zero(e: Expr) -> bool:
    return e.is_zero or ex.parity_of(e) is Parity.EVEN


def build_generator(m: ModelSpec) -> FirstOrderGenerator:
    R0 = ex.simplify(ex.add(ex.mul(3, m.c1, m.Vr), m.c0))
    R1 = m.c1
    g = op.GeneratorCoeffs((R0,) if num.is_zero(R1) else (R0, ex.const(R1)))
    S = op.generator_s_coefficients(g)
    S = (S + [ex.ZERO] * 4)[:4]
    Q1 = op.expand_generator(g)
    return FirstOrderGenerator(R0=R0, R1=R1, S=tuple(S), Q1=Q1)


def derive_Vi(m: ModelSpec) -> Expr:
    """Imaginary potential  Vi = c1 Vr'''/4 - (3 c1 Vr + c0) Vr'."""
    d = ex.differentiate
    R0 = ex.add(ex.mul(3, m.c1, m.Vr), m.c0)
    Vi = ex.simplify(ex.sub(ex.mul(num.mul(Fraction(1, 4), m.c1), d(m.Vr, 3)), ex.mul(R0, d(m.Vr, 1))))
    if not _odd_or_zero(Vi):
        raise ParityError(f"derived Vi is not odd: {ex.render(Vi)}")
    return Vi


def derive_pdm(m: ModelSpec, Vi: Expr | None = None) -> PDMModel:
    """Mass correction M2 = -3 c1 Vi' and potential correction Veff2."""
    d = ex.differentiate
    if Vi is None:
        Vi = derive_Vi(m)
    R0 = ex.add(ex.mul(3, m.c1, m.Vr), m.c0)
    M2 = ex.simplify(ex.mul(num.mul(Fraction(-3), m.c1), d(Vi, 1)))
    Veff2 = ex.simplify(ex.mul(Fraction(1, 2), ex.add(ex.neg(ex.mul(R0, d(Vi, 1))), ex.mul(m.c1, d(Vi, 3)))))
    if not (_even_or_zero(M2) and _even_or_zero(Veff2)):
        raise ParityError("derived M2 / Veff2 are not even")
    return PDMModel(Vr=m.Vr, Vi=Vi, M2=M2, Veff2=Veff2, epsilon=m.epsilon)


def regime_check(pdm: PDMModel, xs) -> float:
    """eps^2 max|M2| on ``xs``; warns above the perturbative limit."""
    v = float(np.max(np.abs(ex.evaluate_real(pdm.M2, xs)))) * pdm.epsilon**2
    if v > REGIME_LIMIT:
        warnings.warn(
            f"eps^2 max|M2| = {v:.3g} exceeds {REGIME_LIMIT}: outside the perturbative regime",
            RuntimeWarning,
            stacklevel=2,
        )
    return v


def corrupt(pdm: PDMModel, delta: float, which: str = "Vi") -> PDMModel:
    """Test hook: damage one derived quantity.

    ``Vi`` gets ``+ delta*x``; ``M2`` and ``Veff2`` are scaled by ``1 + delta``.
    """
    if which == "Vi":
        return dataclasses.replace(pdm, Vi=ex.simplify(ex.add(pdm.Vi, ex.mul(delta, ex.X))))
    if which in ("M2", "Veff2"):
        return dataclasses.replace(pdm, **{which: ex.simplify(ex.mul(1 + delta, getattr(pdm, which)))})
    raise ValueError(f"unknown quantity {which!r}")


# ------------------------------------------------------------- verification

@dataclass
class ResidualReport:
    residuals: dict  # equation id -> max relative residual
    grid_points: int
    tolerance: float = RESIDUAL_TOL

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance for v in self.residuals.values())

    @property
    def failures(self) -> list:
        return [k for k, v in self.residuals.items() if v > self.tolerance]


def _residual(terms: list, xs) -> float:
    """max_i |sum_j t_j(x_i)| / max(1, sum_j |t_j(x_i)|)."""
    vals = [ex.evaluate_array(t, xs) for t in terms]
    total = np.sum(vals, axis=0)
    scale = np.maximum(1.0, np.sum(np.abs(vals), axis=0))
    return float(np.max(np.abs(total) / scale))


def condition_grid(m: ModelSpec, n: int = 200) -> np.ndarray:
    lo, hi = m.domain
    return np.linspace(lo, hi, n + 2)[1:-1]


def check_condition_system(m: ModelSpec, generator: FirstOrderGenerator | None = None,
                           pdm: PDMModel | None = None, xs=None) -> ResidualReport:
    """Scalar residuals of the six condition families on a 200-point grid.

    ``first_order_d0``: S0''/2 + sum_{l>=1} S_l Vr^(l) + 2 Vi
    ``first_order_dk``: S_{k-1}' + S_k''/2 + sum_{l>k} C(l,k) S_l Vr^(l-k)   (k >= 1)
    ``second_order_d0``: sum_{l>=1} S_l Vi^(l) + 4 Veff2
    ``second_order_d1``: sum_{l>=2} l S_l Vi^(l-1) - 2 M2'
    ``second_order_d2``: sum_{l>=3} C(l,2) S_l Vi^(l-2) - 2 M2
    ``second_order_high``: sum_{l>k} C(l,k) S_l Vi^(l-k)   (k >= 3)
    """
    generator = generator or build_generator(m)
    pdm = pdm or derive_pdm(m)
    xs = condition_grid(m) if xs is None else np.asarray(xs)
    S = list(generator.S)
    K = len(S) - 1
    d = ex.differentiate
    Vr, Vi = m.Vr, pdm.Vi

    res = {}
    t = [ex.mul(Fraction(1, 2), d(S[0], 2))]
    t += [ex.mul(S[l], d(Vr, l)) for l in range(1, K + 1)]
    t.append(ex.mul(2, Vi))
    res["first_order_d0"] = _residual(t, xs)

    worst = 0.0
    for k in range(1, K + 2):
        t = [d(S[k - 1], 1)]
        if k <= K:
            t.append(ex.mul(Fraction(1, 2), d(S[k], 2)))
        t += [ex.mul(comb(l, k), S[l], d(Vr, l - k)) for l in range(k + 1, K + 1)]
        worst = max(worst, _residual(t, xs))
    res["first_order_dk"] = worst

    t = [ex.mul(S[l], d(Vi, l)) for l in range(1, K + 1)] + [ex.mul(4, pdm.Veff2)]
    res["second_order_d0"] = _residual(t, xs)
    t = [ex.mul(l, S[l], d(Vi, l - 1)) for l in range(2, K + 1)] + [ex.mul(-2, d(pdm.M2, 1))]
    res["second_order_d1"] = _residual(t, xs)
    t = [ex.mul(comb(l, 2), S[l], d(Vi, l - 2)) for l in range(3, K + 1)] + [ex.mul(-2, pdm.M2)]
    res["second_order_d2"] = _residual(t, xs)
    worst = 0.0
    for k in range(3, K + 1):
        t = [ex.mul(comb(l, k), S[l], d(Vi, l - k)) for l in range(k + 1, K + 1)]
        if t:
            worst = max(worst, _residual(t, xs))
    res["second_order_high"] = worst
    return ResidualReport(residuals=res, grid_points=len(xs))


@dataclass
class HamiltonianOps:
    H0: NormalOp
    H1: NormalOp
    h2: NormalOp


def hamiltonian_ops(m: ModelSpec, pdm: PDMModel) -> HamiltonianOps:
    """H0 = p^2/2 + Vr, H1 = i Vi, h2 = p M2 p / 2 + Veff2 as normal forms."""
    H0 = NormalOp((m.Vr, ex.ZERO, ex.const(Fraction(-1, 2))))
    H1 = op.multiplication(ex.mul(ex.I_UNIT, pdm.Vi))
    dM2 = ex.differentiate(pdm.M2, 1)
    h2 = NormalOp((pdm.Veff2, ex.mul(Fraction(-1, 2), dM2), ex.mul(Fraction(-1, 2), pdm.M2)))
    return HamiltonianOps(H0=H0, H1=H1, h2=h2)


@dataclass
class IdentityReport:
    deviations: dict  # identity name -> max relative coefficient deviation
    structural_zero: dict
    sample_points: int
    tolerance: float = IDENTITY_TOL

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance for v in self.deviations.values())


def check_operator_conditions(m: ModelSpec, generator: FirstOrderGenerator | None = None,
                              pdm: PDMModel | None = None, xs=None, seed: int = 0) -> IdentityReport:
    """Operator identities, each compared side-by-side as normal forms.

    ``commutator``:     [H0, Q1] = -2 H1
    ``second_order``:   [H1, Q1] / 4 = p M2 p / 2 + Veff2
    ``pseudo_hermitian``: the eps^1 part of H^dagger (1 - eps Q1) - (1 - eps Q1) H
                        vanishes (H0^dagger and H1^dagger taken by the adjoint map).
    """
    generator = generator or build_generator(m)
    pdm = pdm or derive_pdm(m)
    if xs is None:
        xs = ex.sample_points(m.domain, 100, seed)
    ops = hamiltonian_ops(m, pdm)
    Q1 = generator.Q1

    lhs1 = op.commutator(ops.H0, Q1)
    rhs1 = ops.H1 * (-2)
    lhs2 = op.commutator(ops.H1, Q1) * Fraction(1, 4)
    rhs2 = ops.h2
    first = (op.adjoint(ops.H1) - ops.H1) - op.multiply(op.adjoint(ops.H0), Q1) + op.multiply(Q1, ops.H0)

    dev = {
        "commutator": op.op_max_deviation(lhs1, rhs1, xs),
        "second_order": op.op_max_deviation(lhs2, rhs2, xs),
        "pseudo_hermitian": op.op_max_deviation(first, op.ZERO_OP, xs),
    }
    zero = {
        "commutator": (lhs1 - rhs1).is_zero,
        "second_order": (lhs2 - rhs2).is_zero,
        "pseudo_hermitian": first.is_zero,
    }
    return IdentityReport(deviations=dev, structural_zero=zero, sample_points=len(xs))


# ---------------------------------------------------------------- observables

def _S(S, k):
    return S[k] if 0 <= k < len(S) else ex.ZERO


def t_coefficients(S) -> list[Expr]:
    """T_k with [[x, Q1], Q1] = sum_k T_k d^k."""
    K = len(S) - 1
    d = ex.differentiate
    out = []
    for k in range(0, 2 * K + 1):
        terms = []
        for l in range(0, k + 1):
            for m in range(k - l + 1, K + 1):
                order = l + m - k
                c = comb(m, k - l)
                terms.append(ex.mul(c * (m + 1), _S(S, m + 1), d(_S(S, l), order)))
                terms.append(ex.mul(-c * (l + 1), _S(S, m), d(_S(S, l + 1), order)))
        out.append(ex.simplify(ex.add(*terms)))
    return out


def u_coefficients(S) -> list[Expr]:
    """U_k with [[p, Q1], Q1] = i sum_k U_k d^k."""
    K = len(S) - 1
    d = ex.differentiate
    out = []
    for k in range(0, 2 * K + 1):
        terms = []
        for l in range(0, k + 1):
            for m in range(k - l + 1, K + 1):
                order = l + m - k
                c = comb(m, k - l)
                terms.append(ex.mul(c, d(_S(S, m), 1), d(_S(S, l), order)))
                terms.append(ex.mul(-c, _S(S, m), d(_S(S, l), order + 1)))
        out.append(ex.simplify(ex.add(*terms)))
    return out


def w_coefficients(S) -> list[Expr]:
    """W_k with Q1^2 = -sum_k W_k d^k."""
    K = len(S) - 1
    d = ex.differentiate
    out = []
    for k in range(0, 2 * K + 1):
        terms = []
        for l in range(0, k + 1):
            for m in range(max(k - l, 0), K + 1):
                terms.append(ex.mul(comb(m, k - l), _S(S, m), d(_S(S, l), l + m - k)))
        out.append(ex.simplify(ex.add(*terms)))
    return out


@dataclass(frozen=True)
class ObservableOrders:
    """O = O0 + eps O1 + eps^2 O2."""

    O0: NormalOp
    O1: NormalOp
    O2: NormalOp

    def at(self, eps: float) -> NormalOp:
        return self.O0 + self.O1 * eps + self.O2 * (eps * eps)

    def orders(self):
        return (self.O0, self.O1, self.O2)


def _base_observable(which: str) -> NormalOp:
    if which == "x":
        return op.POSITION
    if which == "p":
        return op.MOMENTUM
    raise ValueError("which must be 'x' or 'p'")


def observable_by_commutators(which: str, generator: FirstOrderGenerator) -> ObservableOrders:
    o = _base_observable(which)
    c1 = op.commutator(o, generator.Q1)
    c2 = op.commutator(c1, generator.Q1)
    return ObservableOrders(o, c1 * Fraction(-1, 2), c2 * Fraction(1, 8))


def observable_by_sums(which: str, generator: FirstOrderGenerator) -> ObservableOrders:
    S = list(generator.S)
    o = _base_observable(which)
    iu = ex.I_UNIT
    if which == "x":
        first = NormalOp(tuple(ex.mul(iu, k + 1, _S(S, k + 1)) for k in range(len(S))))
        second = NormalOp(tuple(t_coefficients(S)))
    else:
        first = NormalOp(tuple(ex.neg(ex.differentiate(s, 1)) for s in S))
        second = NormalOp(tuple(ex.mul(iu, u) for u in u_coefficients(S)))
    return ObservableOrders(o, first * Fraction(-1, 2), second * Fraction(1, 8))


def observable_orders(which: str, m: ModelSpec, generator: FirstOrderGenerator | None = None,
                      xs=None, rtol: float = OBSERVABLE_TOL) -> ObservableOrders:
    """Order-by-order X or P, cross-checked between two construction paths."""
    generator = generator or build_generator(m)
    a = observable_by_commutators(which, generator)
    b = observable_by_sums(which, generator)
    if xs is None:
        xs = ex.sample_points(m.domain, 40, seed=3)
    for k, (u, v) in enumerate(zip(a.orders(), b.orders())):
        dev = op.op_max_deviation(u, v, xs)
        if dev > rtol:
            raise ConsistencyError(f"{which.upper()} order {k}: commutator and sum paths differ by {dev:.3g}")
    return a


def pseudo_observable(which: str, m: ModelSpec, generator: FirstOrderGenerator | None = None) -> NormalOp:
    """X or P = o - eps [o, Q1]/2 + eps^2 [[o, Q1], Q1]/8 at ``m.epsilon``."""
    return observable_orders(which, m, generator).at(m.epsilon)


def closed_form_observables(m: ModelSpec) -> tuple[ObservableOrders, ObservableOrders]:
    """X and P written directly in terms of Vr, c0, c1 (no commutators)."""
    c0, c1 = m.c0, m.c1
    d = [ex.differentiate(m.Vr, k) for k in range(6)]
    V = m.Vr
    iu = ex.I_UNIT
    R0 = ex.add(ex.mul(3, c1, V), c0)

    X1 = NormalOp((ex.mul(-1, iu, R0), ex.ZERO, ex.mul(3, iu, c1)))
    a0 = ex.add(ex.mul(-1, c1, ex.add(ex.mul(6, V, d[1]), d[3])), ex.mul(-2, c0, d[1]))
    X2 = NormalOp((a0, ex.mul(-6, c1, d[2]), ex.mul(-6, c1, d[1]))) * ex.mul(Fraction(3, 4), c1)

    P1 = NormalOp((ex.mul(Fraction(3, 2), c1, d[2]), ex.mul(3, c1, d[1])))
    b0 = ex.add(ex.mul(c1, ex.add(ex.mul(3, d[1], d[2]), ex.mul(-3, V, d[3]), d[5])), ex.mul(-1, c0, d[3]))
    b1 = ex.add(ex.mul(c1, ex.add(ex.mul(6, d[1], d[1]), ex.mul(-6, V, d[2]), ex.mul(5, d[4]))), ex.mul(-2, c0, d[2]))
    P2 = NormalOp((b0, b1, ex.mul(9, c1, d[3]), ex.mul(6, c1, d[2]))) * ex.mul(Fraction(3, 4), iu, c1)
    return (ObservableOrders(op.POSITION, X1, X2), ObservableOrders(op.MOMENTUM, P1, P2))


# --------------------------------------------------------------- wavefunctions

def q1_squared(generator: FirstOrderGenerator) -> NormalOp:
    return op.multiply(generator.Q1, generator.Q1)


def q1_squared_from_w(generator: FirstOrderGenerator) -> NormalOp:
    return NormalOp(tuple(ex.neg(w) for w in w_coefficients(list(generator.S))))


@dataclass(frozen=True)
class WavefunctionOrders:
    """Psi = psi + eps Psi1 + eps^2 Psi2."""

    psi: Expr
    first: Expr
    second: Expr

    def at(self, eps: float) -> Expr:
        return ex.simplify(ex.add(self.psi, ex.mul(eps, self.first), ex.mul(eps * eps, self.second)))


def wavefunction_orders(psi: Expr, m: ModelSpec, generator: FirstOrderGenerator | None = None) -> WavefunctionOrders:
    generator = generator or build_generator(m)
    first = ex.simplify(ex.mul(Fraction(-1, 2), op.apply(generator.Q1, psi)))
    second = ex.simplify(ex.mul(Fraction(1, 8), op.apply(q1_squared(generator), psi)))
    return WavefunctionOrders(ex.simplify(psi), first, second)


def map_wavefunction(psi: Expr, m: ModelSpec, generator: FirstOrderGenerator | None = None) -> Expr:
    """Psi = psi - eps Q1 psi / 2 + eps^2 Q1^2 psi / 8."""
    return wavefunction_orders(psi, m, generator).at(m.epsilon)

"""Normal-ordered differential operators  sum_k S_k(x) d^k/dx^k.

Every coefficient is an :class:`~ptpdm.expr.Expr` that may carry complex
constants, so momentum ``p = -i d/dx`` and generators such as
``Q1 = -i sum_k S_k d^k`` are stored directly.  Products are re-ordered with
the generalised Leibniz rule using exact integer binomials.

Symmetry maps.  ``parity`` (x -> -x, p -> -p) and ``time_reverse``
(complex conjugation, p -> -p) are the usual unitary / antiunitary actions.
The substitutions "x -> -x at fixed p" and "p -> -p at fixed x" are not
canonical maps; they are defined on the symmetric (Weyl) symbol of an
operator, which for any operator A gives

    A(x, -p)  = T A^dagger T
    A(-x, p)  = P T A^dagger T P

and these are what :func:`reflect_p` and :func:`reflect_x` return.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from . import _numbers as num
from . import expr as ex
from .errors import OperatorDegreeError, ParityError
from .expr import Expr

MAX_DEGREE = 16


@dataclass(frozen=True, eq=False)
class NormalOp:
    """Operator sum_k coeffs[k](x) * d^k/dx^k with trailing zeros trimmed."""

    coeffs: tuple

    def __post_init__(self):
        cs = [ex.simplify(c if isinstance(c, Expr) else ex.const(c)) for c in self.coeffs]
        while cs and cs[-1].is_zero:
            cs.pop()
        if len(cs) - 1 > MAX_DEGREE:
            raise OperatorDegreeError(f"operator degree {len(cs) - 1} exceeds the bound {MAX_DEGREE}")
        object.__setattr__(self, "coeffs", tuple(cs))

    @property
    def degree(self) -> int:
        """Highest derivative order; -1 for the zero operator."""
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, k: int) -> Expr:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else ex.ZERO

    def __add__(self, other: "NormalOp") -> "NormalOp":
        n = max(len(self.coeffs), len(other.coeffs))
        return NormalOp(tuple(ex.add(self.coeff(k), other.coeff(k)) for k in range(n)))

    def __sub__(self, other: "NormalOp") -> "NormalOp":
        return self + (-other)

    def __neg__(self) -> "NormalOp":
        return NormalOp(tuple(ex.neg(c) for c in self.coeffs))

    def __mul__(self, s) -> "NormalOp":
        if isinstance(s, NormalOp):
            return multiply(self, s)
        s = s if isinstance(s, Expr) else ex.const(s)
        return NormalOp(tuple(ex.mul(s, c) for c in self.coeffs))

    __rmul__ = __mul__

    def __matmul__(self, other: "NormalOp") -> "NormalOp":
        return multiply(self, other)

    def values(self, xs) -> np.ndarray:
        """Coefficient values, shape (degree + 1, len(xs))."""
        xs = np.asarray(xs)
        if self.is_zero:
            return np.zeros((0, xs.size), dtype=complex)
        return np.array([ex.evaluate_array(c, xs, on_pole="nan") for c in self.coeffs])

    def __repr__(self):
        body = " + ".join(f"[{ex.render(c)}] d^{k}" for k, c in enumerate(self.coeffs) if not c.is_zero)
        return f"NormalOp({body or '0'})"


ZERO_OP = NormalOp(())
IDENTITY = NormalOp((ex.ONE,))


def multiplication(f) -> NormalOp:
    """The operator of multiplication by ``f``."""
    return NormalOp((f if isinstance(f, Expr) else ex.const(f),))


def derivative(k: int = 1) -> NormalOp:
    """d^k/dx^k."""
    return NormalOp((ex.ZERO,) * k + (ex.ONE,))


def momentum(n: int = 1) -> NormalOp:
    """p^n with p = -i d/dx."""
    c = num.power(num.neg(num.I), n)
    return NormalOp((ex.ZERO,) * n + (ex.const(c),))


POSITION = multiplication(ex.X)
MOMENTUM = momentum(1)


def leibniz_move(k: int, f: Expr) -> NormalOp:
    """Commutator [d^k/dx^k, f] = sum_{l<k} C(k, l) f^(k-l) d^l."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return NormalOp(tuple(ex.mul(comb(k, l), ex.differentiate(f, k - l)) for l in range(k)))


def _compose_term(a_k: Expr, k: int, b: NormalOp, out: list):
    # a_k d^k . sum_j B_j d^j = sum_j sum_l C(k,l) a_k B_j^(k-l) d^(l+j)
    for j, b_j in enumerate(b.coeffs):
        if b_j.is_zero:
            continue
        for l in range(k + 1):
            dk = ex.differentiate(b_j, k - l)
            if dk.is_zero:
                continue
            out[l + j].append(ex.mul(comb(k, l), a_k, dk))


def multiply(a: NormalOp, b: NormalOp) -> NormalOp:
    """Normal-ordered product a.b."""
    if a.is_zero or b.is_zero:
        return ZERO_OP
    deg = a.degree + b.degree
    if deg > MAX_DEGREE:
        raise OperatorDegreeError(f"product degree {deg} exceeds the bound {MAX_DEGREE}")
    out: list[list[Expr]] = [[] for _ in range(deg + 1)]
    for k, a_k in enumerate(a.coeffs):
        if not a_k.is_zero:
            _compose_term(a_k, k, b, out)
    return NormalOp(tuple(ex.add(*terms) for terms in out))


def commutator(a: NormalOp, b: NormalOp) -> NormalOp:
    return multiply(a, b) - multiply(b, a)


def anticommutator(a: NormalOp, b: NormalOp) -> NormalOp:
    return multiply(a, b) + multiply(b, a)


def apply(a: NormalOp, f: Expr) -> Expr:
    """(a f)(x) = sum_k S_k(x) f^(k)(x)."""
    return ex.simplify(ex.add(*(ex.mul(c, ex.differentiate(f, k)) for k, c in enumerate(a.coeffs))))


def adjoint(a: NormalOp) -> NormalOp:
    """Formal L2 adjoint: (f d^k)^dagger = (-1)^k d^k o conj(f), re-ordered."""
    out: list[list[Expr]] = [[] for _ in range(len(a.coeffs))]
    for k, c in enumerate(a.coeffs):
        cc = ex.conjugate(c)
        sign = -1 if k % 2 else 1
        for l in range(k + 1):
            out[l].append(ex.mul(sign * comb(k, l), ex.differentiate(cc, k - l)))
    return NormalOp(tuple(ex.add(*t) for t in out))


def parity(a: NormalOp) -> NormalOp:
    """P a P: x -> -x and d/dx -> -d/dx."""
    return NormalOp(tuple(ex.mul(-1 if k % 2 else 1, ex.reflect(c)) for k, c in enumerate(a.coeffs)))


def time_reverse(a: NormalOp) -> NormalOp:
    """T a T (complex conjugation of coefficients; d/dx is real)."""
    return NormalOp(tuple(ex.conjugate(c) for c in a.coeffs))


def pt_transform(a: NormalOp) -> NormalOp:
    """Combined PT action: x -> -x, i -> -i."""
    return parity(time_reverse(a))


def reflect_p(a: NormalOp) -> NormalOp:
    """a(x, -p) on the symmetric symbol, i.e. T a^dagger T."""
    return time_reverse(adjoint(a))


def reflect_x(a: NormalOp) -> NormalOp:
    """a(-x, p) on the symmetric symbol, i.e. P T a^dagger T P."""
    return parity(time_reverse(adjoint(a)))


@dataclass(frozen=True)
class GeneratorCoeffs:
    """Even functions R_k paired with momentum powers 2k+1.

    Represents Q = sum_k {R_k(x), p^(2k+1)}.
    """

    R: tuple

    def __post_init__(self):
        rs = tuple(ex.simplify(r if isinstance(r, Expr) else ex.const(r)) for r in self.R)
        for k, r in enumerate(rs):
            if ex.parity_of(r) is not ex.Parity.EVEN:
                raise ParityError(f"R_{k} = {ex.render(r)} is not even")
        object.__setattr__(self, "R", rs)


def generator_s_coefficients(g: GeneratorCoeffs) -> list[Expr]:
    """S_k of Q = -i sum_k S_k d^k from the closed sums over derivatives of R_l."""
    L = len(g.R)
    if L == 0:
        return []
    S: list[Expr] = []
    for k in range(L):
        even_terms = []
        odd_terms = []
        for l in range(k, L):
            sgn = -1 if l % 2 else 1
            even_terms.append(ex.mul(sgn * comb(2 * l + 1, 2 * k), ex.differentiate(g.R[l], 2 * l - 2 * k + 1)))
            mult = 2 if l == k else 1
            odd_terms.append(ex.mul(mult * sgn * comb(2 * l + 1, 2 * k + 1), ex.differentiate(g.R[l], 2 * l - 2 * k)))
        S.append(ex.simplify(ex.add(*even_terms)))
        S.append(ex.simplify(ex.add(*odd_terms)))
    return S


def expand_generator(g: GeneratorCoeffs) -> NormalOp:
    """Normal form of sum_k {R_k, p^(2k+1)} via the closed-form S_k sums."""
    S = generator_s_coefficients(g)
    return NormalOp(tuple(ex.mul(ex.I_UNIT, -1, s) for s in S))


def generator_by_products(g: GeneratorCoeffs) -> NormalOp:
    """Same operator built from explicit anticommutators (independent path)."""
    total = ZERO_OP
    for k, r in enumerate(g.R):
        total = total + anticommutator(multiplication(r), momentum(2 * k + 1))
    return total


def op_max_abs(a: NormalOp, xs) -> float:
    """Largest |coefficient| over the sample points (NaN points skipped)."""
    if a.is_zero:
        return 0.0
    v = a.values(xs)
    v = v[:, np.all(np.isfinite(v), axis=0)]
    return float(np.max(np.abs(v))) if v.size else 0.0


def op_max_deviation(a: NormalOp, b: NormalOp, xs) -> float:
    """max_k,i |a_k(x_i) - b_k(x_i)| / max(1, |a_k|, |b_k|)."""
    n = max(len(a.coeffs), len(b.coeffs))
    if n == 0:
        return 0.0
    xs = np.asarray(xs)
    worst = 0.0
    for k in range(n):
        va = ex.evaluate_array(a.coeff(k), xs, on_pole="nan")
        vb = ex.evaluate_array(b.coeff(k), xs, on_pole="nan")
        ok = np.isfinite(va) & np.isfinite(vb)
        scale = np.maximum(1.0, np.maximum(np.abs(va[ok]), np.abs(vb[ok])))
        if ok.any():
            worst = max(worst, float(np.max(np.abs(va[ok] - vb[ok]) / scale)))
    return worst


def op_allclose(a: NormalOp, b: NormalOp, xs=None, rtol: float = 1e-9, domain=(-1.4, 1.4), seed: int = 0) -> bool:
    """Pointwise coefficient equality at 100 random points (the default)."""
    if xs is None:
        xs = ex.sample_points(domain, 100, seed)
    return op_max_deviation(a, b, xs) <= rtol


def from_coefficients(coeffs: Sequence) -> NormalOp:
    return NormalOp(tuple(coeffs))

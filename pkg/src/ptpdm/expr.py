"""Univariate expression trees with exact differentiation.

Expressions are immutable trees over the node kinds ``const``, ``var``,
``neg``, ``add``, ``mul``, ``pow`` (integer exponent), ``sin``, ``cos``,
``tan``, ``sec`` and ``exp``.  The only variable is ``x``; named parameters
are substituted by numbers at parse time.

``simplify`` brings a tree into a polynomial normal form over *atoms*
(``x``, trigonometric/exponential calls with simplified arguments, and
inverse powers of irreducible sums).  Apart from the reduction
``tan(u)^2 -> sec(u)^2 - 1`` no trigonometric identities are applied, so two
trees are compared with :func:`pointwise_equal` rather than structurally.
"""

from __future__ import annotations

import cmath
import enum
import math
import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from . import _numbers as num
from .errors import ParseError, PoleError, UnboundParameterError

POLE_FLOOR = 1e-12

_UNARY = ("sin", "cos", "tan", "sec", "exp")
_KINDS = ("const", "var", "neg", "add", "mul", "pow") + _UNARY


class Expr:
    """Immutable expression node.

    Build trees with the module-level constructors (:func:`const`, :data:`X`,
    :func:`add`, :func:`mul`, ...) or with Python operators; both fold
    constants and flatten nested sums/products but do nothing more.
    """

    __slots__ = ("kind", "args", "value", "exponent", "_hash")

    def __init__(self, kind: str, args: tuple = (), value=None, exponent: int | None = None):
        if kind not in _KINDS:
            raise ValueError(f"unknown node kind {kind!r}")
        arity = len(args)
        if kind in ("const", "var"):
            ok = arity == 0
        elif kind in ("add", "mul"):
            ok = arity >= 2
        else:
            ok = arity == 1
        if not ok:
            raise ValueError(f"{kind} node cannot take {arity} children")
        if kind == "pow" and not isinstance(exponent, int):
            raise ValueError("pow node needs an integer exponent")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "args", tuple(args))
        object.__setattr__(self, "value", num.normalize(value) if kind == "const" else None)
        object.__setattr__(self, "exponent", exponent if kind == "pow" else None)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.kind, self.value, self.exponent, self.args))
            object.__setattr__(self, "_hash", h)
        return h

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        if hash(self) != hash(other):
            return False
        return (
            self.kind == other.kind
            and self.exponent == other.exponent
            and self.value == other.value
            and type(self.value) is type(other.value)
            and self.args == other.args
        )

    def __repr__(self):
        return f"Expr<{render(self)}>"

    def __str__(self):
        return render(self)

    def __call__(self, x):
        if np.ndim(x) == 0:
            return evaluate(self, x)
        return evaluate_array(self, x)

    # arithmetic sugar
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return add(self, neg(_wrap(other)))

    def __rsub__(self, other):
        return add(_wrap(other), neg(self))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return mul(self, power(_wrap(other), -1))

    def __rtruediv__(self, other):
        return mul(_wrap(other), power(self, -1))

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        if not isinstance(n, int):
            raise TypeError("only integer powers are supported")
        return power(self, n)

    @property
    def is_const(self) -> bool:
        return self.kind == "const"

    @property
    def is_zero(self) -> bool:
        return self.kind == "const" and num.is_zero(self.value)

    def size(self) -> int:
        return 1 + sum(a.size() for a in self.args)


def _wrap(v) -> Expr:
    return v if isinstance(v, Expr) else const(v)


# ---------------------------------------------------------------- constructors

def const(v) -> Expr:
    return Expr("const", value=num.normalize(v))


X = Expr("var")
ZERO = const(0)
ONE = const(1)
I_UNIT = Expr("const", value=num.I)


def neg(a: Expr) -> Expr:
    if a.kind == "const":
        return const(num.neg(a.value))
    if a.kind == "neg":
        return a.args[0]
    return Expr("neg", (a,))


def add(*terms) -> Expr:
    flat: list[Expr] = []
    c = Fraction(0)
    for t in terms:
        t = _wrap(t)
        parts = t.args if t.kind == "add" else (t,)
        for p in parts:
            if p.kind == "const":
                c = num.add(c, p.value)
            else:
                flat.append(p)
    if not num.is_zero(c):
        flat.append(const(c))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Expr("add", tuple(flat))


def sub(a, b) -> Expr:
    return add(a, neg(_wrap(b)))


def mul(*factors) -> Expr:
    flat: list[Expr] = []
    c = Fraction(1)
    for f in factors:
        f = _wrap(f)
        while f.kind == "neg":
            c = num.neg(c)
            f = f.args[0]
        parts = f.args if f.kind == "mul" else (f,)
        for p in parts:
            if p.kind == "const":
                c = num.mul(c, p.value)
            elif p.kind == "neg":
                c = num.neg(c)
                flat.append(p.args[0])
            else:
                flat.append(p)
    if num.is_zero(c):
        return ZERO
    if not flat:
        return const(c)
    if num.is_one(c):
        return flat[0] if len(flat) == 1 else Expr("mul", tuple(flat))
    if num.is_one(num.neg(c)):
        body = flat[0] if len(flat) == 1 else Expr("mul", tuple(flat))
        return Expr("neg", (body,))
    return Expr("mul", (const(c),) + tuple(flat))


def div(a, b) -> Expr:
    return mul(a, power(_wrap(b), -1))


def power(a: Expr, n: int) -> Expr:
    a = _wrap(a)
    if not isinstance(n, int):
        raise TypeError("exponent must be an integer")
    if n == 0:
        return ONE
    if n == 1:
        return a
    if a.kind == "const":
        if num.is_zero(a.value) and n < 0:
            raise PoleError("0^" + str(n), "constant zero raised to a negative power")
        return const(num.power(a.value, n))
    if a.kind == "pow":
        return power(a.args[0], a.exponent * n)
    return Expr("pow", (a,), exponent=n)


def _func(kind: str, a) -> Expr:
    a = _wrap(a)
    if a.kind == "const":
        v = a.value
        if num.is_zero(v):
            return ONE if kind in ("cos", "sec", "exp") else ZERO
        z = complex(v)
        if kind in ("tan", "sec") and abs(cmath.cos(z)) <= POLE_FLOOR:
            raise PoleError(f"{kind}({render(a)})", "constant argument at a pole")
        val = {
            "sin": cmath.sin,
            "cos": cmath.cos,
            "tan": cmath.tan,
            "sec": lambda w: 1 / cmath.cos(w),
            "exp": cmath.exp,
        }[kind](z)
        return const(val.real if num.is_real(v) else val)
    return Expr(kind, (a,))


def sin(a) -> Expr:
    return _func("sin", a)


def cos(a) -> Expr:
    return _func("cos", a)


def tan(a) -> Expr:
    return _func("tan", a)


def sec(a) -> Expr:
    return _func("sec", a)


def exp(a) -> Expr:
    return _func("exp", a)


# ------------------------------------------------------------------- printing

def render(e: Expr) -> str:
    """Canonical DSL text for ``e``; :func:`parse` reads it back."""
    k = e.kind
    if k == "const":
        return num.format_scalar(e.value)
    if k == "var":
        return "x"
    if k == "neg":
        return "(-" + render(e.args[0]) + ")"
    if k == "add":
        return "(" + " + ".join(render(a) for a in e.args) + ")"
    if k == "mul":
        return "(" + "*".join(render(a) for a in e.args) + ")"
    if k == "pow":
        base = e.args[0]
        b = render(base)
        if base.kind == "pow":
            b = "(" + b + ")"
        n = e.exponent
        return f"{b}^{n}" if n >= 0 else f"{b}^({n})"
    return f"{k}({render(e.args[0])})"


# ------------------------------------------------------------------ simplify
#
# A polynomial is a dict mapping monomials to nonzero scalar coefficients; a
# monomial is a sorted tuple of (atom key, integer power) pairs.  Atom keys are
# canonical renderings; _ATOMS maps them back to trees.

_ATOMS: dict[str, Expr] = {}


def _atom_key(atom: Expr) -> str:
    key = render(atom)
    _ATOMS.setdefault(key, atom)
    return key


def _mono_mul(m1: tuple, m2: tuple) -> tuple:
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for k, p in m2:
        q = d.get(k, 0) + p
        if q:
            d[k] = q
        else:
            d.pop(k, None)
    return tuple(sorted(d.items()))


def _p_add_into(acc: dict, p: dict, scale=None):
    for m, c in p.items():
        if scale is not None:
            c = num.mul(c, scale)
        v = acc.get(m)
        v = c if v is None else num.add(v, c)
        if num.is_zero(v):
            acc.pop(m, None)
        else:
            acc[m] = v


def _p_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = _mono_mul(m1, m2)
            c = num.mul(c1, c2)
            v = out.get(m)
            v = c if v is None else num.add(v, c)
            if num.is_zero(v):
                out.pop(m, None)
            else:
                out[m] = v
    return _reduce_tan(out)


def _p_pow(p: dict, n: int) -> dict:
    result = {(): Fraction(1)}
    base = p
    while n:
        if n & 1:
            result = _p_mul(result, base)
        n >>= 1
        if n:
            base = _p_mul(base, base)
    return result


def _reduce_tan(p: dict) -> dict:
    """Rewrite tan(u)^k, k >= 2, as tan(u)^(k mod 2) * (sec(u)^2 - 1)^(k // 2)."""
    if not any(_ATOMS[k].kind == "tan" and e >= 2 for m in p for k, e in m):
        return p
    out: dict = {}
    for m, c in p.items():
        pending = {(): c}
        rest = []
        for k, e in m:
            atom = _ATOMS[k]
            if atom.kind == "tan" and e >= 2:
                skey = _atom_key(Expr("sec", atom.args))
                identity = {((skey, 2),): Fraction(1), (): Fraction(-1)}
                factor = _p_pow_plain(identity, e // 2)
                if e % 2:
                    factor = {_mono_mul(mm, ((k, 1),)): cc for mm, cc in factor.items()}
                pending = _p_mul_plain(pending, factor)
            else:
                rest.append((k, e))
        rest_m = tuple(rest)
        for mm, cc in pending.items():
            _p_add_into(out, {_mono_mul(rest_m, mm): cc})
    return out


def _p_mul_plain(p: dict, q: dict) -> dict:
    out: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            _p_add_into(out, {_mono_mul(m1, m2): num.mul(c1, c2)})
    return out


def _p_pow_plain(p: dict, n: int) -> dict:
    result = {(): Fraction(1)}
    for _ in range(n):
        result = _p_mul_plain(result, p)
    return result


def _leading_negative(p: dict) -> bool:
    if not p:
        return False
    lead = p[min(p)]
    return num.is_negative_real(lead)


def _p_neg(p: dict) -> dict:
    return {m: num.neg(c) for m, c in p.items()}


@lru_cache(maxsize=65536)
def _to_poly(e: Expr) -> tuple:
    # cached as a tuple of items for hashability; callers convert to dict
    return tuple(_to_poly_dict(e).items())


def _poly(e: Expr) -> dict:
    return dict(_to_poly(e))


def _to_poly_dict(e: Expr) -> dict:
    k = e.kind
    if k == "const":
        return {} if num.is_zero(e.value) else {(): e.value}
    if k == "var":
        return {((_atom_key(X), 1),): Fraction(1)}
    if k == "neg":
        return _p_neg(_poly(e.args[0]))
    if k == "add":
        acc: dict = {}
        for a in e.args:
            _p_add_into(acc, _poly(a))
        return acc
    if k == "mul":
        acc = {(): Fraction(1)}
        for a in e.args:
            acc = _p_mul(acc, _poly(a))
            if not acc:
                return {}
        return acc
    if k == "pow":
        base = _poly(e.args[0])
        n = e.exponent
        if n >= 0:
            return _p_pow(base, n)
        if not base:
            raise PoleError(render(e), "zero raised to a negative power")
        if len(base) == 1:
            (m, c), = base.items()
            inv_m = tuple((key, p * n) for key, p in m)
            return _reduce_tan({inv_m: num.power(c, n)})
        key = _atom_key(_from_poly(base))
        return {((key, n),): Fraction(1)}
    # unary function
    arg = _poly(e.args[0])
    sign = Fraction(1)
    if k in ("sin", "tan", "cos", "sec") and _leading_negative(arg):
        arg = _p_neg(arg)
        if k in ("sin", "tan"):
            sign = Fraction(-1)
    arg_expr = _from_poly(arg)
    if arg_expr.kind == "const":
        folded = _func(k, arg_expr)
        return {} if folded.is_zero else {(): num.mul(sign, folded.value)}
    key = _atom_key(Expr(k, (arg_expr,)))
    return {((key, 1),): sign}


def _from_poly(p: dict) -> Expr:
    if not p:
        return ZERO
    terms = []
    for m in sorted(p):
        c = p[m]
        factors = []
        for key, e in m:
            atom = _ATOMS[key]
            factors.append(atom if e == 1 else Expr("pow", (atom,), exponent=e))
        if not factors:
            terms.append(const(c))
            continue
        body = factors[0] if len(factors) == 1 else Expr("mul", tuple(factors))
        if num.is_one(c):
            terms.append(body)
        elif num.is_one(num.neg(c)):
            terms.append(Expr("neg", (body,)))
        else:
            terms.append(Expr("mul", (const(c),) + tuple(factors)))
    return terms[0] if len(terms) == 1 else Expr("add", tuple(terms))


@lru_cache(maxsize=65536)
def simplify(e: Expr) -> Expr:
    """Polynomial normal form: folded constants, collected like terms.

    Pointwise equal to ``e`` and idempotent.
    """
    return _from_poly(_poly(e))


def coefficient_of(e: Expr, monomial: Expr) -> num.Scalar:
    """Exact coefficient of a monomial (e.g. ``sec(x)^4*tan(x)``) in ``simplify(e)``."""
    target = _poly(monomial)
    if len(target) != 1:
        raise ValueError("monomial must be a single product of atoms")
    (m, c), = target.items()
    value = _poly(e).get(m, Fraction(0))
    return num.mul(value, num.inverse(c))


def terms(e: Expr) -> list[tuple[num.Scalar, Expr]]:
    """(coefficient, monomial) pairs of the normal form of ``e``."""
    out = []
    for m, c in sorted(_poly(e).items()):
        out.append((c, _from_poly({m: Fraction(1)})))
    return out


# ----------------------------------------------------------- differentiation

@lru_cache(maxsize=65536)
def _d1(e: Expr) -> Expr:
    k = e.kind
    if k == "const":
        return ZERO
    if k == "var":
        return ONE
    if k == "neg":
        return neg(_d1(e.args[0]))
    if k == "add":
        return add(*(_d1(a) for a in e.args))
    if k == "mul":
        out = []
        for i, a in enumerate(e.args):
            da = _d1(a)
            if da.is_zero:
                continue
            out.append(mul(*(e.args[:i] + (da,) + e.args[i + 1:])))
        return add(*out) if out else ZERO
    if k == "pow":
        u = e.args[0]
        n = e.exponent
        return mul(const(n), power(u, n - 1), _d1(u))
    u = e.args[0]
    du = _d1(u)
    if du.is_zero:
        return ZERO
    if k == "sin":
        return mul(cos(u), du)
    if k == "cos":
        return neg(mul(sin(u), du))
    if k == "tan":
        return mul(power(sec(u), 2), du)
    if k == "sec":
        return mul(sec(u), tan(u), du)
    return mul(exp(u), du)


@lru_cache(maxsize=65536)
def _d1_simplified(e: Expr) -> Expr:
    return simplify(_d1(simplify(e)))


def differentiate(e: Expr, n: int = 1) -> Expr:
    """Exact ``n``-th derivative with respect to ``x`` (simplified)."""
    if n < 0:
        raise ValueError("derivative order must be non-negative")
    out = e
    for _ in range(n):
        out = _d1_simplified(out)
    return out


# ----------------------------------------------------------------- evaluation

def evaluate_array(e: Expr, xs, pole_floor: float = POLE_FLOOR, on_pole: str = "raise") -> np.ndarray:
    """Evaluate on an array of points; returns complex128.

    ``on_pole='nan'`` masks points that hit a sec/tan pole (or a zero divisor)
    with NaN instead of raising :class:`PoleError`.
    """
    xs = np.asarray(xs, dtype=complex)
    bad = np.zeros(xs.shape, dtype=bool)
    memo: dict = {}

    def ev(node: Expr) -> np.ndarray:
        got = memo.get(node)
        if got is not None:
            return got
        k = node.kind
        if k == "const":
            out = np.full(xs.shape, complex(node.value))
        elif k == "var":
            out = xs
        elif k == "neg":
            out = -ev(node.args[0])
        elif k == "add":
            out = ev(node.args[0])
            for a in node.args[1:]:
                out = out + ev(a)
        elif k == "mul":
            out = ev(node.args[0])
            for a in node.args[1:]:
                out = out * ev(a)
        elif k == "pow":
            base = ev(node.args[0])
            n = node.exponent
            if n < 0:
                zero = base == 0
                if zero.any():
                    if on_pole == "raise":
                        raise PoleError(render(node), "division by zero")
                    bad[zero] = True
                    base = np.where(zero, 1.0, base)
                out = (1.0 / base) ** (-n)
            else:
                out = base**n
        else:
            u = ev(node.args[0])
            if k in ("tan", "sec"):
                c = np.cos(u)
                hit = np.abs(c) <= pole_floor
                if hit.any():
                    if on_pole == "raise":
                        where = xs[hit][0]
                        raise PoleError(render(node), f"|cos| <= {pole_floor:g} at x = {where}")
                    bad[hit] = True
                    c = np.where(hit, 1.0, c)
                out = np.sin(u) / c if k == "tan" else 1.0 / c
            elif k == "sin":
                out = np.sin(u)
            elif k == "cos":
                out = np.cos(u)
            else:
                out = np.exp(u)
        memo[node] = out
        return out

    with np.errstate(over="ignore", invalid="ignore"):
        out = np.array(ev(e), dtype=complex, copy=True)
    if bad.any():
        out[bad] = np.nan
    return out


def evaluate(e: Expr, x0, pole_floor: float = POLE_FLOOR) -> complex:
    """Value of ``e`` at one (complex) point; raises :class:`PoleError` at poles."""
    return complex(evaluate_array(e, np.array([x0]), pole_floor)[0])


def check_no_poles(e: Expr, domain, n: int = 4001) -> None:
    """Raise :class:`PoleError` if a sec/tan pole or a zero divisor lies in ``domain``.

    Point evaluation can step over a pole; here the cosine (or the divisor)
    of every singular node is scanned for a sign change on a dense grid.
    """
    xs = np.linspace(domain[0], domain[1], n)
    seen = set()

    def visit(node: Expr):
        if node in seen:
            return
        seen.add(node)
        for a in node.args:
            visit(a)
        if node.kind in ("tan", "sec"):
            d = np.cos(evaluate_array(node.args[0], xs))
        elif node.kind == "pow" and node.exponent < 0:
            d = evaluate_array(node.args[0], xs)
        else:
            return
        re = d.real
        cross = (np.abs(d) <= POLE_FLOOR)[:-1] | ((re[:-1] * re[1:] < 0) & (np.abs(d.imag[:-1]) <= POLE_FLOOR))
        if cross.any():
            where = xs[int(np.argmax(cross))]
            raise PoleError(render(node), f"singular near x = {where:.6g}")

    visit(e)


def evaluate_real(e: Expr, xs, pole_floor: float = POLE_FLOOR, imag_tol: float = 1e-12) -> np.ndarray:
    """Real-valued evaluation; raises if the imaginary part is not negligible."""
    v = evaluate_array(e, xs, pole_floor)
    scale = np.maximum(1.0, np.abs(v.real))
    if np.any(np.abs(v.imag) > imag_tol * scale):
        raise ValueError(f"expression {render(e)[:80]} is not real on the grid")
    return v.real.copy()


# ---------------------------------------------------------------- substitution

def substitute(e: Expr, replacement: Expr) -> Expr:
    """Replace the variable ``x`` by ``replacement`` (another Expr)."""
    memo: dict = {}

    def go(n: Expr) -> Expr:
        got = memo.get(n)
        if got is not None:
            return got
        k = n.kind
        if k == "var":
            out = replacement
        elif k == "const":
            out = n
        elif k == "neg":
            out = neg(go(n.args[0]))
        elif k == "add":
            out = add(*(go(a) for a in n.args))
        elif k == "mul":
            out = mul(*(go(a) for a in n.args))
        elif k == "pow":
            out = power(go(n.args[0]), n.exponent)
        else:
            out = _func(k, go(n.args[0]))
        memo[n] = out
        return out

    return go(e)


def reflect(e: Expr) -> Expr:
    """``e(-x)``, simplified."""
    return simplify(substitute(e, neg(X)))


def conjugate(e: Expr) -> Expr:
    """Complex conjugate for real ``x``: conjugates every constant."""
    memo: dict = {}

    def go(n: Expr) -> Expr:
        got = memo.get(n)
        if got is not None:
            return got
        k = n.kind
        if k == "const":
            out = const(num.conj(n.value))
        elif k == "var":
            out = n
        elif k == "pow":
            out = Expr("pow", (go(n.args[0]),), exponent=n.exponent)
        else:
            out = Expr(k, tuple(go(a) for a in n.args))
        memo[n] = out
        return out

    return simplify(go(e))


def is_real_coefficient(e: Expr) -> bool:
    """True when every constant in ``e`` is real (so ``e`` is real for real x)."""
    if e.kind == "const":
        return num.is_real(e.value)
    return all(is_real_coefficient(a) for a in e.args)


# --------------------------------------------------------------------- parity

class Parity(enum.Enum):
    EVEN = "even"
    ODD = "odd"
    INDETERMINATE = "indeterminate"


_E, _O = Parity.EVEN, Parity.ODD


def _structural_parity(e: Expr):
    k = e.kind
    if k == "const":
        return _E
    if k == "var":
        return _O
    if k == "neg":
        return _structural_parity(e.args[0])
    if k == "add":
        ps = {_structural_parity(a) for a in e.args}
        return ps.pop() if len(ps) == 1 else None
    if k == "mul":
        odd = 0
        for a in e.args:
            p = _structural_parity(a)
            if p is None:
                return None
            odd += p is _O
        return _O if odd % 2 else _E
    if k == "pow":
        p = _structural_parity(e.args[0])
        if p is None:
            return None
        return _O if (p is _O and e.exponent % 2) else _E
    p = _structural_parity(e.args[0])
    if p is None:
        return None
    if k in ("cos", "sec"):
        return _E
    if k in ("sin", "tan"):
        return p
    return _E if p is _E else None


# 32 symmetric sample pairs for the numeric fallback
_PARITY_POINTS = np.linspace(0.05, 1.4, 32) + 0.0123


def parity_of(e: Expr, points: Iterable[float] | None = None, rtol: float = 1e-9) -> Parity:
    """Even/odd classification: structural rules, then symmetric sampling."""
    p = _structural_parity(simplify(e))
    if p is not None:
        return p
    xs = np.asarray(list(points) if points is not None else _PARITY_POINTS, dtype=float)
    plus = evaluate_array(e, xs, on_pole="nan")
    minus = evaluate_array(e, -xs, on_pole="nan")
    ok = np.isfinite(plus) & np.isfinite(minus)
    if ok.sum() < 8:
        return Parity.INDETERMINATE
    plus, minus = plus[ok], minus[ok]
    scale = np.maximum(1.0, np.maximum(np.abs(plus), np.abs(minus)))
    if np.all(np.abs(plus - minus) <= rtol * scale):
        return _E
    if np.all(np.abs(plus + minus) <= rtol * scale):
        return _O
    return Parity.INDETERMINATE


# ------------------------------------------------------------------- equality

def sample_points(domain=(-1.4, 1.4), n: int = 100, seed: int = 0) -> np.ndarray:
    lo, hi = domain
    rng = np.random.default_rng(seed)
    return np.sort(rng.uniform(lo, hi, n))


def max_relative_deviation(a: Expr, b: Expr, points) -> float:
    va = evaluate_array(a, points, on_pole="nan")
    vb = evaluate_array(b, points, on_pole="nan")
    ok = np.isfinite(va) & np.isfinite(vb)
    if not ok.any():
        raise ValueError("no usable sample points (all at poles)")
    va, vb = va[ok], vb[ok]
    scale = np.maximum(1.0, np.maximum(np.abs(va), np.abs(vb)))
    return float(np.max(np.abs(va - vb) / scale))


def pointwise_equal(a: Expr, b: Expr, points=None, rtol: float = 1e-10, domain=(-1.4, 1.4), seed: int = 0) -> bool:
    """Randomised equality: agreement at 100 points to ``rtol`` (relative, floor 1)."""
    if points is None:
        points = sample_points(domain, 100, seed)
    return max_relative_deviation(a, b, points) <= rtol


# --------------------------------------------------------------------- parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)
_RESERVED = {"x", "I", "pi"} | set(_UNARY)


class _Parser:
    def __init__(self, text: str, params: Mapping[str, object]):
        self.text = text
        self.params = {k: num.from_user_value(v) for k, v in params.items()}
        for name in self.params:
            if name in _RESERVED:
                raise ValueError(f"parameter name {name!r} is reserved")
        self.tokens = self._tokenize()
        self.i = 0

    def _offset(self, pos: int) -> int:
        return len(self.text[:pos].encode("utf-8"))

    def _tokenize(self):
        out = []
        pos = 0
        text = self.text
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ParseError(f"unexpected character {text[pos]!r}", self._offset(pos))
            kind = m.lastgroup
            start = m.start(kind)
            out.append((kind, m.group(kind), start))
            pos = m.end()
        out.append(("end", "", len(text)))
        return out

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, self._offset(tok[2]))

    def expect(self, op):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != op:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            self.error(f"expected {op!r}, found {what}")
        return self.take()

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected {self.peek()[1]!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else add(e, neg(rhs))
        return e

    def term(self) -> Expr:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return neg(self.term())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.term()
        return self.product()

    def product(self) -> Expr:
        e = self.power()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            rhs = self.factor()
            e = mul(e, rhs) if op == "*" else mul(e, power(rhs, -1))
        return e

    def factor(self) -> Expr:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            caret = self.take()
            start = self.peek()
            ex = self.factor()
            if ex.kind != "const":
                self.error("non-integer exponent (exponent must be a constant)", start)
            n = num.as_integer(ex.value)
            if n is None:
                self.error(f"non-integer exponent {render(ex)}", start)
            try:
                return power(base, n)
            except PoleError:
                self.error("zero raised to a negative power", caret)
        return base

    def atom(self) -> Expr:
        tok = self.take()
        kind, text, pos = tok
        if kind == "num":
            return const(num.from_literal(text))
        if kind == "name":
            if text in _UNARY:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _func(text, arg)
            if text == "x":
                return X
            if text == "I":
                return I_UNIT
            if text == "pi":
                return const(math.pi)
            if text in self.params:
                return const(self.params[text])
            raise UnboundParameterError(text, self._offset(pos))
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        self.i -= 1
        what = "end of input" if kind == "end" else repr(text)
        self.error(f"unexpected {what}")


def parse(text: str, params: Mapping[str, object] | None = None) -> Expr:
    """Parse DSL text into an :class:`Expr`.

    Grammar: numbers, ``x``, ``+ - * / ^``, parentheses, ``sin cos tan sec
    exp``, the imaginary unit ``I``, ``pi``, and named parameters taken from
    ``params``.  ``^`` binds tightest and is right-associative; unary minus
    binds looser than ``*``.
    """
    return _Parser(text, params or {}).parse()

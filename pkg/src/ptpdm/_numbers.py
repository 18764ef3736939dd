"""Scalar payloads for expression constants.

Constants stay exact (``Fraction`` for reals, ``GaussianRational`` for complex
values with rational parts) as long as every operand is exact; anything else
falls back to Python floats / complex numbers.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

# exact values whose denominators grow past this are demoted to floats
_MAX_DENOMINATOR = 10**40


class GaussianRational:
    """Complex number with rational real and imaginary parts (imag != 0)."""

    __slots__ = ("re", "im")

    def __init__(self, re: Fraction, im: Fraction):
        self.re = Fraction(re)
        self.im = Fraction(im)

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __eq__(self, other):
        if isinstance(other, GaussianRational):
            return self.re == other.re and self.im == other.im
        return False

    def __hash__(self):
        return hash((self.re, self.im))

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"


Scalar = Union[Fraction, GaussianRational, float, complex]

I = GaussianRational(Fraction(0), Fraction(1))


def _parts(a):
    if isinstance(a, GaussianRational):
        return a.re, a.im
    return a, Fraction(0)


def _exact(a) -> bool:
    return isinstance(a, (Fraction, GaussianRational))


def _make_exact(re: Fraction, im: Fraction) -> Scalar:
    if max(re.denominator, im.denominator) > _MAX_DENOMINATOR:
        return normalize(complex(float(re), float(im)))
    if im == 0:
        return re
    return GaussianRational(re, im)


def normalize(v) -> Scalar:
    """Coerce a Python number into the canonical scalar representation."""
    if isinstance(v, bool):
        raise TypeError("booleans are not numeric constants")
    if isinstance(v, (Fraction, GaussianRational)):
        if isinstance(v, GaussianRational) and v.im == 0:
            return v.re
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return v
    if isinstance(v, complex):
        if v.imag == 0:
            return float(v.real)
        return v
    if hasattr(v, "__complex__") or hasattr(v, "__float__"):
        # numpy scalars
        c = complex(v)
        return float(c.real) if c.imag == 0 else c
    raise TypeError(f"unsupported constant {v!r}")


def to_complex(v: Scalar) -> complex:
    return complex(v)


def add(a: Scalar, b: Scalar) -> Scalar:
    if _exact(a) and _exact(b):
        ar, ai = _parts(a)
        br, bi = _parts(b)
        return _make_exact(ar + br, ai + bi)
    return normalize(complex(a) + complex(b)) if _is_complex(a, b) else float(a) + float(b)


def mul(a: Scalar, b: Scalar) -> Scalar:
    if _exact(a) and _exact(b):
        ar, ai = _parts(a)
        br, bi = _parts(b)
        return _make_exact(ar * br - ai * bi, ar * bi + ai * br)
    return normalize(complex(a) * complex(b)) if _is_complex(a, b) else float(a) * float(b)


def neg(a: Scalar) -> Scalar:
    if isinstance(a, GaussianRational):
        return GaussianRational(-a.re, -a.im)
    return -a


def conj(a: Scalar) -> Scalar:
    if isinstance(a, GaussianRational):
        return GaussianRational(a.re, -a.im)
    if isinstance(a, complex):
        return a.conjugate()
    return a


def inverse(a: Scalar) -> Scalar:
    if is_zero(a):
        raise ZeroDivisionError("inverse of zero constant")
    if _exact(a):
        ar, ai = _parts(a)
        den = ar * ar + ai * ai
        return _make_exact(ar / den, -ai / den)
    return normalize(1 / complex(a)) if isinstance(a, complex) else 1.0 / a


def power(a: Scalar, n: int) -> Scalar:
    if n < 0:
        return power(inverse(a), -n)
    result: Scalar = Fraction(1)
    base = a
    while n:
        if n & 1:
            result = mul(result, base)
        base = mul(base, base)
        n >>= 1
    return result


def is_zero(a: Scalar) -> bool:
    if isinstance(a, GaussianRational):
        return False
    return a == 0


def is_one(a: Scalar) -> bool:
    return not isinstance(a, GaussianRational) and a == 1


def is_real(a: Scalar) -> bool:
    return isinstance(a, (Fraction, float))


def is_negative_real(a: Scalar) -> bool:
    return is_real(a) and a < 0


def _is_complex(a, b) -> bool:
    return isinstance(a, (complex, GaussianRational)) or isinstance(b, (complex, GaussianRational))


def as_integer(a: Scalar) -> int | None:
    """Return ``a`` as an int when it is an integral real value."""
    if isinstance(a, Fraction):
        return int(a) if a.denominator == 1 else None
    if isinstance(a, float) and math.isfinite(a) and a == int(a):
        return int(a)
    return None


def from_literal(text: str) -> Scalar:
    """Exact value of a decimal literal such as ``0.5`` or ``1e-3``."""
    return Fraction(text)


def from_user_value(v) -> Scalar:
    """Convert a user-supplied parameter (int, float, or rational string).

    Floats that have a short decimal representation become exact rationals so
    that inputs like ``0.5`` or ``3`` keep the exact fast path.
    """
    if isinstance(v, str):
        return normalize(Fraction(v.strip()))
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError(f"non-finite parameter value {v!r}")
        q = Fraction(repr(v))
        if q.denominator <= 10**12:
            return q
        return v
    return normalize(v)


def format_scalar(a: Scalar) -> str:
    """Render a scalar in the expression DSL (always parenthesised if signed)."""
    if isinstance(a, Fraction):
        if a.denominator == 1:
            s = str(a.numerator)
        else:
            s = f"{a.numerator}/{a.denominator}"
        return s if (a >= 0 and a.denominator == 1) else f"({s})"
    if isinstance(a, GaussianRational):
        if a.re == 0:
            return f"({format_scalar(a.im)}*I)"
        return f"({format_scalar(a.re)}+{format_scalar(a.im)}*I)"
    if isinstance(a, float):
        if not math.isfinite(a):
            raise ValueError(f"cannot render non-finite constant {a!r}")
        s = repr(a)
        return s if a >= 0 else f"({s})"
    if isinstance(a, complex):
        return f"({format_scalar(float(a.real))}+{format_scalar(float(a.imag))}*I)"
    raise TypeError(a)

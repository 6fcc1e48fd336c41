"""Exact scalar arithmetic shared by every module.

Plain rationals are ``fractions.Fraction``.  Square-root valuations produce
sympy expressions; those mix freely with Fractions in sums, differences and
comparisons.  No exact code path ever touches a float; floats appear only in
explicitly approximate report fields.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

# Fraction in the common case, sympy.Expr when a square root is involved.
Num = Union[Fraction, object]

_sympy = None


def sym():
    """Import sympy lazily; radical values are rare and the import is heavy."""
    global _sympy
    if _sympy is None:
        import sympy

        _sympy = sympy
    return _sympy


def is_rational(x) -> bool:
    return isinstance(x, (Fraction, int))


def parse_rational(text) -> Fraction:
    """Parse 'p/q' or 'p' into a Fraction."""
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational: {text!r}") from exc


def parse_number(text) -> Num:
    """Parse 'p/q' rationals, falling back to symbolic sqrt expressions."""
    try:
        return parse_rational(text)
    except ValueError:
        pass
    sp = sym()
    try:
        expr = sp.sympify(str(text))
    except Exception as exc:
        raise ValueError(f"not a number: {text!r}") from exc
    if not getattr(expr, "is_number", False):
        raise ValueError(f"not a number: {text!r}")
    if expr.is_Rational:
        return Fraction(int(expr.p), int(expr.q))
    return expr


def format_number(x) -> str:
    """Serialize exactly: 'p' / 'p/q' for rationals, sympy str otherwise."""
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return str(x.numerator)
        return f"{x.numerator}/{x.denominator}"
    sp = sym()
    e = sp.nsimplify(x) if not isinstance(x, sp.Expr) else x
    if e.is_Rational:
        return format_number(Fraction(int(e.p), int(e.q)))
    return str(e)


def sqrt_int(k: int) -> Num:
    """Exact square root of a nonnegative integer.

    Perfect squares come back as Fractions so purely rational flows stay
    rational; everything else is a sympy radical.
    """
    if k < 0:
        raise ValueError("sqrt of negative integer")
    r = math.isqrt(k)
    if r * r == k:
        return Fraction(r)
    return sym().sqrt(k)


def sign(x) -> int:
    """Exact sign of a Fraction or a concrete radical expression."""
    if isinstance(x, (Fraction, int)):
        return (x > 0) - (x < 0)
    sp = sym()
    e = x if isinstance(x, sp.Expr) else sp.sympify(x)
    if e.is_Rational:
        return int(sp.sign(e))
    e = sp.expand(e)
    if e.is_zero:
        return 0
    if e.is_positive:
        return 1
    if e.is_negative:
        return -1
    # Radical cancellations that expand() missed.
    e = sp.radsimp(sp.simplify(e))
    if e.is_zero or e.equals(0):
        return 0
    if e.is_positive:
        return 1
    if e.is_negative:
        return -1
    raise ArithmeticError(f"cannot decide sign of {x!r}")


def nabs(x) -> Num:
    return x if sign(x) >= 0 else -x


def as_float(x) -> float:
    if isinstance(x, (Fraction, int)):
        return float(x)
    return float(x)


def as_fraction(x) -> Fraction:
    """Convert to Fraction; rejects irrational values."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    sp = sym()
    e = sp.nsimplify(x) if not isinstance(x, sp.Expr) else x
    if e.is_Rational:
        return Fraction(int(e.p), int(e.q))
    raise ValueError(f"not a rational value: {x!r}")


def nmax(values) -> Num:
    """Exact maximum over an iterable of Nums."""
    best = None
    for v in values:
        if best is None or sign(v - best) > 0:
            best = v
    if best is None:
        raise ValueError("max of empty sequence")
    return best

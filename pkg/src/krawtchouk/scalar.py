"""Numeric backends.

Two interchangeable backends are used throughout the package:

* exact: ``int``/``fractions.Fraction``, plus :class:`Surd` for the
  quadratic irrationals ``c * sqrt(r)`` that orthonormal bases such as
  Irwin-Helmert introduce;
* float: Python/numpy ``float`` (``complex`` for circulant eigen-data).

Generic code only uses ``+ - * /`` so the same routines run on either.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Union

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


class IncommensurableError(ArithmeticError):
    """Raised when two surds with unrelated radicands are added exactly."""


def rational_sqrt(q) -> Fraction | None:
    """Exact square root of a nonnegative rational, or ``None`` if irrational."""
    q = Fraction(q)
    if q < 0:
        return None
    num, den = q.numerator, q.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return None


def _canonical(coef: Fraction, rad: Fraction) -> tuple[Fraction, int]:
    # sqrt(a/b) = sqrt(a*b)/b, then pull out small square factors
    a, b = rad.numerator, rad.denominator
    coef = coef / b
    r = a * b
    for q in _SMALL_PRIMES:
        qq = q * q
        while r % qq == 0:
            r //= qq
            coef *= q
    return coef, r


class Surd:
    """Exact real number ``coef * sqrt(rad)`` with rational ``coef`` and ``rad``.

    Instances are always irrational; :func:`surd` collapses rational results
    to :class:`~fractions.Fraction`.  Addition is exact whenever the two
    radicands differ by a rational square, which covers every sum formed in
    this package (all terms of a given sum share one radical factor).
    """

    __slots__ = ("coef", "rad")

    def __init__(self, coef: Fraction, rad: int):
        self.coef = coef
        self.rad = rad

    # -- conversions -----------------------------------------------------
    def __float__(self) -> float:
        return float(self.coef) * math.sqrt(self.rad)

    def __complex__(self) -> complex:
        return complex(float(self))

    def __repr__(self) -> str:
        return f"Surd({self.coef!s}, {self.rad})"

    def __str__(self) -> str:
        return f"{self.coef}*sqrt({self.rad})"

    def __hash__(self) -> int:
        return hash(("surd", self.coef * self.coef * self.rad, self.coef > 0))

    # -- arithmetic ------------------------------------------------------
    def _split(self, other):
        """Return ``other`` as (coef, rad) or None for non-exact operands."""
        if isinstance(other, Surd):
            return other.coef, Fraction(other.rad)
        if isinstance(other, Rational):
            return Fraction(other), Fraction(1)
        return None

    def __neg__(self):
        return Surd(-self.coef, self.rad)

    def __pos__(self):
        return self

    def __abs__(self):
        return Surd(abs(self.coef), self.rad)

    def __add__(self, other):
        parts = self._split(other)
        if parts is None:
            if isinstance(other, (float, complex)):
                return float(self) + other
            return NotImplemented
        c2, r2 = parts
        if c2 == 0:
            return self
        ratio = rational_sqrt(Fraction(self.rad) / r2)
        if ratio is None:
            raise IncommensurableError(f"cannot add {self!r} and {other!r} exactly")
        return surd(self.coef * ratio + c2, r2)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        parts = self._split(other)
        if parts is None:
            if isinstance(other, (float, complex)):
                return float(self) * other
            return NotImplemented
        c2, r2 = parts
        return surd(self.coef * c2, self.rad * r2)

    __rmul__ = __mul__

    def __truediv__(self, other):
        parts = self._split(other)
        if parts is None:
            if isinstance(other, (float, complex)):
                return float(self) / other
            return NotImplemented
        c2, r2 = parts
        if c2 == 0:
            raise ZeroDivisionError("division by zero")
        # 1/(c sqrt(r)) = sqrt(r) / (c r)
        return surd(self.coef / (c2 * r2), self.rad * r2)

    def __rtruediv__(self, other):
        parts = self._split(other)
        if parts is None:
            if isinstance(other, (float, complex)):
                return other / float(self)
            return NotImplemented
        c2, r2 = parts
        return surd(c2 / (self.coef * self.rad), r2 * self.rad)

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return float(self) ** k
        if k < 0:
            return 1 / (self ** (-k))
        return surd(self.coef ** k, Fraction(self.rad) ** k)

    # -- comparisons -----------------------------------------------------
    def _signed_square(self) -> Fraction:
        sq = self.coef * self.coef * self.rad
        return sq if self.coef > 0 else -sq

    def _cmp(self, other) -> int | None:
        parts = self._split(other)
        if parts is None:
            if isinstance(other, float):
                a = float(self)
                return (a > other) - (a < other)
            return None
        c2, r2 = parts
        sq2 = c2 * c2 * r2
        b = sq2 if c2 > 0 else -sq2
        a = self._signed_square()
        return (a > b) - (a < b)

    def __eq__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c == 0

    def __lt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c < 0

    def __le__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c <= 0

    def __gt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c > 0

    def __ge__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c >= 0


Exact = Union[int, Fraction, Surd]


def surd(coef, rad) -> Union[Fraction, Surd]:
    """Build ``coef * sqrt(rad)``, returning a Fraction when it is rational."""
    coef = Fraction(coef)
    rad = Fraction(rad)
    if rad < 0:
        raise ValueError("negative radicand")
    if coef == 0 or rad == 0:
        return Fraction(0)
    root = rational_sqrt(rad)
    if root is not None:
        return coef * root
    c, r = _canonical(coef, rad)
    return Surd(c, r)


def exact_sqrt(q) -> Union[Fraction, Surd]:
    return surd(1, q)


def is_exact(value) -> bool:
    return isinstance(value, (Rational, Surd))


def all_exact(values: Iterable) -> bool:
    return all(is_exact(v) for v in values)


def to_float(value):
    """Float (or complex) view of any scalar."""
    if isinstance(value, complex):
        return value
    return float(value)


def parse_scalar(text) -> Fraction:
    """Parse ``"3"``, ``"1/3"`` or ``"0.35"`` into an exact Fraction."""
    if isinstance(text, Rational):
        return Fraction(text)
    if isinstance(text, float):
        return Fraction(repr(text))
    s = str(text).strip()
    if not s:
        raise ValueError("empty numeric literal")
    return Fraction(s)


def parse_vector(text: str) -> tuple[Fraction, ...]:
    """Parse a comma separated list of rational literals."""
    return tuple(parse_scalar(t) for t in str(text).split(",") if t.strip())


def format_scalar(value):
    """JSON-friendly rendering: rationals as ``"n/d"`` strings, floats as floats."""
    if isinstance(value, bool):
        return value
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, Surd):
        return float(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return float(value)


def is_zero(value, tol: float = 0.0) -> bool:
    if is_exact(value) and tol == 0:
        return value == 0
    return abs(complex(value)) <= tol

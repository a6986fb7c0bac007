"""Exact arithmetic for price-update mechanisms.

Price trajectories have the form ``p0 * r**l`` where the update factor
``r = base**(1/b)`` is rational for ``b == 1`` (and whenever ``base`` is a
perfect square for ``b == 2``) but a quadratic surd otherwise.  ``Quad``
represents numbers ``a + c*sqrt(R)`` with rational ``a, c`` exactly, which
keeps every affordability comparison and welfare inequality exact for
supplies ``b <= 2``.  For ``b >= 3`` callers fall back to floats.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

Rational = Union[int, Fraction]


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


def rational_root(base: Fraction, k: int) -> Fraction | None:
    """Return base**(1/k) if it is rational, else None (base >= 0)."""
    base = _as_fraction(base)
    if base < 0:
        raise ValueError("negative base")
    if k == 1:
        return base
    num, den = base.numerator, base.denominator
    rn = round(num ** (1.0 / k))
    rd = round(den ** (1.0 / k))
    for n in (rn - 1, rn, rn + 1):
        for d in (rd - 1, rd, rd + 1):
            if n >= 0 and d >= 1 and n**k == num and d**k == den:
                return Fraction(n, d)
    return None


class Quad:
    """An exact number ``a + c*sqrt(R)`` with Fraction coefficients.

    ``R`` must be a positive rational that is not a perfect square; use
    plain Fractions otherwise.  Instances are immutable and totally
    ordered (also against ints and Fractions).
    """

    __slots__ = ("a", "c", "R")

    def __init__(self, a, c, R):
        object.__setattr__(self, "a", _as_fraction(a))
        object.__setattr__(self, "c", _as_fraction(c))
        object.__setattr__(self, "R", _as_fraction(R))

    def __setattr__(self, *args):
        raise AttributeError("Quad is immutable")

    def _lift(self, other) -> "Quad":
        if isinstance(other, Quad):
            if other.R != self.R and other.c != 0 and self.c != 0:
                raise ValueError("mixing different surd fields")
            return other
        return Quad(_as_fraction(other), 0, self.R)

    def __add__(self, other):
        o = self._lift(other)
        return Quad(self.a + o.a, self.c + o.c, self.R)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return Quad(self.a - o.a, self.c - o.c, self.R)

    def __rsub__(self, other):
        o = self._lift(other)
        return Quad(o.a - self.a, o.c - self.c, self.R)

    def __mul__(self, other):
        o = self._lift(other)
        return Quad(
            self.a * o.a + self.c * o.c * self.R,
            self.a * o.c + self.c * o.a,
            self.R,
        )

    __rmul__ = __mul__

    def __neg__(self):
        return Quad(-self.a, -self.c, self.R)

    def sign(self) -> int:
        """Exact sign of a + c*sqrt(R)."""
        a, c = self.a, self.c
        if c == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return (c > 0) - (c < 0)
        if a > 0 and c > 0:
            return 1
        if a < 0 and c < 0:
            return -1
        # opposite signs: compare a^2 with c^2 * R
        lhs, rhs = a * a, c * c * self.R
        if a > 0:  # c < 0
            return 1 if lhs > rhs else (-1 if lhs < rhs else 0)
        return 1 if rhs > lhs else (-1 if rhs < lhs else 0)

    def _cmp(self, other) -> int:
        return (self - self._lift(other)).sign()

    def __eq__(self, other):
        try:
            return self._cmp(other) == 0
        except TypeError:
            return NotImplemented

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __hash__(self):
        if self.c == 0:
            return hash(self.a)
        return hash((self.a, self.c, self.R))

    def __float__(self):
        return float(self.a) + float(self.c) * math.sqrt(float(self.R))

    def __repr__(self):
        return f"Quad({self.a} + {self.c}*sqrt({self.R}))"


def root_of(base: Rational, k: int):
    """base**(1/k) as an exact number when possible, else a float.

    Returns a Fraction (k==1 or perfect power), a Quad (k==2), or a float
    (k>=3 and irrational).
    """
    base = _as_fraction(base)
    exact = rational_root(base, k)
    if exact is not None:
        return exact
    if k == 2:
        return Quad(0, 1, base)
    return float(base) ** (1.0 / k)


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, Quad))


def as_float(x) -> float:
    return float(x)

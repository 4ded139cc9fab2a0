"""Numbers of the form p + q*sqrt(r) with rational p, q and square-free r."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


def _square_free(n: int) -> tuple[int, int]:
    """n = s^2 * r with r square-free; returns (s, r)."""
    s, r = 1, 1
    d = 2
    m = n
    while d * d <= m:
        e = 0
        while m % d == 0:
            m //= d
            e += 1
        s *= d ** (e // 2)
        r *= d ** (e % 2)
        d += 1
    return s, r * m


@dataclass(frozen=True)
class Surd:
    p: Fraction = Fraction(0)
    q: Fraction = Fraction(0)
    r: int = 1

    @classmethod
    def sqrt(cls, n, coef=1) -> "Surd":
        """coef * sqrt(n) for a nonnegative rational n."""
        n = Fraction(n)
        if n < 0:
            raise ValueError("negative radicand")
        # sqrt(a/b) = sqrt(a*b)/b
        s, r = _square_free(n.numerator * n.denominator)
        q = Fraction(coef) * s / n.denominator
        if r == 1:
            return cls(q, Fraction(0), 1)
        return cls(Fraction(0), q, r)

    @classmethod
    def of(cls, x) -> "Surd":
        return cls(Fraction(x), Fraction(0), 1)

    def __add__(self, other):
        other = other if isinstance(other, Surd) else Surd.of(other)
        if self.q and other.q and self.r != other.r:
            raise ValueError("cannot add surds with different radicands")
        r = self.r if self.q else other.r
        return Surd(self.p + other.p, self.q + other.q, r)

    __radd__ = __add__

    def __mul__(self, k):
        k = Fraction(k)
        return Surd(self.p * k, self.q * k, self.r)

    __rmul__ = __mul__

    def __float__(self):
        return float(self.p) + float(self.q) * math.sqrt(self.r)

    def __str__(self):
        parts = []
        if self.p:
            parts.append(_frac_str(self.p))
        if self.q:
            q = self.q
            sign = "-" if q < 0 else "+"
            q = abs(q)
            rad = f"sqrt({self.r})"
            if q.numerator == 1 and q.denominator == 1:
                term = rad
            elif q.denominator == 1:
                term = f"{q.numerator}*{rad}"
            elif q.numerator == 1:
                term = f"{rad}/{q.denominator}"
            else:
                term = f"{q.numerator}*{rad}/{q.denominator}"
            if parts:
                parts.append(f" {sign} {term}")
            else:
                parts.append(("-" if sign == "-" else "") + term)
        return "".join(parts) if parts else "0"


def _frac_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"

"""Polynomial branches with exact rational coefficients.

Coefficients are stored twice: as floats for fast Horner evaluation inside the
integrator, and as :class:`fractions.Fraction` values for exact differentiation,
root isolation and sign certificates (via sympy).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import sympy

_X = sympy.Symbol("x", real=True)


def _to_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, str):
        return Fraction(c.strip())
    if isinstance(c, sympy.Rational):
        return Fraction(int(c.p), int(c.q))
    # float -> exact binary value, so float and exact views agree bit for bit
    return Fraction(c)


def _trim(cs: list[Fraction]) -> list[Fraction]:
    while len(cs) > 1 and cs[-1] == 0:
        cs.pop()
    return cs


@dataclass(frozen=True)
class PolyBranch:
    """One polynomial piece of the fast nullcline, ascending-degree coefficients."""

    exact: tuple[Fraction, ...]
    coeffs: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.exact) == 0:
            raise ValueError("a polynomial branch needs at least one coefficient")
        cs = _trim([_to_fraction(c) for c in self.exact])
        object.__setattr__(self, "exact", tuple(cs))
        object.__setattr__(self, "coeffs", tuple(float(c) for c in cs))

    @classmethod
    def of(cls, coeffs: Iterable) -> "PolyBranch":
        return cls(tuple(_to_fraction(c) for c in coeffs))

    @classmethod
    def from_roots(cls, roots: Sequence, lead=1) -> "PolyBranch":
        p = cls.of([lead])
        for r in roots:
            p = p * cls.of([-_to_fraction(r), 1])
        return p

    @property
    def degree(self) -> int:
        return len(self.exact) - 1

    def __call__(self, x: float) -> float:
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def exact_at(self, x) -> Fraction:
        x = _to_fraction(x)
        acc = Fraction(0)
        for c in reversed(self.exact):
            acc = acc * x + c
        return acc

    def deriv(self, order: int = 1) -> "PolyBranch":
        cs = list(self.exact)
        for _ in range(order):
            cs = [k * c for k, c in enumerate(cs)][1:] or [Fraction(0)]
        return PolyBranch(tuple(cs))

    def __add__(self, other: "PolyBranch") -> "PolyBranch":
        n = max(len(self.exact), len(other.exact))
        a = list(self.exact) + [Fraction(0)] * (n - len(self.exact))
        b = list(other.exact) + [Fraction(0)] * (n - len(other.exact))
        return PolyBranch(tuple(x + y for x, y in zip(a, b)))

    def __neg__(self) -> "PolyBranch":
        return PolyBranch(tuple(-c for c in self.exact))

    def __sub__(self, other: "PolyBranch") -> "PolyBranch":
        return self + (-other)

    def __mul__(self, other) -> "PolyBranch":
        if not isinstance(other, PolyBranch):
            return PolyBranch(tuple(c * _to_fraction(other) for c in self.exact))
        out = [Fraction(0)] * (len(self.exact) + len(other.exact) - 1)
        for i, a in enumerate(self.exact):
            for j, b in enumerate(other.exact):
                out[i + j] += a * b
        return PolyBranch(tuple(out))

    __rmul__ = __mul__

    def to_sympy(self) -> sympy.Poly:
        return sympy.Poly(
            [sympy.Rational(c.numerator, c.denominator) for c in reversed(self.exact)],
            _X,
            domain=sympy.QQ,
        )

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.exact)

    def roots_exact(self, lo=None, hi=None, open_lo=True, open_hi=True) -> list:
        """Distinct real roots in the interval, as exact sympy numbers, ascending."""
        return list(_roots_exact(self.exact, lo, hi, open_lo, open_hi))

    def real_roots(self, lo=None, hi=None, open_lo=True, open_hi=True) -> list[float]:
        return [float(r.evalf(30)) for r in self.roots_exact(lo, hi, open_lo, open_hi)]

    def to_json(self) -> dict:
        return {"coeffs": [_fraction_json(c) for c in self.exact]}


def _fraction_json(c: Fraction):
    f = float(c)
    # floats round-trip exactly when the rational is a dyadic double
    if Fraction(f) == c:
        return f
    return f"{c.numerator}/{c.denominator}"


def as_sympy(v):
    """Exact sympy number for a float, Fraction, string or sympy value."""
    if isinstance(v, sympy.Basic):
        return v
    f = _to_fraction(v)
    return sympy.Rational(f.numerator, f.denominator)


def _in_interval(r, lo, hi, open_lo, open_hi) -> bool:
    val = sympy.N(r, 40)
    for bound, is_open, below in ((lo, open_lo, True), (hi, open_hi, False)):
        if bound is None:
            continue
        b = as_sympy(bound)
        if r == b:
            if is_open:
                return False
            continue
        bv = sympy.N(b, 40)
        if (val < bv) if below else (val > bv):
            return False
    return True


@lru_cache(maxsize=4096)
def _roots_exact(exact: tuple, lo, hi, open_lo, open_hi) -> tuple:
    poly = PolyBranch(exact)
    if poly.is_zero():
        raise ValueError("zero polynomial has no isolated roots")
    if poly.degree == 0:
        return ()
    roots = sorted(set(poly.to_sympy().real_roots()), key=lambda r: sympy.N(r, 40))
    return tuple(r for r in roots if _in_interval(r, lo, hi, open_lo, open_hi))


def max_on_interval(p: PolyBranch, lo, hi):
    """Exact maximum of ``p`` on the closed interval [lo, hi] and its argmax.

    Candidates are the endpoints and the real critical points inside; values
    are compared exactly, so the result does not depend on a sampling grid.
    """
    cands = [as_sympy(lo), as_sympy(hi)]
    dp = p.deriv()
    if not dp.is_zero():
        cands += dp.roots_exact(lo, hi)
    sp = p.to_sympy()
    best = max(cands, key=lambda c: sympy.N(sp.eval(c), 40))
    return sp.eval(best), best


def to_number(v):
    """sympy exact value -> Fraction when rational, else float."""
    if isinstance(v, sympy.Rational):
        return Fraction(int(v.p), int(v.q))
    return float(sympy.N(v, 30))

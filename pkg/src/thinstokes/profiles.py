"""Polynomials in the stretched transverse variable and their primitives.

All transverse dependence of the channel expansion lives on the centered
cross-section ``xi in [-1/2, 1/2]``.  Every operator here acts on monomial
coefficients directly, so integrals are exact up to coefficient rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

LOWER = -0.5
UPPER = 0.5


@dataclass(frozen=True)
class TransversePoly:
    """Polynomial ``sum_m coeffs[m] * xi**m`` on the cross-section."""

    coeffs: tuple = field(default=(0.0,))

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        c = P.polytrim(c, 0.0) if c.size else np.zeros(1)
        object.__setattr__(self, "coeffs", tuple(float(v) for v in c))

    @classmethod
    def monomial(cls, m: int, scale: float = 1.0) -> "TransversePoly":
        c = np.zeros(m + 1)
        c[m] = scale
        return cls(c)

    @classmethod
    def constant(cls, value: float) -> "TransversePoly":
        return cls((value,))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.coeffs)

    def __call__(self, xi):
        return P.polyval(xi, self.array)

    def deriv(self, m: int = 1) -> "TransversePoly":
        return TransversePoly(P.polyder(self.array, m))

    def __add__(self, other):
        if not isinstance(other, TransversePoly):
            other = TransversePoly.constant(float(other))
        return TransversePoly(P.polyadd(self.array, other.array))

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, TransversePoly):
            other = TransversePoly.constant(float(other))
        return TransversePoly(P.polysub(self.array, other.array))

    def __neg__(self):
        return TransversePoly(-self.array)

    def __mul__(self, other):
        if isinstance(other, TransversePoly):
            return TransversePoly(P.polymul(self.array, other.array))
        return TransversePoly(self.array * float(other))

    __rmul__ = __mul__


def _primitive(p: TransversePoly) -> np.ndarray:
    # antiderivative vanishing at the lower wall
    c = P.polyint(p.array)
    c[0] -= P.polyval(LOWER, c)
    return c


def d_inv(p: TransversePoly) -> TransversePoly:
    """Antiderivative of ``p`` that vanishes at ``xi = -1/2``."""
    return TransversePoly(_primitive(p))


def mean2(p: TransversePoly) -> float:
    """Exact integral of ``p`` over the cross-section (which has unit width)."""
    c = P.polyint(p.array)
    return float(P.polyval(UPPER, c) - P.polyval(LOWER, c))


def d_inv_tilde(p: TransversePoly) -> TransversePoly:
    """Zero-mean antiderivative of ``p``."""
    q = d_inv(p)
    return q - mean2(q)


def d_inv2(p: TransversePoly) -> TransversePoly:
    """Double antiderivative of ``p`` vanishing at both walls."""
    q = d_inv(d_inv(p))
    top = q(UPPER)
    # subtract (xi + 1/2) * q(1/2)
    return q - TransversePoly((0.5 * top, top))


def n1() -> TransversePoly:
    """Poiseuille profile ``(xi**2 - 1/4) / 2``."""
    return TransversePoly((-0.125, 0.0, 0.5))


def n2() -> TransversePoly:
    """Primitive of :func:`n1` from the lower wall."""
    return d_inv(n1())


def r_constant() -> float:
    """Value at the upper wall of ``D^{-1} D^{-2} (N1 - <N1>)``.

    This constant couples the second-order pressure correction to the
    curvature of the viscosity in the periodic expansion; it equals 1/720.
    """
    g = n1() - mean2(n1())
    return float(d_inv(d_inv2(g))(UPPER))

"""Fields separable in (x1, xi): sums of ``a_m(x1) * xi**m``."""

from __future__ import annotations

import numpy as np

from . import profiles as pr
from .smooth import ZERO, Constant, SmoothFunction1D


def _prune(coeffs):
    coeffs = list(coeffs)
    while coeffs and coeffs[-1].is_zero:
        coeffs.pop()
    return coeffs


class SeparableField:
    """``sum_m coeffs[m](x1) * xi**m`` with exact algebra in ``xi``.

    Storing one coefficient per monomial (rather than arbitrary
    (function, polynomial) pairs) keeps the graph small: every transverse
    operator is a fixed linear map between monomial coefficient lists.
    """

    def __init__(self, coeffs=()):
        self.coeffs = _prune(coeffs)

    @classmethod
    def zero(cls) -> "SeparableField":
        return cls()

    @classmethod
    def product(cls, a: SmoothFunction1D, p: pr.TransversePoly) -> "SeparableField":
        return cls([a * c for c in p.coeffs])

    @property
    def terms(self):
        """Pairs ``(a_m, xi**m)``."""
        return [(a, pr.TransversePoly.monomial(m)) for m, a in enumerate(self.coeffs)]

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    # linear structure ---------------------------------------------------

    def __add__(self, other: "SeparableField") -> "SeparableField":
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + [ZERO] * (n - len(self.coeffs))
        b = other.coeffs + [ZERO] * (n - len(other.coeffs))
        return SeparableField([x + y for x, y in zip(a, b)])

    def __neg__(self):
        return SeparableField([-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, fn):
        """Multiply by a function of x1 (or a scalar)."""
        return SeparableField([c * fn for c in self.coeffs])

    __rmul__ = __mul__

    # operators ----------------------------------------------------------

    def dx1(self, m: int = 1) -> "SeparableField":
        return SeparableField([c.d(m) for c in self.coeffs])

    def dxi(self, m: int = 1) -> "SeparableField":
        out = self
        for _ in range(m):
            out = SeparableField([c * k for k, c in enumerate(out.coeffs)][1:])
        return out

    def _transverse(self, op) -> "SeparableField":
        out = []
        for m, a in enumerate(self.coeffs):
            if a.is_zero:
                continue
            img = op(pr.TransversePoly.monomial(m)).coeffs
            if len(out) < len(img):
                out += [ZERO] * (len(img) - len(out))
            for r, c in enumerate(img):
                if c != 0.0:
                    out[r] = out[r] + a * c
        return SeparableField(out)

    def d_inv(self):
        return self._transverse(pr.d_inv)

    def d_inv_tilde(self):
        return self._transverse(pr.d_inv_tilde)

    def d_inv2(self):
        return self._transverse(pr.d_inv2)

    def mean2(self) -> SmoothFunction1D:
        out = ZERO
        for m, a in enumerate(self.coeffs):
            w = pr.mean2(pr.TransversePoly.monomial(m))
            if w != 0.0:
                out = out + a * w
        return out

    def at(self, xi: float) -> SmoothFunction1D:
        out = ZERO
        for m, a in enumerate(self.coeffs):
            out = out + a * (xi**m)
        return out

    def section(self, x1: float) -> pr.TransversePoly:
        """The transverse polynomial at a fixed x1."""
        if self.is_zero:
            return pr.TransversePoly()
        cache = {}
        return pr.TransversePoly([float(a.jet([x1], 0, cache)[0, 0]) for a in self.coeffs])

    # evaluation ---------------------------------------------------------

    def coefficient_values(self, x1, order: int = 0, cache=None) -> np.ndarray:
        """Array ``(n_terms, order + 1, len(x1))`` of coefficient derivatives."""
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        if cache is None:
            cache = {}
        if self.is_zero:
            return np.zeros((0, order + 1, x1.size))
        return np.array([a.derivatives(x1, order, cache) for a in self.coeffs])

    def evaluate(self, x1, xi, cache=None) -> np.ndarray:
        """Values at paired points (broadcast shapes)."""
        x1, xi = np.broadcast_arrays(np.asarray(x1, float), np.asarray(xi, float))
        if self.is_zero:
            return np.zeros(x1.shape)
        ux, inv = np.unique(x1.ravel(), return_inverse=True)
        vals = self.coefficient_values(ux, 0, cache)[:, 0, :][:, inv]
        xr = xi.ravel()
        out = np.zeros(xr.shape)
        for m in range(vals.shape[0] - 1, -1, -1):
            out = out * xr + vals[m]
        return out.reshape(x1.shape)

    def __repr__(self):
        return f"SeparableField(degree={self.degree})"


def constant_field(value: float) -> SeparableField:
    return SeparableField([Constant(value)])

"""Smooth scalar functions of the longitudinal variable with exact derivatives.

Functions are nodes of an expression graph.  Evaluation propagates truncated
Taylor jets (normalized coefficients ``f^(i)(x) / i!``) through the graph, so
derivatives of any order are exact up to rounding for analytic inputs.
Primitives are computed once on a composite Gauss-Legendre table and then
reused, which keeps nested primitives (pressure of level j inside the data of
level j + 2) cheap to evaluate.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import make_interp_spline


class OrderOverflow(ValueError):
    """Raised when more derivatives are requested than a function supplies."""


# ---------------------------------------------------------------------------
# jet algebra on arrays of shape (n + 1, m)


def jet_mul(a, b):
    n = a.shape[0] - 1
    c = np.zeros_like(a)
    for k in range(n + 1):
        c[k] = np.einsum("im,im->m", a[: k + 1], b[k::-1])
    return c


def jet_recip(a):
    n = a.shape[0] - 1
    b = np.zeros_like(a)
    b[0] = 1.0 / a[0]
    for k in range(1, n + 1):
        b[k] = -np.einsum("im,im->m", a[1 : k + 1], b[k - 1 :: -1]) * b[0]
    return b


def jet_exp(a):
    n = a.shape[0] - 1
    b = np.zeros_like(a)
    b[0] = np.exp(a[0])
    for k in range(1, n + 1):
        i = np.arange(1, k + 1)[:, None]
        b[k] = np.sum(i * a[1 : k + 1] * b[k - 1 :: -1], axis=0) / k
    return b


def jet_log(a):
    n = a.shape[0] - 1
    b = np.zeros_like(a)
    b[0] = np.log(a[0])
    for k in range(1, n + 1):
        acc = a[k].copy()
        for i in range(1, k):
            acc -= i * b[i] * a[k - i] / k
        b[k] = acc / a[0]
    return b


def jet_pow(a, r):
    n = a.shape[0] - 1
    b = np.zeros_like(a)
    b[0] = a[0] ** r
    for k in range(1, n + 1):
        acc = np.zeros_like(a[0])
        for i in range(1, k + 1):
            acc += ((r + 1.0) * i - k) * a[i] * b[k - i]
        b[k] = acc / (k * a[0])
    return b


def jet_sincos(a):
    n = a.shape[0] - 1
    s = np.zeros_like(a)
    c = np.zeros_like(a)
    s[0] = np.sin(a[0])
    c[0] = np.cos(a[0])
    for k in range(1, n + 1):
        i = np.arange(1, k + 1)[:, None]
        s[k] = np.sum(i * a[1 : k + 1] * c[k - 1 :: -1], axis=0) / k
        c[k] = -np.sum(i * a[1 : k + 1] * s[k - 1 :: -1], axis=0) / k
    return s, c


def _bump_jet(t):
    # jet of exp(-1/t) for t > 0, zero elsewhere
    pos = t[0] > 0.0
    safe = t.copy()
    safe[:, ~pos] = 0.0
    safe[0, ~pos] = 1.0
    out = jet_exp(-jet_recip(safe))
    out[:, ~pos] = 0.0
    return out


def jet_smoothstep(t):
    """Jet of the C-infinity step ``phi(t) / (phi(t) + phi(1 - t))``."""
    one_minus = -t
    one_minus[0] = 1.0 - t[0]
    a = _bump_jet(t)
    b = _bump_jet(one_minus)
    return jet_mul(a, jet_recip(a + b))


def smoothstep_values(t):
    """Values of the C-infinity step on plain arrays."""
    t = np.asarray(t, dtype=float)
    jet = jet_smoothstep(t[None, ...].reshape(1, -1))
    return jet[0].reshape(t.shape)


# ---------------------------------------------------------------------------
# graph nodes


def _scalar_like(v):
    return isinstance(v, (SmoothFunction1D, int, float, np.floating, np.integer))


def _as_function(v):
    if isinstance(v, SmoothFunction1D):
        return v
    return Constant(float(v))


class SmoothFunction1D:
    """Scalar function of one variable exposing derivatives of every order.

    Subclasses implement ``_jet(x, n, cache)``.  ``cache`` maps node ids to
    already computed jets at the same abscissae so shared subgraphs are
    evaluated once per call.
    """

    periodic = False

    @property
    def max_order(self) -> float:
        return math.inf

    def jet(self, x, n: int, cache=None) -> np.ndarray:
        """Normalized Taylor coefficients up to order ``n`` at ``x``."""
        if n > self.max_order:
            raise OrderOverflow(
                f"{n} derivatives requested, only {self.max_order} available"
            )
        if cache is None:
            cache = {}
        hit = cache.get(id(self))
        if hit is not None and hit.shape[0] > n:
            return hit[: n + 1]
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = self._jet(x, n, cache)
        cache[id(self)] = out
        return out

    def derivatives(self, x, n: int, cache=None) -> np.ndarray:
        """Array of f, f', ..., f^(n) at ``x`` (shape ``(n + 1, len(x))``)."""
        j = self.jet(x, n, cache)
        fac = np.array([math.factorial(i) for i in range(n + 1)], dtype=float)
        return j * fac[:, None]

    def eval_deriv(self, x, m: int = 0):
        x_arr = np.asarray(x, dtype=float)
        out = self.derivatives(x_arr.ravel(), m)[m]
        return out.reshape(x_arr.shape) if x_arr.ndim else float(out[0])

    def __call__(self, x):
        return self.eval_deriv(x, 0)

    # structural helpers -------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return False

    def d(self, m: int = 1) -> "SmoothFunction1D":
        if m == 0:
            return self
        return Derivative(self, m)

    def primitive(self, lo: float = 0.0, hi: float = 1.0) -> "SmoothFunction1D":
        """Antiderivative vanishing at ``lo``; tabulated on ``[lo, hi]``."""
        if self.is_zero:
            return ZERO
        return Primitive(self, lo, hi)

    def integral(self, lo: float = 0.0, hi: float = 1.0) -> float:
        if self.is_zero:
            return 0.0
        return float(Primitive(self, lo, hi)(hi))

    def affine(self, scale: float, shift: float) -> "SmoothFunction1D":
        """The function ``x -> f(scale * x + shift)``."""
        return Affine(self, scale, shift)

    # arithmetic ---------------------------------------------------------
    # Foreign operands (e.g. separable fields) get a chance to handle the
    # operation from the right.

    def __add__(self, other):
        if not _scalar_like(other):
            return NotImplemented
        other = _as_function(other)
        if other.is_zero:
            return self
        if self.is_zero:
            return other
        if isinstance(self, Constant) and isinstance(other, Constant):
            return Constant(self.value + other.value)
        return Sum(self, other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        if not _scalar_like(other):
            return NotImplemented
        other = _as_function(other)
        if other.is_zero:
            return self
        if isinstance(self, Constant) and isinstance(other, Constant):
            return Constant(self.value - other.value)
        if self.is_zero:
            return -other
        return Sum(self, other, -1.0)

    def __rsub__(self, other):
        return _as_function(other) - self

    def __neg__(self):
        return self * -1.0

    def __mul__(self, other):
        if not _scalar_like(other):
            return NotImplemented
        other = _as_function(other)
        if self.is_zero or other.is_zero:
            return ZERO
        if isinstance(other, Constant):
            if other.value == 1.0:
                return self
            if isinstance(self, Constant):
                return Constant(self.value * other.value)
            return Scaled(self, other.value)
        if isinstance(self, Constant):
            return other * self
        return Product(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not _scalar_like(other):
            return NotImplemented
        other = _as_function(other)
        if isinstance(other, Constant):
            return self * (1.0 / other.value)
        return self * Reciprocal(other)

    def __rtruediv__(self, other):
        return _as_function(other) / self

    def __pow__(self, r):
        if isinstance(r, SmoothFunction1D):
            if isinstance(r, Constant):
                r = r.value
            else:
                return exp(r * log(self))
        r = float(r)
        if r == 0.0:
            return ONE
        if r == 1.0:
            return self
        if r.is_integer() and 1 < r <= 4:
            out = self
            for _ in range(int(r) - 1):
                out = out * self
            return out
        return Power(self, r)


class Constant(SmoothFunction1D):
    def __init__(self, value: float):
        self.value = float(value)

    @property
    def is_zero(self) -> bool:
        return self.value == 0.0

    def _jet(self, x, n, cache):
        out = np.zeros((n + 1, x.size))
        out[0] = self.value
        return out

    def d(self, m: int = 1):
        return self if m == 0 else ZERO

    def __repr__(self):
        return f"Constant({self.value!r})"


ZERO = Constant(0.0)
ONE = Constant(1.0)


class Identity(SmoothFunction1D):
    def _jet(self, x, n, cache):
        out = np.zeros((n + 1, x.size))
        out[0] = x
        if n >= 1:
            out[1] = 1.0
        return out


X = Identity()


class _Composite(SmoothFunction1D):
    children: tuple = ()

    @property
    def max_order(self):
        return min((c.max_order for c in self.children), default=math.inf)

    @property
    def periodic(self):
        return all(c.periodic or isinstance(c, Constant) for c in self.children)


class Sum(_Composite):
    def __init__(self, a, b, sign):
        self.children = (a, b)
        self.sign = sign

    def _jet(self, x, n, cache):
        a, b = self.children
        return a.jet(x, n, cache) + self.sign * b.jet(x, n, cache)


class Scaled(_Composite):
    def __init__(self, a, c):
        self.children = (a,)
        self.c = c

    def _jet(self, x, n, cache):
        return self.c * self.children[0].jet(x, n, cache)


class Product(_Composite):
    def __init__(self, a, b):
        self.children = (a, b)

    def _jet(self, x, n, cache):
        a, b = self.children
        return jet_mul(a.jet(x, n, cache), b.jet(x, n, cache))


class Reciprocal(_Composite):
    def __init__(self, a):
        self.children = (a,)

    def _jet(self, x, n, cache):
        return jet_recip(self.children[0].jet(x, n, cache))


class Power(_Composite):
    def __init__(self, a, r):
        self.children = (a,)
        self.r = r

    def _jet(self, x, n, cache):
        return jet_pow(self.children[0].jet(x, n, cache), self.r)


class Unary(_Composite):
    def __init__(self, name, a):
        self.children = (a,)
        self.name = name

    def _jet(self, x, n, cache):
        a = self.children[0].jet(x, n, cache)
        if self.name == "exp":
            return jet_exp(a)
        if self.name == "log":
            return jet_log(a)
        if self.name == "sqrt":
            return jet_pow(a, 0.5)
        if self.name == "smoothstep":
            return jet_smoothstep(a)
        s, c = jet_sincos(a)
        return s if self.name == "sin" else c


def _unary(name):
    def build(a):
        a = _as_function(a)
        if isinstance(a, Constant):
            return Constant(float(Unary(name, a)(0.0)))
        return Unary(name, a)

    build.__name__ = name
    return build


sin = _unary("sin")
cos = _unary("cos")
exp = _unary("exp")
log = _unary("log")
sqrt = _unary("sqrt")


def smoothstep(a: float, b: float, arg=X) -> SmoothFunction1D:
    """C-infinity transition from 0 (``arg <= a``) to 1 (``arg >= b``)."""
    if not b > a:
        raise ValueError("smoothstep needs a < b")
    return _unary("smoothstep")((_as_function(arg) - a) / (b - a))


class Derivative(_Composite):
    def __init__(self, a, m):
        if isinstance(a, Derivative):
            m += a.m
            a = a.children[0]
        self.children = (a,)
        self.m = m

    @property
    def max_order(self):
        return self.children[0].max_order - self.m

    def _jet(self, x, n, cache):
        m = self.m
        base = self.children[0].jet(x, n + m, cache)
        i = np.arange(n + 1)
        fac = np.array([math.factorial(k + m) / math.factorial(k) for k in i])
        return base[m:] * fac[:, None]


class Affine(_Composite):
    def __init__(self, a, scale, shift):
        self.children = (a,)
        self.scale = float(scale)
        self.shift = float(shift)

    @property
    def periodic(self):
        return False

    def _jet(self, x, n, cache):
        # the inner cache is keyed to different abscissae
        base = self.children[0].jet(self.scale * x + self.shift, n, {})
        return base * (self.scale ** np.arange(n + 1))[:, None]


_GL_ORDER = 16
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)


class Primitive(_Composite):
    """``F(x) = int_lo^x f``, tabulated on uniform Gauss-Legendre panels.

    The panel count doubles until the cumulative table is stable to 1e-14
    relative to the integrand scale.
    """

    def __init__(self, f, lo=0.0, hi=1.0, tol=1e-14, max_panels=4096):
        self.children = (f,)
        self.lo = float(lo)
        self.hi = float(hi)
        self.tol = tol
        self.max_panels = max_panels
        self._table = None

    @property
    def periodic(self):
        return False

    def _panel_integrals(self, npan):
        edges = np.linspace(self.lo, self.hi, npan + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        vals = self.children[0](pts.ravel()).reshape(pts.shape)
        return half * (vals @ _GL_WEIGHTS), np.max(np.abs(vals))

    def _build(self):
        npan = 8
        pan, scale = self._panel_integrals(npan)
        cum = np.concatenate(([0.0], np.cumsum(pan)))
        while True:
            fine, scale = self._panel_integrals(2 * npan)
            cum_f = np.concatenate(([0.0], np.cumsum(fine)))
            err = np.max(np.abs(cum_f[::2] - cum))
            npan *= 2
            cum = cum_f
            if err <= self.tol * max(scale * (self.hi - self.lo), 1e-300):
                break
            if npan >= self.max_panels:
                break
        self._table = (np.linspace(self.lo, self.hi, npan + 1), cum)

    def values(self, x):
        if self._table is None:
            self._build()
        edges, cum = self._table
        npan = edges.size - 1
        idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, npan - 1)
        start = edges[idx]
        half = 0.5 * (x - start)
        pts = (start + half)[:, None] + half[:, None] * _GL_NODES[None, :]
        vals = self.children[0](pts.ravel()).reshape(pts.shape)
        return cum[idx] + half * (vals @ _GL_WEIGHTS)

    def _jet(self, x, n, cache):
        out = np.zeros((n + 1, x.size))
        out[0] = self.values(x)
        if n >= 1:
            inner = self.children[0].jet(x, n - 1, cache)
            out[1:] = inner / np.arange(1, n + 1)[:, None]
        return out


class Sampled(SmoothFunction1D):
    """Quintic interpolating spline through samples; five derivatives."""

    def __init__(self, x, y, periodic: bool = False):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        bc = "periodic" if periodic else None
        if periodic:
            y = y.copy()
            y[-1] = y[0]
        self._spl = make_interp_spline(x, y, k=5, bc_type=bc)
        self._derivs = [self._spl] + [self._spl.derivative(i) for i in range(1, 6)]
        self.periodic = periodic

    @property
    def max_order(self):
        return 5

    def _jet(self, x, n, cache):
        fac = np.array([math.factorial(i) for i in range(n + 1)], dtype=float)
        return np.array([self._derivs[i](x) for i in range(n + 1)]) / fac[:, None]


def mean(f: SmoothFunction1D, lo: float = 0.0, hi: float = 1.0) -> float:
    """Average of ``f`` over ``[lo, hi]``."""
    return f.integral(lo, hi) / (hi - lo)

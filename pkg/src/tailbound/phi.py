"""Young-Orlicz generating functions and their one-dimensional Legendre conjugates.

A Young-Orlicz function is an even, convex function with ``phi(0) = phi'(0) = 0``
and ``0 < phi''(0) < inf``, defined on ``|lam| < lambda0`` (``lambda0`` may be
infinite).  Outside the domain the function is taken to be ``+inf``.

The conjugate ``nu(x) = sup_{|lam| <= lambda0} (lam * x - phi(lam))`` is the
exponent of every Chernoff-type tail bound in the package.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union

import numpy as np
from scipy.optimize import brentq

ArrayLike = Union[float, np.ndarray]

LAMBDA_CAP = 1e6
POWER_REGULARIZER = 1e-8


class PhiError(ValueError):
    """Raised when a generating function violates the Young-Orlicz requirements."""


@dataclass(frozen=True)
class ConjugateResult:
    """Value of a conjugate together with where the supremum was reached.

    ``argmax_lambda`` is a float for the scalar transform and an array for the
    multivariate one.  ``lower_estimate`` marks results that are only guaranteed
    to be below the true supremum (non-converged ascent, empirical models).
    """

    value: float
    argmax_lambda: Any
    attained_at_boundary: bool = False
    converged: bool = True
    lower_estimate: bool = False


def _numeric_deriv(f: Callable[[np.ndarray], np.ndarray], lam: float, lambda0: float) -> float:
    h = 1e-6 * max(1.0, abs(lam))
    if abs(lam) + h < lambda0:
        return float((f(np.array(lam + h)) - f(np.array(lam - h))) / (2 * h))
    # one-sided near the edge, pointing inwards
    s = math.copysign(1.0, lam)
    return float(s * (f(np.array(lam)) - f(np.array(lam - s * h))) / h)


class PhiFunction:
    """Base class.  Subclasses provide ``_eval`` on ``|lam| <= lambda0``."""

    kind: str = "abstract"
    lambda0: float = math.inf

    # -- evaluation -------------------------------------------------------
    def _eval(self, a: np.ndarray) -> np.ndarray:  # a >= 0, inside domain
        raise NotImplementedError

    def __call__(self, lam: ArrayLike) -> ArrayLike:
        lam = np.asarray(lam, dtype=float)
        a = np.abs(lam)
        inside = a <= self.lambda0
        out = np.full(a.shape, np.inf)
        if np.any(inside):
            vals = np.asarray(self._eval(a[inside]), dtype=float)
            out[inside] = np.where(np.isnan(vals), np.inf, vals)
        return out if out.ndim else float(out)

    def deriv(self, lam: float) -> float:
        return _numeric_deriv(self, float(lam), self.lambda0)

    @property
    def second_deriv_at_zero(self) -> float:
        raise NotImplementedError

    # -- inverse on [0, inf) ----------------------------------------------
    def inverse(self, y: ArrayLike) -> ArrayLike:
        """Smallest ``t >= 0`` with ``phi(t) >= y``.

        Values above ``phi(lambda0)`` map to ``lambda0`` because ``phi`` jumps to
        ``+inf`` there; with an unbounded domain this never happens.
        """
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        out = np.zeros_like(y)
        pos = y > 0
        if np.any(pos):
            out[pos] = self._bisect_inverse(y[pos])
        return float(out[0]) if scalar else out

    def _edge(self) -> float:
        """Largest usable point of the domain (limit from inside)."""
        if math.isinf(self.lambda0):
            return LAMBDA_CAP
        if math.isfinite(self(self.lambda0)):
            return self.lambda0
        return self.lambda0 * (1 - 1e-12)

    def _bisect_inverse(self, y: np.ndarray) -> np.ndarray:
        hi_edge = self._edge()
        ymax = float(np.max(y))
        hi = 1.0
        while hi < hi_edge and self(hi) < ymax:
            hi *= 2.0
        hi = min(hi, hi_edge)
        lo_arr = np.zeros_like(y)
        hi_arr = np.full_like(y, hi)
        for _ in range(200):
            mid = 0.5 * (lo_arr + hi_arr)
            below = np.asarray(self(mid)) < y
            lo_arr = np.where(below, mid, lo_arr)
            hi_arr = np.where(below, hi_arr, mid)
            if np.all(hi_arr - lo_arr <= 4e-16 * np.maximum(hi_arr, 1e-300)):
                break
        return hi_arr

    # -- conjugate helpers --------------------------------------------------
    def _closed_conjugate(self, a: float) -> Optional[ConjugateResult]:
        return None

    def validate(self) -> "PhiFunction":
        """Check the Young-Orlicz invariants on a sampled grid; return self."""
        d2 = self.second_deriv_at_zero
        if not (math.isfinite(d2) and d2 > 0):
            raise PhiError(f"phi''(0) must be positive and finite, got {d2!r}")
        tol0 = 1e-12 if self.kind in ("quadratic", "power") else 1e-6
        if abs(self(0.0)) > tol0:
            raise PhiError("phi(0) must vanish")
        if abs(self.deriv(0.0)) > tol0:
            raise PhiError("phi'(0) must vanish")
        span = 0.999 * self.lambda0 if math.isfinite(self.lambda0) else 10.0
        grid = np.linspace(-span, span, 401)
        vals = np.asarray(self(grid))
        if not np.all(np.isfinite(vals)):
            raise PhiError("phi must be finite inside its domain")
        if not np.allclose(vals, vals[::-1], rtol=1e-12, atol=1e-12):
            raise PhiError("phi must be even")
        second = vals[:-2] - 2 * vals[1:-1] + vals[2:]
        if np.any(second < -1e-9 * np.maximum(1.0, np.abs(vals[1:-1]))):
            raise PhiError("phi must be convex")
        return self


@dataclass(frozen=True)
class QuadraticPhi(PhiFunction):
    """``phi(lam) = lam**2 / 2``, the subgaussian generator."""

    lambda0: float = math.inf
    kind: str = field(default="quadratic", init=False)

    def _eval(self, a):
        return 0.5 * a * a

    def deriv(self, lam):
        return float(lam)

    @property
    def second_deriv_at_zero(self):
        return 1.0

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        t = np.sqrt(2.0 * np.maximum(y, 0.0))
        t = np.minimum(t, self.lambda0)
        return float(t) if t.ndim == 0 else t

    def _closed_conjugate(self, a):
        if a <= self.lambda0:
            return ConjugateResult(0.5 * a * a, a, False)
        l0 = self.lambda0
        return ConjugateResult(l0 * a - 0.5 * l0 * l0, l0, True)


@dataclass(frozen=True)
class PowerPhi(PhiFunction):
    """``phi(lam) = |lam|**m / m``, plus ``eta * lam**2`` when ``m > 2``.

    The quadratic term keeps ``phi''(0)`` positive; for ``m > 2`` the pure power
    would be flat at the origin.
    """

    m: float = 4.0
    eta: float = POWER_REGULARIZER
    lambda0: float = math.inf
    kind: str = field(default="power", init=False)

    def __post_init__(self):
        if not self.m > 1:
            raise PhiError(f"power exponent must exceed 1, got {self.m}")
        if self.m < 2:
            # phi''(0) = +inf for 1 < m < 2
            raise PhiError(f"power exponent {self.m} < 2 has infinite phi''(0)")
        if self.m > 2 and not self.eta > 0:
            raise PhiError("power kinds with m > 2 need a positive regularizer eta")

    @property
    def _eta(self) -> float:
        return self.eta if self.m > 2 else 0.0

    def _eval(self, a):
        return a**self.m / self.m + self._eta * a * a

    def deriv(self, lam):
        lam = float(lam)
        return math.copysign(abs(lam) ** (self.m - 1), lam) + 2 * self._eta * lam

    @property
    def second_deriv_at_zero(self):
        return 1.0 if self.m == 2 else 2 * self._eta


@dataclass(frozen=True, eq=False)
class TabulatedPhi(PhiFunction):
    """Piecewise-linear generator through knots ``(lambdas[k], values[k])``.

    Knots are given on ``[0, lambda0]`` starting at 0 and extended evenly; a
    symmetric grid with negative knots is accepted too.  The conjugate is the
    exact conjugate of the interpolant (a max over knots).
    """

    lambdas: np.ndarray
    values: np.ndarray
    kind: str = field(default="tabulated", init=False)

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        val = np.asarray(self.values, dtype=float)
        if lam.shape != val.shape or lam.ndim != 1:
            raise PhiError("tabulated lambdas and values must be 1-d and equal length")
        if np.any(lam < 0):
            order = np.argsort(lam)
            lam, val = lam[order], val[order]
            if not (np.allclose(lam, -lam[::-1]) and np.allclose(val, val[::-1])):
                raise PhiError("tabulated grid with negative knots must be symmetric")
            keep = lam >= 0
            lam, val = lam[keep], val[keep]
        if lam.size < 3 or lam[0] != 0.0:
            raise PhiError("tabulated grid needs at least 3 knots starting at 0")
        if np.any(np.diff(lam) <= 0):
            raise PhiError("tabulated knots must be strictly increasing in |lambda|")
        if val[0] != 0.0 or not np.all(np.isfinite(val)):
            raise PhiError("tabulated values must be finite with phi(0) = 0")
        slopes = np.diff(val) / np.diff(lam)
        if slopes[0] <= 0 or np.any(np.diff(slopes) < -1e-12 * np.maximum(1, np.abs(slopes[1:]))):
            raise PhiError("tabulated data is not convex-consistent")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "lambda0", float(lam[-1]))

    def _eval(self, a):
        return np.interp(a, self.lambdas, self.values)

    @property
    def second_deriv_at_zero(self):
        return 2.0 * self.values[1] / self.lambdas[1] ** 2

    def _closed_conjugate(self, a):
        scores = a * self.lambdas - self.values
        k = int(np.argmax(scores))
        return ConjugateResult(max(float(scores[k]), 0.0), float(self.lambdas[k]),
                               k == self.lambdas.size - 1)


@dataclass(frozen=True, eq=False)
class NaturalPhi(PhiFunction):
    """``phi(lam) = max(ln E e^{lam xi}, ln E e^{-lam xi})`` for a centered model."""

    model: Any
    kind: str = field(default="natural", init=False)

    def __post_init__(self):
        object.__setattr__(self, "lambda0", float(self.model.radius))

    def _eval(self, a):
        f = self.model.log_mgf
        return np.maximum(f(a), f(-a))

    def deriv(self, lam):
        lam = float(lam)
        if lam == 0.0:
            return 0.0
        f = self.model.log_mgf
        if abs(lam) >= self.lambda0:
            return math.inf
        if f(lam) >= f(-lam):
            return float(self.model.dlog_mgf(lam))
        return float(-self.model.dlog_mgf(-lam))

    @property
    def second_deriv_at_zero(self):
        return float(self.model.variance)


def build_phi(spec: Union[dict, PhiFunction, str]) -> PhiFunction:
    """Construct and validate a generator from a descriptor.

    Accepted descriptors::

        "quadratic" | {"kind": "quadratic", "lambda0": 1.0}
        {"kind": "power", "m": 4, "eta": 1e-8}
        {"kind": "tabulated", "lambdas": [...], "values": [...]}
        {"kind": "natural", "model": <MgfModel>}
    """
    if isinstance(spec, PhiFunction):
        return spec.validate()
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = spec.pop("kind", None)
    lambda0 = float(spec.pop("lambda0", math.inf))
    if not lambda0 > 0:
        raise PhiError("lambda0 must be positive")
    if kind == "quadratic":
        phi: PhiFunction = QuadraticPhi(lambda0=lambda0)
    elif kind == "power":
        phi = PowerPhi(m=float(spec.pop("m")), eta=float(spec.pop("eta", POWER_REGULARIZER)),
                       lambda0=lambda0)
    elif kind == "tabulated":
        phi = TabulatedPhi(np.asarray(spec.pop("lambdas")), np.asarray(spec.pop("values")))
    elif kind == "natural":
        phi = NaturalPhi(spec.pop("model"))
    else:
        raise PhiError(f"unknown phi kind {kind!r}")
    if spec:
        raise PhiError(f"unexpected phi fields: {sorted(spec)}")
    return phi.validate()


def legendre_1d(phi: PhiFunction, x: float, method: str = "auto") -> ConjugateResult:
    """Young-Fenchel transform ``nu(x) = sup_{|lam| <= lambda0} (lam x - phi(lam))``.

    ``method="auto"`` uses a closed form when the generator has one;
    ``method="numeric"`` always solves ``phi'(lam) = |x|`` by bracketed root
    finding (``phi'`` is monotone by convexity).  When the domain is unbounded
    the search stops at ``LAMBDA_CAP`` and reports a divergent supremum beyond it.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"conjugate argument must be finite, got {x}")
    if x == 0.0:
        return ConjugateResult(0.0, 0.0, False)
    a, s = abs(x), math.copysign(1.0, x)

    res = phi._closed_conjugate(a) if method == "auto" else None
    if res is None and isinstance(phi, TabulatedPhi):
        res = phi._closed_conjugate(a)
    if res is None:
        res = _numeric_conjugate(phi, a)
    return ConjugateResult(res.value, s * res.argmax_lambda, res.attained_at_boundary)


def _numeric_conjugate(phi: PhiFunction, a: float) -> ConjugateResult:
    edge = phi._edge()
    if phi.deriv(edge) <= a:
        if math.isinf(phi.lambda0):
            # slope a is approached only asymptotically: finite iff the objective levels off
            g = lambda t: t * a - float(phi(t))
            top, half = g(edge), g(0.5 * edge)
            if math.isfinite(top) and top - half <= 1e-9 * max(1.0, abs(top)):
                return ConjugateResult(max(top, 0.0), math.inf, True)
            return ConjugateResult(math.inf, math.inf, True)
        return ConjugateResult(max(edge * a - float(phi(edge)), 0.0), edge, True)
    hi = 1.0
    while hi < edge and phi.deriv(hi) < a:
        hi *= 2.0
    hi = min(hi, edge)
    lam = brentq(lambda t: phi.deriv(t) - a, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                 maxiter=500)
    return ConjugateResult(max(lam * a - float(phi(lam)), 0.0), lam, False)


def conjugate_inverse(phi: PhiFunction, y: float) -> float:
    """Smallest ``t >= 0`` with ``nu(t) >= y`` (``nu`` is nondecreasing on ``[0, inf)``)."""
    y = float(y)
    if y <= 0:
        return 0.0
    nu = lambda t: legendre_1d(phi, t).value
    hi = 1.0
    while nu(hi) < y:
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    return brentq(lambda t: nu(t) - y, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)

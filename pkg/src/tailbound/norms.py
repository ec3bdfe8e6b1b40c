"""Scalar MGF models, B(phi) norms, natural functions and subgaussian helpers.

For a centered variable ``xi`` and a generator ``phi`` the B(phi) norm is the
smallest ``tau`` with ``E exp(+-lam xi) <= exp(phi(lam tau))`` on the domain of
``phi``.  Because ``phi`` increases on ``[0, inf)`` this equals

    sup_{lam != 0}  phi^{-1}( max(ln E e^{lam xi}, ln E e^{-lam xi}) ) / |lam|

and the ``lam -> 0`` limit of the ratio is ``sqrt(Var xi / phi''(0))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .phi import NaturalPhi, PhiFunction, legendre_1d

LOG_OVERFLOW = math.log(1e300)
GRID_PER_DECADE = 2048
GRID_LO = 1e-4
GRID_HI = 1e4


class ModelError(ValueError):
    """Raised for invalid or non-centered MGF models."""


def log_cosh(x):
    """Numerically stable ``ln cosh x`` (accurate both near 0 and for large |x|)."""
    x = np.abs(np.asarray(x, dtype=float))
    small = x < 1.0
    out = np.empty_like(x)
    xs = x[small]
    out[small] = np.log1p(2.0 * np.sinh(0.5 * xs) ** 2)
    xl = x[~small]
    out[~small] = xl + np.log1p(np.exp(-2.0 * xl)) - math.log(2.0)
    return out if out.ndim else float(out)


class MgfModel:
    """One-dimensional log-MGF source.

    Subclasses implement ``_log_mgf`` for ``|lam| <= radius``; outside the
    radius ``log_mgf`` returns ``+inf``.
    """

    kind = "abstract"
    radius: float = math.inf
    lower_estimate_only = False
    symmetric = False  # log_mgf(-lam) == log_mgf(lam)

    def _log_mgf(self, lam: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_mgf(self, lam):
        lam = np.asarray(lam, dtype=float)
        if math.isinf(self.radius):
            out = np.asarray(self._log_mgf(lam), dtype=float)
            out = np.where(np.isnan(out), np.inf, out)
            return out if out.ndim else float(out)
        out = np.full(lam.shape, np.inf)
        inside = np.abs(lam) <= self.radius
        if np.any(inside):
            vals = np.asarray(self._log_mgf(lam[inside]), dtype=float)
            out[inside] = np.where(np.isnan(vals), np.inf, vals)
        return out if out.ndim else float(out)

    def dlog_mgf(self, lam: float) -> float:
        lam = float(lam)
        h = 1e-6 * max(1.0, abs(lam))
        if abs(lam) + h <= self.radius:
            return float((self.log_mgf(lam + h) - self.log_mgf(lam - h)) / (2 * h))
        s = math.copysign(1.0, lam)
        return float(s * (self.log_mgf(lam) - self.log_mgf(lam - s * h)) / h)

    @property
    def variance(self) -> float:
        raise NotImplementedError

    def scaled(self, c: float) -> "MgfModel":
        """Model of ``c * xi`` for ``c > 0``."""
        if not c > 0:
            raise ModelError("scale must be positive")
        base = self
        return CustomMgf(lambda lam: base.log_mgf(c * np.asarray(lam)),
                         radius=self.radius / c, variance=c * c * self.variance,
                         dlog=lambda lam: c * base.dlog_mgf(c * lam),
                         lower_estimate_only=self.lower_estimate_only, symmetric=self.symmetric)


@dataclass(frozen=True)
class GaussianMgf(MgfModel):
    sigma: float = 1.0

    kind = "analytic-gaussian"
    symmetric = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise ModelError("gaussian sigma must be positive")

    def _log_mgf(self, lam):
        return 0.5 * self.sigma**2 * lam * lam

    def dlog_mgf(self, lam):
        return self.sigma**2 * float(lam)

    @property
    def variance(self):
        return self.sigma**2

    def scaled(self, c):
        return GaussianMgf(self.sigma * c)


@dataclass(frozen=True)
class RademacherMgf(MgfModel):
    kind = "analytic-rademacher"
    symmetric = True

    def _log_mgf(self, lam):
        return log_cosh(lam)

    def dlog_mgf(self, lam):
        return math.tanh(float(lam))

    @property
    def variance(self):
        return 1.0


class CustomMgf(MgfModel):
    """User-supplied log-MGF.  The mean is checked to vanish and the function
    is checked for convexity on a sample grid at construction."""

    kind = "analytic-custom"

    def __init__(self, log_mgf: Callable, radius: float = math.inf,
                 variance: Optional[float] = None, dlog: Optional[Callable] = None,
                 lower_estimate_only: bool = False, symmetric: bool = False):
        self._fn = log_mgf
        self.symmetric = symmetric
        self.radius = float(radius)
        if not self.radius > 0:
            raise ModelError("validity radius must be positive")
        self._dlog = dlog
        self.lower_estimate_only = lower_estimate_only
        if abs(float(self._fn(np.array(0.0)))) > 1e-12:
            raise ModelError("log-MGF must vanish at 0")
        h = min(1e-4, 0.01 * self.radius)
        f = lambda t: float(self._fn(np.array(t)))
        mean = (f(h) - f(-h)) / (2 * h)
        if variance is None:
            variance = (f(h) - 2 * f(0.0) + f(-h)) / (h * h)
        self._variance = float(variance)
        if abs(mean) > 1e-6 * max(1.0, math.sqrt(abs(self._variance))):
            raise ModelError(f"model is not centered (mean ~ {mean:.3g})")
        span = 0.99 * self.radius if math.isfinite(self.radius) else 5.0
        grid = np.linspace(-span, span, 201)
        vals = np.asarray(self.log_mgf(grid))
        ok = np.isfinite(vals)
        second = vals[:-2] - 2 * vals[1:-1] + vals[2:]
        fin = ok[:-2] & ok[1:-1] & ok[2:]
        if np.any(second[fin] < -1e-9 * np.maximum(1.0, np.abs(vals[1:-1][fin]))):
            raise ModelError("log-MGF must be convex")
        if symmetric and not np.allclose(vals, vals[::-1], rtol=1e-9, atol=1e-12, equal_nan=True):
            raise ModelError("log-MGF declared symmetric but is not even")

    def _log_mgf(self, lam):
        return self._fn(lam)

    def dlog_mgf(self, lam):
        if self._dlog is not None:
            return float(self._dlog(lam))
        return super().dlog_mgf(lam)

    @property
    def variance(self):
        return self._variance


class EmpiricalMgf(MgfModel):
    """Sample-backed log-MGF ``ln mean(exp(lam * s))`` of centered samples.

    The samples must be consistent with a zero mean (``|mean| <= 3 sd / sqrt(n)``);
    they are then re-centered exactly so that the log-MGF has zero slope at 0.
    Results derived from this model are lower estimates of the true quantities.
    """

    kind = "empirical"
    lower_estimate_only = True

    def __init__(self, samples: Sequence[float], radius: Optional[float] = None):
        s = np.asarray(samples, dtype=float).ravel()
        if s.size < 2:
            raise ModelError("empirical model needs at least 2 samples")
        n = s.size
        m, sd = float(s.mean()), float(s.std(ddof=1))
        if abs(m) > 3 * sd / math.sqrt(n):
            raise ModelError(f"samples are not centered: mean {m:.4g} exceeds 3 sd/sqrt(n)")
        self.samples = s - m
        self.samples.setflags(write=False)
        smax = float(np.max(np.abs(self.samples)))
        if radius is None:
            radius = LOG_OVERFLOW / smax if smax > 0 else math.inf
        self.radius = float(radius)
        self._logn = math.log(n)

    @property
    def n(self) -> int:
        return self.samples.size

    def _log_mgf(self, lam):
        lam = np.asarray(lam, dtype=float)
        flat = lam.ravel()
        out = np.empty(flat.shape)
        # chunk to bound memory for large (grid x samples) products
        step = max(1, 2_000_000 // self.samples.size)
        for i in range(0, flat.size, step):
            out[i:i + step] = logsumexp(np.outer(flat[i:i + step], self.samples), axis=1) - self._logn
        return out.reshape(lam.shape)

    def dlog_mgf(self, lam):
        w = float(lam) * self.samples
        w = np.exp(w - w.max())
        return float(np.dot(w, self.samples) / w.sum())

    @property
    def variance(self):
        return float(np.mean(self.samples**2))

    def scaled(self, c):
        if not c > 0:
            raise ModelError("scale must be positive")
        return EmpiricalMgf(c * self.samples, radius=self.radius / c)


def uniform_mgf(half_width: float = math.sqrt(3.0)) -> CustomMgf:
    """Centered uniform on ``[-a, a]``: ``ln(sinh(a lam) / (a lam))``."""
    a = float(half_width)

    def f(lam):
        z = np.abs(a * np.asarray(lam, dtype=float))
        out = np.empty(z.shape)
        small = z < 1.0
        # sinh(z)/z - 1 as a positive series avoids cancellation near 0
        z2 = z[small] ** 2
        term, series = np.ones_like(z2), np.zeros_like(z2)
        for k in range(1, 12):
            term = term * z2 / ((2 * k) * (2 * k + 1))
            series += term
        out[small] = np.log1p(series)
        zb = z[~small]
        out[~small] = zb + np.log1p(-np.exp(-2 * zb)) - np.log(2 * zb)
        return out if out.ndim else float(out)

    return CustomMgf(f, variance=a * a / 3, symmetric=True)


def independent_sum(a: MgfModel, b: MgfModel) -> CustomMgf:
    """Model of ``xi + eta`` for independent ``xi ~ a`` and ``eta ~ b``."""
    return CustomMgf(lambda lam: a.log_mgf(lam) + b.log_mgf(lam),
                     radius=min(a.radius, b.radius), variance=a.variance + b.variance,
                     dlog=lambda lam: a.dlog_mgf(lam) + b.dlog_mgf(lam),
                     lower_estimate_only=a.lower_estimate_only or b.lower_estimate_only,
                     symmetric=a.symmetric and b.symmetric)


# -- operations ------------------------------------------------------------

@dataclass(frozen=True)
class BphiNormResult:
    tau: float
    sup_achieved_near: float
    zero_limit_component: float
    lower_estimate_only: bool = False


def natural_function(model: MgfModel) -> NaturalPhi:
    """Symmetrised log-MGF of ``model`` as a generator; ``+inf`` beyond its radius."""
    if isinstance(model, EmpiricalMgf) and model.n < 100:
        raise ModelError("natural function of an empirical model needs n >= 100 samples")
    return NaturalPhi(model).validate()


def _lambda_grid(upper: float) -> np.ndarray:
    hi = min(upper, GRID_HI)
    if hi <= GRID_LO:
        return np.geomspace(hi * 1e-8, hi, GRID_PER_DECADE * 8)
    decades = math.log10(hi / GRID_LO)
    return np.geomspace(GRID_LO, hi, max(16, int(math.ceil(decades * GRID_PER_DECADE))))


def bphi_norm(model: MgfModel, phi: PhiFunction) -> BphiNormResult:
    """B(phi) norm of a centered variable; ``tau = inf`` when it is not in B(phi)."""
    floor = math.sqrt(model.variance / phi.second_deriv_at_zero)
    lower = model.lower_estimate_only
    if model.radius < phi.lambda0 and not isinstance(model, EmpiricalMgf):
        # the MGF is infinite for some lam inside phi's domain
        return BphiNormResult(math.inf, model.radius, floor, lower)

    upper = min(model.radius, phi.lambda0)
    if math.isfinite(upper):
        upper *= 1 - 1e-9
    grid = _lambda_grid(upper)

    def ratio(lam):
        lam = np.asarray(lam, dtype=float)
        psi = model.log_mgf(lam)
        if not model.symmetric:
            psi = np.maximum(psi, model.log_mgf(-lam))
        return np.asarray(phi.inverse(psi)) / lam

    r = ratio(grid)
    if not np.all(np.isfinite(r)):
        k = int(np.argmax(~np.isfinite(r)))
        return BphiNormResult(math.inf, float(grid[k]), floor, lower)
    k = int(np.argmax(r))
    best, at = float(r[k]), float(grid[k])
    if 0 < k < grid.size - 1:
        opt = minimize_scalar(lambda t: -float(ratio(t)), bounds=(grid[k - 1], grid[k + 1]),
                              method="bounded", options={"xatol": 1e-12 * grid[k]})
        if -opt.fun > best:
            best, at = float(-opt.fun), float(opt.x)
    if floor >= best:
        return BphiNormResult(floor, 0.0, floor, lower)
    return BphiNormResult(best, at, floor, lower)


def tail_bound_from_norm(phi: PhiFunction, tau: float, x: float) -> float:
    """``P(xi > x) <= exp(-nu(x / tau))`` for ``xi`` with B(phi) norm ``tau``."""
    if not (tau > 0 and x > 0):
        raise ValueError("tau and x must be positive")
    nu = legendre_1d(phi, x / tau).value
    return 0.0 if math.isinf(nu) else min(1.0, math.exp(-nu))


def subgaussian_sum_norm(norms: Sequence[float]) -> float:
    """Subgaussian norm bound for a sum of independent subgaussian variables."""
    v = np.asarray(norms, dtype=float)
    if np.any(v < 0):
        raise ValueError("norms must be nonnegative")
    return float(np.sqrt(np.sum(v * v)))


@dataclass(frozen=True)
class StrictSubgaussianCheck:
    holds: bool
    witness: Optional[float] = None

    def __bool__(self):
        return self.holds


def is_strictly_subgaussian(model: MgfModel, sigma2: float, lambda_grid=None) -> StrictSubgaussianCheck:
    """Check ``ln E exp(+-lam xi) <= sigma2 lam^2 / 2`` on a grid.

    ``lambda_grid`` is an array of positive points or a ``(lo, hi, n)`` tuple;
    the default covers ``[0.01, min(radius, 20)]``.  ``sigma2`` must equal the
    model variance (checked for analytic models).
    """
    if not isinstance(model, EmpiricalMgf) and abs(sigma2 - model.variance) > 1e-6 * max(1.0, sigma2):
        raise ValueError(f"sigma2={sigma2} does not match the model variance {model.variance}")
    if lambda_grid is None:
        lambda_grid = (0.01, min(model.radius * (1 - 1e-9), 20.0), 400)
    if isinstance(lambda_grid, tuple):
        lambda_grid = np.linspace(*lambda_grid)
    lam = np.abs(np.asarray(lambda_grid, dtype=float))
    env = 0.5 * sigma2 * lam * lam
    psi = np.maximum(model.log_mgf(lam), model.log_mgf(-lam))
    bad = psi > env + 1e-12 + 1e-9 * env
    if np.any(bad):
        return StrictSubgaussianCheck(False, float(lam[int(np.argmax(bad))]))
    return StrictSubgaussianCheck(True)

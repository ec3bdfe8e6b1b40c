"""Multivariate MGF conjugation and bounds on ``S(u) = P(min_i xi_i > u)``.

The orthant event ``{xi_i >= x_i for all i}`` is bounded by the Chernoff
argument with nonnegative multipliers:

    P(xi >= x) <= exp(-sup_{lam >= 0} [(lam, x) - ln E exp((lam, xi))]).

Note the conjugate is taken of the *log*-MGF; this is the reading under which
the closed-form bivariate bound ``zeta`` is reproduced exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .max_tail import check_scope
from .norms import LOG_OVERFLOW, MgfModel
from .phi import ConjugateResult

VALUE_CAP = 1e6
N_STARTS = 8


class ConfigurationError(ValueError):
    """Raised when a model and its declared subgaussian parameters disagree."""


class MultivariateMgf:
    """d-dimensional log-MGF ``lam -> ln E exp((lam, xi))``, finite for ``|lam| < epsilon``."""

    kind = "abstract"
    d: int
    epsilon: float = math.inf
    lower_estimate_only = False

    def log_mgf(self, lam) -> np.ndarray:
        """Vectorised over leading axes of ``lam`` (last axis has length d)."""
        raise NotImplementedError

    def grad(self, lam: np.ndarray) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        h = 1e-6 * max(1.0, float(np.max(np.abs(lam))))
        e = np.eye(self.d) * h
        return (self.log_mgf(lam + e) - self.log_mgf(lam - e)) / (2 * h)

    def closed_form_seed(self, x: np.ndarray) -> Optional[np.ndarray]:
        return None


class GaussianMultivariateMgf(MultivariateMgf):
    kind = "analytic-gaussian"

    def __init__(self, cov):
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("covariance must be a symmetric square matrix")
        if np.min(np.linalg.eigvalsh(cov)) < -1e-10:
            raise ValueError("covariance must be positive semidefinite")
        self.cov = cov
        self.d = cov.shape[0]

    def log_mgf(self, lam):
        lam = np.asarray(lam, dtype=float)
        return 0.5 * np.sum((lam @ self.cov) * lam, axis=-1)

    def grad(self, lam):
        return self.cov @ np.asarray(lam, dtype=float)

    def closed_form_seed(self, x):
        try:
            return np.linalg.solve(self.cov, x)
        except np.linalg.LinAlgError:
            return None


class CustomMultivariateMgf(MultivariateMgf):
    kind = "analytic-custom"

    def __init__(self, log_mgf: Callable, d: int, epsilon: float = math.inf,
                 grad: Optional[Callable] = None, lower_estimate_only: bool = False):
        self._fn, self._grad = log_mgf, grad
        self.d, self.epsilon = int(d), float(epsilon)
        self.lower_estimate_only = lower_estimate_only
        if abs(float(self._fn(np.zeros(self.d)))) > 1e-12:
            raise ValueError("log-MGF must vanish at 0")

    def log_mgf(self, lam):
        return np.asarray(self._fn(np.asarray(lam, dtype=float)), dtype=float)

    def grad(self, lam):
        if self._grad is not None:
            return np.asarray(self._grad(np.asarray(lam, dtype=float)), dtype=float)
        return super().grad(lam)


@dataclass(frozen=True)
class HolderWeights:
    q: tuple

    def __post_init__(self):
        q = tuple(float(v) for v in self.q)
        if not all(v >= 1 for v in q):
            raise ValueError("Hoelder exponents must be >= 1")
        if abs(sum(1 / v for v in q) - 1) > 1e-12:
            raise ValueError("Hoelder exponents must satisfy sum(1/q_i) = 1")
        object.__setattr__(self, "q", q)

    @classmethod
    def uniform(cls, d: int) -> "HolderWeights":
        return cls((float(d),) * d)


class HolderProductMgf(MultivariateMgf):
    """Upper envelope ``sum_i ln g_i(q_i lam_i) / q_i`` of the joint log-MGF.

    Valid for any dependence between coordinates; conjugating it gives a weaker
    but still valid orthant bound.
    """

    kind = "holder-product"

    def __init__(self, marginals: Sequence[MgfModel], q: HolderWeights):
        if len(marginals) != len(q.q):
            raise ValueError("one Hoelder exponent per marginal")
        self.marginals, self.q = list(marginals), np.array(q.q)
        self.d = len(self.marginals)
        self.epsilon = min(m.radius / qi for m, qi in zip(self.marginals, self.q))
        self.lower_estimate_only = any(m.lower_estimate_only for m in self.marginals)

    def log_mgf(self, lam):
        lam = np.asarray(lam, dtype=float)
        return sum(np.asarray(m.log_mgf(qi * lam[..., i])) / qi
                   for i, (m, qi) in enumerate(zip(self.marginals, self.q)))

    def grad(self, lam):
        lam = np.asarray(lam, dtype=float)
        return np.array([m.dlog_mgf(qi * lam[i]) for i, (m, qi) in enumerate(zip(self.marginals, self.q))])


class EmpiricalMultivariateMgf(MultivariateMgf):
    kind = "empirical"
    lower_estimate_only = True

    def __init__(self, samples, epsilon: Optional[float] = None):
        s = np.asarray(samples, dtype=float)
        if s.ndim != 2 or s.shape[0] < 2:
            raise ValueError("samples must be an (n, d) matrix with n >= 2")
        self.samples = s
        self.d = s.shape[1]
        rmax = float(np.max(np.linalg.norm(s, axis=1)))
        self.epsilon = float(epsilon) if epsilon is not None else (
            LOG_OVERFLOW / rmax if rmax > 0 else math.inf)
        self._logn = math.log(s.shape[0])

    def log_mgf(self, lam):
        lam = np.asarray(lam, dtype=float)
        flat = lam.reshape(-1, self.d)
        out = logsumexp(flat @ self.samples.T, axis=1) - self._logn
        return out.reshape(lam.shape[:-1])

    def grad(self, lam):
        z = self.samples @ np.asarray(lam, dtype=float)
        w = np.exp(z - z.max())
        return w @ self.samples / w.sum()


def independent_product(marginals: Sequence[MgfModel]) -> CustomMultivariateMgf:
    """Joint log-MGF of independent coordinates: ``sum_i ln g_i(lam_i)``."""
    ms = list(marginals)

    def f(lam):
        lam = np.asarray(lam, dtype=float)
        return sum(np.asarray(m.log_mgf(lam[..., i])) for i, m in enumerate(ms))

    def g(lam):
        return np.array([m.dlog_mgf(lam[i]) for i, m in enumerate(ms)])

    return CustomMultivariateMgf(f, len(ms), epsilon=min(m.radius for m in ms), grad=g,
                                 lower_estimate_only=any(m.lower_estimate_only for m in ms))


# -- operations ------------------------------------------------------------

def mgf_joint_eval(model: MultivariateMgf, lam) -> float:
    """``E exp((lam, xi))``; ``inf`` outside the finiteness radius."""
    lam = np.asarray(lam, dtype=float)
    if np.linalg.norm(lam) >= model.epsilon:
        return math.inf
    return math.exp(float(model.log_mgf(lam)))


def holder_mgf_bound(marginals: Sequence[MgfModel], lam, q: HolderWeights) -> float:
    """``prod_i g_i(lam_i q_i)^{1/q_i}``, an upper bound on the joint MGF."""
    lam = np.asarray(lam, dtype=float)
    total = 0.0
    for m, li, qi in zip(marginals, lam, q.q):
        v = float(m.log_mgf(li * qi))
        if math.isinf(v):
            return math.inf
        total += v / qi
    return math.exp(total)


def _project(lam: np.ndarray, orthant: bool, rad: float) -> np.ndarray:
    if orthant:
        lam = np.maximum(lam, 0.0)
    nrm = float(np.linalg.norm(lam))
    if nrm > rad:
        lam = lam * (rad / nrm)
    return lam


def _starts(model: MultivariateMgf, x: np.ndarray) -> list:
    d = model.d
    s = 0.1 * model.epsilon if math.isfinite(model.epsilon) else 1.0
    diag = np.full(d, s / math.sqrt(d))
    out = [np.zeros(d), diag]
    seed = model.closed_form_seed(x)
    if seed is not None and np.all(np.isfinite(seed)):
        out.append(seed)
    out += [s * e for e in np.eye(d)[:4]]
    for k in (0.5, 2.0, 5.0, 10.0, 20.0):
        out.append(k * diag)
    return out[:N_STARTS]


def _spg_ascent(model, x, lam, orthant, rad, value_cap, max_iter, tol):
    """Spectral projected gradient ascent on the concave ``(lam, x) - L(lam)``."""

    def obj(v):
        val = float(model.log_mgf(v))
        return float(v @ x) - val if math.isfinite(val) else -math.inf

    lam = _project(np.asarray(lam, dtype=float), orthant, rad)
    f = obj(lam)
    if not math.isfinite(f):
        lam = np.zeros_like(lam)
        f = 0.0
    g = x - model.grad(lam)
    alpha = 1.0
    flat = 0
    for _ in range(max_iter):
        if f > value_cap:
            return lam, math.inf, True
        pg = _project(lam + g, orthant, rad) - lam
        pgn = float(np.max(np.abs(pg)))
        if pgn <= tol or (flat >= 20 and pgn <= 1e-7 * max(1.0, float(np.max(np.abs(x))))):
            return lam, f, True
        step = _project(lam + alpha * g, orthant, rad) - lam
        slope = float(g @ step)
        # near the optimum the objective is flat to rounding; let the gradient steer
        noise = 8 * np.finfo(float).eps * max(1.0, abs(f))
        t = 1.0
        while True:
            new = lam + t * step
            fn = obj(new)
            if fn >= f + 1e-4 * t * slope - noise:
                break
            t *= 0.5
            if t < 1e-30:
                return lam, f, False
        flat = flat + 1 if fn <= f + noise else 0
        gn = x - model.grad(new)
        s, y = new - lam, g - gn
        sy = float(s @ y)
        alpha = float(s @ s) / sy if sy > 0 else 1e10
        alpha = min(max(alpha, 1e-12), 1e12)
        lam, f, g = new, fn, gn
    return lam, f, False


def log_mgf_conjugate(model: MultivariateMgf, x, orthant_restricted: bool = True,
                      value_cap: float = VALUE_CAP, max_iter: int = 5000) -> ConjugateResult:
    """``sup_lam [(lam, x) - ln g(lam)]`` over ``lam >= 0`` (or all of R^d).

    Multi-start spectral projected gradient ascent; the best start wins, ties
    going to the lowest start index.  Values above ``value_cap`` are reported as
    a divergent (``inf``) conjugate.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != model.d or not np.all(np.isfinite(x)):
        raise ValueError(f"x must be a finite vector of length {model.d}")
    rad = model.epsilon * (1 - 1e-9) if math.isfinite(model.epsilon) else math.inf
    tol = 1e-11 * max(1.0, float(np.max(np.abs(x))))
    best = None
    for start in _starts(model, x):
        lam, val, conv = _spg_ascent(model, x, start, orthant_restricted, rad,
                                     value_cap, max_iter, tol)
        if best is None or val > best[1]:
            best = (lam, val, conv)
    lam, val, conv = best
    at_edge = math.isfinite(rad) and float(np.linalg.norm(lam)) >= rad * (1 - 1e-9)
    return ConjugateResult(max(val, 0.0), lam, at_edge, conv,
                           (not conv) or model.lower_estimate_only)


def orthant_tail_upper(model: MultivariateMgf, x) -> float:
    """``P(xi_i >= x_i for all i) <= exp(-conj(x))`` for ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("orthant corner must be nonnegative")
    v = log_mgf_conjugate(model, x, orthant_restricted=True).value
    return 0.0 if math.isinf(v) else math.exp(-v)


def min_tail_upper(model: MultivariateMgf, u: float, allow_small_u: bool = False) -> float:
    """``P(min_i xi_i > u) <= exp(-conj(u, ..., u))``."""
    check_scope(u, allow_small_u)
    return orthant_tail_upper(model, np.full(model.d, float(u)))


@dataclass(frozen=True)
class BivariateSubgaussianParams:
    sigma1: float
    sigma2: float
    rho: float

    def __post_init__(self):
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ValueError("sigma1 and sigma2 must be positive")
        if not abs(self.rho) < 1:
            raise ValueError("subgaussian correlation must satisfy |rho| < 1")

    @property
    def cov(self) -> np.ndarray:
        c = self.rho * self.sigma1 * self.sigma2
        return np.array([[self.sigma1**2, c], [c, self.sigma2**2]])


def zeta_bivariate(params: BivariateSubgaussianParams, u: float, allow_small_u: bool = False) -> float:
    """Closed-form bivariate minimum-tail bound ``zeta[sigma1, sigma2, rho](u)``."""
    check_scope(u, allow_small_u)
    s1, s2, r = params.sigma1, params.sigma2, params.rho
    expo = u * u / (2 * (1 - r * r)) * (s1 * s1 + s2 * s2 - 2 * r * s1 * s2) / (s1 * s1 * s2 * s2)
    return math.exp(-expo)


def zeta_is_valid(params: BivariateSubgaussianParams) -> bool:
    """Whether the unconstrained maximiser behind ``zeta`` has nonnegative entries.

    It is proportional to ``(s2 (s2 - rho s1), s1 (s1 - rho s2))``.  When
    ``rho * max(s1, s2) > min(s1, s2)`` it leaves the orthant and ``zeta`` is not
    a Chernoff bound: it can undercut the true minimum tail.
    """
    s1, s2, r = params.sigma1, params.sigma2, params.rho
    return bool(r * s1 <= s2 and r * s2 <= s1)


def check_subgaussian_envelope(params: BivariateSubgaussianParams, model: MultivariateMgf,
                               n_angles: int = 24, n_radii: int = 8) -> None:
    """Spot-check ``ln g(lam) <= lam' C lam / 2`` on a polar grid; raise on failure."""
    if model.d != 2:
        raise ConfigurationError("bivariate parameters need a 2-dimensional model")
    rmax = min(3.0, 0.9 * model.epsilon)
    ang = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
    rad = np.linspace(rmax / n_radii, rmax, n_radii)
    lam = (rad[:, None, None] * np.stack([np.cos(ang), np.sin(ang)], -1)[None]).reshape(-1, 2)
    have = np.asarray(model.log_mgf(lam))
    env = 0.5 * np.einsum("ki,ij,kj->k", lam, params.cov, lam)
    tol = 1e-4 if model.lower_estimate_only else 1e-9
    if np.any(have > env + tol * np.maximum(1.0, env)):
        k = int(np.argmax(have - env))
        raise ConfigurationError(
            f"model log-MGF exceeds the subgaussian envelope at lambda={lam[k].tolist()}")


def min_tail_combined_bivariate(params: BivariateSubgaussianParams, model: MultivariateMgf,
                                u: float, allow_small_u: bool = False) -> float:
    """``min(zeta(u), exp(-conj(u, u)))``.

    ``zeta`` only enters when :func:`zeta_is_valid`; otherwise the orthant
    conjugate bound is returned on its own.
    """
    check_subgaussian_envelope(params, model)
    conj = min_tail_upper(model, u, allow_small_u)
    if not zeta_is_valid(params):
        return conj
    return min(zeta_bivariate(params, u, allow_small_u=True), conj)

"""Concrete centered random vectors: sampling plus their analytic MGFs.

Sampling is chunked.  Chunk ``k`` of a draw with base seed ``s`` uses the
generator ``PCG64(SeedSequence([s, k]))``, so any chunk can be produced
independently and a parallel draw is bit-identical to a sequential one.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .min_tail import (BivariateSubgaussianParams, CustomMultivariateMgf,
                       GaussianMultivariateMgf, MultivariateMgf, independent_product)
from .norms import CustomMgf, GaussianMgf, MgfModel, RademacherMgf, uniform_mgf

CHUNK_SIZE = 1 << 16
BASE_KINDS = ("gaussian", "rademacher", "uniform")
SEED_DERIVATION = "numpy PCG64(SeedSequence([seed, chunk_index])), chunk_size rows per chunk"


def psd_factor(cov: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Lower-triangular ``L`` with ``L L^T = cov`` for a semidefinite ``cov``.

    Zero pivots produce zero columns, so e.g. a rank-one all-ones covariance
    yields identical coordinates.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    if np.min(np.linalg.eigvalsh(cov)) < -tol:
        raise ValueError("covariance is numerically indefinite")
    d = cov.shape[0]
    scale = max(1.0, float(np.max(np.abs(np.diag(cov)))))
    L = np.zeros_like(cov)
    for j in range(d):
        piv = cov[j, j] - L[j, :j] @ L[j, :j]
        if piv <= tol * scale:
            continue
        L[j, j] = math.sqrt(piv)
        for i in range(j + 1, d):
            L[i, j] = (cov[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return L


def default_workers() -> int:
    cap = os.environ.get("TAILBOUND_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


@dataclass(frozen=True, eq=False)
class DistributionSpec:
    """A centered random vector in R^d.

    kinds: ``gaussian`` (``cov``), ``iid-rademacher``, ``iid-scaled`` (``base`` in
    gaussian/rademacher/uniform with per-coordinate ``scales``; uniform is the
    unit-variance uniform) and ``custom-mixture`` (``components``, ``weights``).
    """

    kind: str
    d: int
    cov: Optional[np.ndarray] = None
    base: Optional[str] = None
    scales: Optional[tuple] = None
    components: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if self.kind == "gaussian":
            cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
            if cov.shape != (self.d, self.d):
                raise ValueError("covariance shape does not match d")
            object.__setattr__(self, "cov", cov)
            object.__setattr__(self, "_factor", psd_factor(cov))
        elif self.kind == "iid-scaled":
            if self.base not in BASE_KINDS:
                raise ValueError(f"base must be one of {BASE_KINDS}")
            if self.scales is None or len(self.scales) != self.d or not all(s > 0 for s in self.scales):
                raise ValueError("scales must be d positive numbers")
        elif self.kind == "custom-mixture":
            w = np.asarray(self.weights, dtype=float)
            if len(self.components) == 0 or w.size != len(self.components):
                raise ValueError("mixture needs one weight per component")
            if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
                raise ValueError("mixture weights must be nonnegative and sum to 1")
            if any(c.d != self.d for c in self.components):
                raise ValueError("mixture components must share the dimension")
        elif self.kind != "iid-rademacher":
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    # -- constructors ----------------------------------------------------------
    @classmethod
    def gaussian(cls, cov) -> "DistributionSpec":
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        return cls("gaussian", cov.shape[0], cov=cov)

    @classmethod
    def iid_rademacher(cls, d: int) -> "DistributionSpec":
        return cls("iid-rademacher", int(d))

    @classmethod
    def iid_scaled(cls, base: str, scales: Sequence[float]) -> "DistributionSpec":
        return cls("iid-scaled", len(scales), base=base, scales=tuple(float(s) for s in scales))

    @classmethod
    def mixture(cls, components: Sequence["DistributionSpec"], weights: Sequence[float]) -> "DistributionSpec":
        return cls("custom-mixture", components[0].d, components=tuple(components),
                   weights=tuple(float(w) for w in weights))

    @classmethod
    def from_dict(cls, data: dict) -> "DistributionSpec":
        kind = data["kind"]
        if kind == "gaussian":
            return cls.gaussian(data["cov"])
        if kind == "iid-rademacher":
            return cls.iid_rademacher(data["d"])
        if kind == "iid-scaled":
            return cls.iid_scaled(data["base"], data["scales"])
        if kind == "custom-mixture":
            return cls.mixture([cls.from_dict(c) for c in data["components"]], data["weights"])
        raise ValueError(f"unknown distribution kind {kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "cov": self.cov.tolist()}
        if self.kind == "iid-rademacher":
            return {"kind": "iid-rademacher", "d": self.d}
        if self.kind == "iid-scaled":
            return {"kind": "iid-scaled", "base": self.base, "scales": list(self.scales)}
        return {"kind": "custom-mixture", "components": [c.to_dict() for c in self.components],
                "weights": list(self.weights)}

    # -- analytic MGFs -----------------------------------------------------------
    def _base_scales(self):
        if self.kind == "iid-rademacher":
            return "rademacher", (1.0,) * self.d
        return self.base, self.scales

    def marginal_models(self) -> list:
        if self.kind == "gaussian":
            return [GaussianMgf(math.sqrt(v)) for v in np.diag(self.cov)]
        if self.kind in ("iid-rademacher", "iid-scaled"):
            base, scales = self._base_scales()
            unit = {"gaussian": GaussianMgf(1.0), "rademacher": RademacherMgf(),
                    "uniform": uniform_mgf()}[base]
            return [unit.scaled(s) for s in scales]
        per = [c.marginal_models() for c in self.components]
        logw = np.log(np.asarray(self.weights))
        out = []
        for i in range(self.d):
            ms = [p[i] for p in per]
            out.append(CustomMgf(
                lambda lam, ms=ms: logsumexp([lw + np.asarray(m.log_mgf(lam)) for lw, m in zip(logw, ms)], axis=0),
                radius=min(m.radius for m in ms),
                variance=float(np.dot(self.weights, [m.variance for m in ms]))))
        return out

    def joint_mgf(self) -> MultivariateMgf:
        if self.kind == "gaussian":
            return GaussianMultivariateMgf(self.cov)
        if self.kind in ("iid-rademacher", "iid-scaled"):
            return independent_product(self.marginal_models())
        joints = [c.joint_mgf() for c in self.components]
        logw = np.log(np.asarray(self.weights))

        def f(lam):
            return logsumexp([lw + np.asarray(j.log_mgf(lam)) for lw, j in zip(logw, joints)], axis=0)

        return CustomMultivariateMgf(f, self.d, epsilon=min(j.epsilon for j in joints))

    def subgaussian_params(self) -> Optional[BivariateSubgaussianParams]:
        """Bivariate subgaussian envelope parameters, where they are known exactly."""
        if self.d != 2:
            return None
        if self.kind == "gaussian":
            s1, s2 = math.sqrt(float(self.cov[0, 0])), math.sqrt(float(self.cov[1, 1]))
            if s1 == 0 or s2 == 0:
                return None
            rho = float(self.cov[0, 1]) / (s1 * s2)
            return BivariateSubgaussianParams(s1, s2, rho) if abs(rho) < 1 else None
        if self.kind in ("iid-rademacher", "iid-scaled"):
            # all three bases are strictly subgaussian with unit variance
            _, scales = self._base_scales()
            return BivariateSubgaussianParams(scales[0], scales[1], 0.0)
        return None

    # -- sampling ----------------------------------------------------------------
    def sample_chunk(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal((m, self.d)) @ self._factor.T
        if self.kind in ("iid-rademacher", "iid-scaled"):
            base, scales = self._base_scales()
            if base == "rademacher":
                z = rng.integers(0, 2, size=(m, self.d)).astype(float) * 2.0 - 1.0
            elif base == "gaussian":
                z = rng.standard_normal((m, self.d))
            else:
                z = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=(m, self.d))
            return z * np.asarray(scales)
        comp = rng.choice(len(self.components), size=m, p=np.asarray(self.weights))
        out = np.empty((m, self.d))
        for k, c in enumerate(self.components):
            idx = comp == k
            out[idx] = c.sample_chunk(rng, int(idx.sum()))
        return out


def chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def chunk_sizes(n: int, chunk_size: int = CHUNK_SIZE) -> list:
    return [min(chunk_size, n - s) for s in range(0, n, chunk_size)]


def iter_chunks(spec: DistributionSpec, n: int, seed: int, chunk_size: int = CHUNK_SIZE,
                workers: Optional[int] = None):
    """Yield the sample chunks in order; generation may run on a thread pool."""
    sizes = chunk_sizes(n, chunk_size)
    make = lambda k: spec.sample_chunk(chunk_rng(seed, k), sizes[k])
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(sizes) == 1:
        for k in range(len(sizes)):
            yield make(k)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(make, range(len(sizes)))


def sample_vector(spec: DistributionSpec, n: int, seed: int, chunk_size: int = CHUNK_SIZE,
                  workers: Optional[int] = None) -> np.ndarray:
    """Deterministic ``(n, d)`` sample matrix for ``(spec, n, seed)``."""
    if n < 1:
        raise ValueError("n must be positive")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    return np.concatenate(list(iter_chunks(spec, n, seed, chunk_size, workers)), axis=0)

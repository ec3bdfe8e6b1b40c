"""Monte Carlo ground truth for every bound in the package.

Events follow the notation of the bounds exactly: ``max`` and ``min`` use a
strict ``> u``; the orthant (``joint``) event uses ``>= x_i``.
"""
from __future__ import annotations

import math
import platform
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .distributions import CHUNK_SIZE, SEED_DERIVATION, DistributionSpec, iter_chunks, sample_vector
from .max_tail import MaxTailInputs, max_tail_lower, max_tail_upper_full, max_tail_upper_two_term
from .min_tail import (MultivariateMgf, min_tail_combined_bivariate, min_tail_upper,
                       zeta_bivariate, zeta_is_valid)
from .norms import bphi_norm
from .phi import PhiFunction, build_phi, conjugate_inverse, legendre_1d
from .scenario import BoundRecord, BoundReport, ConfigError, ScenarioConfig

MGF_OVERFLOW_GUARD = 690.0
MAX_GRID_POINTS = 10**7


class OverflowGuardWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class EmpiricalTailEstimate:
    estimate: float
    stderr: float
    n: int
    seed: Optional[int] = None

    @classmethod
    def from_count(cls, count: int, n: int, seed: Optional[int] = None) -> "EmpiricalTailEstimate":
        p = count / n
        return cls(p, math.sqrt(p * (1 - p) / n), n, seed)


def _event(samples: np.ndarray, mode: str, u) -> np.ndarray:
    if mode == "max":
        return samples.max(axis=1) > u
    if mode == "min":
        return samples.min(axis=1) > u
    if mode == "joint":
        x = np.asarray(u, dtype=float)
        return np.all(samples >= x, axis=1)
    raise ValueError(f"mode must be max, min or joint, got {mode!r}")


def empirical_tail(samples, mode: str, u, seed: Optional[int] = None) -> EmpiricalTailEstimate:
    """Fraction of rows in the event, with binomial standard error.

    ``mode="joint"`` takes the orthant corner vector as ``u``.
    """
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.shape[0] == 0:
        raise ValueError("samples must be nonempty")
    return EmpiricalTailEstimate.from_count(int(np.count_nonzero(_event(s, mode, u))), s.shape[0], seed)


def empirical_tail_streamed(spec: DistributionSpec, n: int, seed: int, mode: str, u,
                            chunk_size: int = CHUNK_SIZE, workers: Optional[int] = None) -> EmpiricalTailEstimate:
    """Same estimate as ``empirical_tail(sample_vector(...))`` without holding all rows."""
    count = sum(int(np.count_nonzero(_event(c, mode, u)))
                for c in iter_chunks(spec, n, seed, chunk_size, workers))
    return EmpiricalTailEstimate.from_count(count, n, seed)


def empirical_mgf(samples, lam: float) -> float:
    """``mean(exp(lam * s))``; ``inf`` (with a warning) past the overflow guard."""
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("samples must be nonempty")
    if abs(lam) * float(np.max(np.abs(s))) > MGF_OVERFLOW_GUARD:
        warnings.warn("empirical MGF argument exceeds the overflow guard", OverflowGuardWarning,
                      stacklevel=2)
        return math.inf
    return float(np.mean(np.exp(lam * s)))


def brute_force_conjugate(model: MultivariateMgf, x, grid) -> float:
    """Grid maximum of ``(lam, x) - ln g(lam)`` over the nonnegative orthant.

    ``grid`` is ``(hi, step)`` for the cube ``[0, hi]^d`` or a list of per-axis
    1-d arrays.  Desk-scale only: ``d <= 3`` and at most 10^7 points.
    """
    x = np.asarray(x, dtype=float)
    d = model.d
    if d > 3:
        raise ValueError("grid oracle is limited to d <= 3")
    if isinstance(grid, tuple) and len(grid) == 2 and np.isscalar(grid[0]):
        hi, step = float(grid[0]), float(grid[1])
        axis = np.linspace(0.0, hi, int(round(hi / step)) + 1)
        axes = [axis] * d
    else:
        axes = [np.asarray(a, dtype=float) for a in grid]
    if len(axes) != d:
        raise ValueError("one grid axis per dimension")
    if any(np.any(a < 0) for a in axes):
        raise ValueError("grid must lie in the nonnegative orthant")
    total = int(np.prod([a.size for a in axes]))
    if total > MAX_GRID_POINTS:
        raise ValueError(f"grid has {total} points, cap is {MAX_GRID_POINTS}")
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    best = -math.inf
    for i in range(0, mesh.shape[0], 200_000):
        block = mesh[i:i + 200_000]
        if math.isfinite(model.epsilon):
            block = block[np.linalg.norm(block, axis=1) < model.epsilon]
            if block.size == 0:
                continue
        vals = block @ x - np.asarray(model.log_mgf(block))
        best = max(best, float(np.max(vals)))
    return best


def calibrate_deltas(samples: np.ndarray, phi: PhiFunction, u_grid: Sequence[float],
                     betas: Sequence[float], slack: float = 3.0) -> tuple:
    """Largest ``delta_i <= beta_i`` with ``exp(-nu(u/delta_i)) <= Qhat_i(u) - slack*se``
    at every grid level where the right-hand side is positive."""
    out = []
    for i, beta in enumerate(betas):
        delta = float(beta)
        for u in u_grid:
            est = empirical_tail(samples[:, i], "max", u)
            lo = est.estimate - slack * est.stderr
            if lo <= 0 or lo >= 1:
                continue
            t = conjugate_inverse(phi, -math.log(lo))
            if t > 0:
                delta = min(delta, u / t)
        out.append(delta * (1 - 1e-9))
    return tuple(out)


def _versions() -> dict:
    return {"tailbound": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _verdict_upper(value, est, slack):
    return "holds" if est.estimate <= value + slack * est.stderr else "violated"


def _gap(value, est):
    return value / est.estimate if est.estimate > 0 else None


def resolve_betas(config: ScenarioConfig, phi: PhiFunction) -> tuple:
    if config.betas is not None:
        return tuple(config.betas), False
    taus, lower = [], False
    for i, m in enumerate(config.distribution.marginal_models()):
        res = bphi_norm(m, phi)
        if not math.isfinite(res.tau):
            raise ConfigError(f"coordinate {i} has infinite B(phi) norm", "phi")
        taus.append(res.tau)
        lower = lower or res.lower_estimate_only
    return tuple(taus), lower


def validate_bounds(config: ScenarioConfig, workers: Optional[int] = None) -> BoundReport:
    """Evaluate every requested bound on ``config.u_grid`` against Monte Carlo estimates."""
    if config.distribution is None:
        raise ConfigError("running a scenario needs a distribution", "distribution")
    phi = build_phi(config.phi)
    dist = config.distribution
    samples = sample_vector(dist, config.samples, config.seed, workers=workers)
    slack = config.slack
    allow = config.allow_small_u

    meta = {"pair_sum_convention": config.pair_sum, "log_mgf_amendment": True,
            "orthant_restricted": True, "seed": config.seed, "samples": config.samples,
            "chunk_size": CHUNK_SIZE, "seed_derivation": SEED_DERIVATION, "slack": slack,
            "distribution": dist.to_dict(), "phi": config.phi,
            "scope_warning": bool(config.u_grid[0] < 1)}

    wants_max = [b for b in config.bounds if b.startswith("max_")]
    inputs = None
    if wants_max:
        betas, lower = resolve_betas(config, phi)
        deltas = config.deltas
        if deltas == "auto":
            deltas = calibrate_deltas(samples, phi, config.u_grid, betas, slack)
        if deltas is not None:
            if len(deltas) != len(betas):
                raise ConfigError("deltas and betas must have the same length", "deltas")
            if not all(dl <= b for dl, b in zip(deltas, betas)):
                raise ConfigError("each delta_i must lie in (0, beta_i]", "deltas")
        inputs = MaxTailInputs(betas, phi, deltas)
        meta.update(betas=list(betas), deltas=None if deltas is None else list(deltas),
                    norms_lower_estimate_only=lower)

    joint: Optional[MultivariateMgf] = None
    if any(b in config.bounds for b in ("min_upper", "combined")):
        joint = dist.joint_mgf()
    zparams = config.zeta_params
    if zparams is None and any(b in config.bounds for b in ("zeta", "combined")):
        p = dist.subgaussian_params()
        if p is None:
            raise ConfigError("no subgaussian parameters known for this distribution; "
                              "give zeta_params", "zeta_params")
        zparams = (p,)
    if zparams is not None:
        meta["zeta_params"] = [{"sigma1": p.sigma1, "sigma2": p.sigma2, "rho": p.rho,
                                "zeta_valid": zeta_is_valid(p)} for p in zparams]

    records = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # scope warnings are recorded in metadata instead
        for u in config.u_grid:
            est_max = empirical_tail(samples, "max", u, config.seed)
            est_min = empirical_tail(samples, "min", u, config.seed)
            for b in config.bounds:
                if b == "max_upper_full":
                    v = max_tail_upper_full(inputs, u, allow)
                    records.append(BoundRecord(u, b, v, est_max.estimate, est_max.stderr,
                                               _verdict_upper(v, est_max, slack), _gap(v, est_max)))
                elif b == "max_upper_two_term":
                    v = max_tail_upper_two_term(inputs, u, allow)
                    records.append(BoundRecord(u, b, v, est_max.estimate, est_max.stderr,
                                               _verdict_upper(v, est_max, slack), _gap(v, est_max)))
                elif b == "max_lower":
                    records.append(_lower_record(inputs, samples, u, est_max, config))
                elif b == "min_upper":
                    v = min_tail_upper(joint, u, allow)
                    records.append(BoundRecord(u, b, v, est_min.estimate, est_min.stderr,
                                               _verdict_upper(v, est_min, slack), _gap(v, est_min)))
                elif b == "zeta":
                    for p in zparams:
                        name = b if len(zparams) == 1 else _zeta_label(p)
                        v = zeta_bivariate(p, u, allow)
                        records.append(BoundRecord(u, name, v, est_min.estimate, est_min.stderr,
                                                   _verdict_upper(v, est_min, slack), _gap(v, est_min)))
                elif b == "combined":
                    for p in zparams:
                        name = b if len(zparams) == 1 else _zeta_label(p, b)
                        v = min_tail_combined_bivariate(p, joint, u, allow)
                        records.append(BoundRecord(u, name, v, est_min.estimate, est_min.stderr,
                                                   _verdict_upper(v, est_min, slack), _gap(v, est_min)))
    meta["versions"] = _versions()
    return BoundReport(config.name, records, meta)


def _zeta_label(p, prefix: str = "zeta") -> str:
    return f"{prefix}[sigma1={p.sigma1:g},sigma2={p.sigma2:g},rho={p.rho:g}]"


def _lower_record(inputs, samples, u, est, config) -> BoundRecord:
    if inputs.deltas is None:
        return BoundRecord(u, "max_lower", 0.0, est.estimate, est.stderr, "not_applicable", None)
    v = max_tail_lower(inputs, u, pairs=config.pair_sum, allow_small_u=config.allow_small_u)
    for i, dl in enumerate(inputs.deltas):
        nu = legendre_1d(inputs.phi, u / dl).value
        target = 0.0 if math.isinf(nu) else math.exp(-nu)
        qi = empirical_tail(samples[:, i], "max", u)
        if target > qi.estimate + config.slack * qi.stderr:
            return BoundRecord(u, "max_lower", v, est.estimate, est.stderr, "hypothesis_violated",
                               _gap(v, est))
    verdict = "holds" if v <= est.estimate + config.slack * est.stderr else "violated"
    return BoundRecord(u, "max_lower", v, est.estimate, est.stderr, verdict, _gap(v, est))

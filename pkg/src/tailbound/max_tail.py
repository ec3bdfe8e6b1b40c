"""Bonferroni upper and lower bounds for ``Q(u) = P(max_i xi_i > u)``.

Every coordinate is assumed to have B(phi) norm ``beta_i`` for one common
generator ``phi``.  With ``nu`` the conjugate of ``phi`` each marginal tail
satisfies ``Q_i(u) <= exp(-nu(u / beta_i))``; summing gives the upper bounds and
the degree-two Bonferroni truncation gives the lower bound.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence, Tuple

import numpy as np

from .phi import PhiFunction, legendre_1d

PAIR_CONVENTIONS = ("unordered", "ordered")


class ScopeError(ValueError):
    """Raised when a bound is requested for ``u < 1`` without the override."""


class ScopeWarning(UserWarning):
    """Emitted when a bound is evaluated outside ``u >= 1`` by explicit request."""


@dataclass(frozen=True, eq=False)
class MaxTailInputs:
    betas: Tuple[float, ...]
    phi: PhiFunction
    deltas: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        betas = tuple(float(b) for b in self.betas)
        if not betas or not all(b > 0 and math.isfinite(b) for b in betas):
            raise ValueError("betas must be positive and finite")
        object.__setattr__(self, "betas", betas)
        if self.deltas is not None:
            deltas = tuple(float(x) for x in self.deltas)
            if len(deltas) != len(betas):
                raise ValueError("deltas and betas must have the same length")
            if not all(0 < dl <= b for dl, b in zip(deltas, betas)):
                raise ValueError("each delta_i must lie in (0, beta_i]")
            object.__setattr__(self, "deltas", deltas)

    @property
    def d(self) -> int:
        return len(self.betas)


@dataclass(frozen=True)
class NormClassification:
    """``R`` holds 0-based indices of the coordinates below the maximum norm."""

    beta_max: float
    r: int
    R: Tuple[int, ...]
    beta_under: float


def classify_norms(inputs: MaxTailInputs) -> NormClassification:
    b = inputs.betas
    top = max(b)
    R = tuple(i for i, x in enumerate(b) if x < top)
    under = max((b[i] for i in R), default=0.0)
    return NormClassification(top, len(b) - len(R), R, under)


def check_scope(u: float, allow_small_u: bool = False) -> None:
    if u >= 1:
        return
    if not allow_small_u:
        raise ScopeError(f"bounds are stated for u >= 1, got u={u}")
    warnings.warn(f"evaluating bound at u={u} < 1", ScopeWarning, stacklevel=3)


def _tail_term(phi: PhiFunction, x: float) -> float:
    nu = legendre_1d(phi, x).value
    return 0.0 if math.isinf(nu) else math.exp(-nu)


def max_tail_upper_full(inputs: MaxTailInputs, u: float, allow_small_u: bool = False) -> float:
    """``r exp(-nu(u/beta)) + sum_{i in R} exp(-nu(u/beta_i))``, clipped to 1."""
    check_scope(u, allow_small_u)
    c = classify_norms(inputs)
    total = c.r * _tail_term(inputs.phi, u / c.beta_max)
    total += sum(_tail_term(inputs.phi, u / inputs.betas[i]) for i in c.R)
    return min(1.0, total)


def max_tail_upper_two_term(inputs: MaxTailInputs, u: float, allow_small_u: bool = False) -> float:
    """Coarser version that replaces every ``beta_i < beta`` by the runner-up norm."""
    check_scope(u, allow_small_u)
    c = classify_norms(inputs)
    total = c.r * _tail_term(inputs.phi, u / c.beta_max)
    if c.R:
        total += len(c.R) * _tail_term(inputs.phi, u / c.beta_under)
    return min(1.0, total)


def pairwise_joint_upper(beta_i: float, beta_j: float, phi: PhiFunction, u: float,
                         allow_small_u: bool = False) -> float:
    """Bound on ``P(xi_i > u, xi_j > u)`` through ``P(xi_i + xi_j >= 2u)`` and the
    triangle inequality ``||xi_i + xi_j|| <= beta_i + beta_j``."""
    if not (beta_i > 0 and beta_j > 0):
        raise ValueError("norms must be positive")
    check_scope(u, allow_small_u)
    return _tail_term(phi, 2.0 * u / (beta_i + beta_j))


def max_tail_lower(inputs: MaxTailInputs, u: float, pairs: str = "unordered",
                   allow_small_u: bool = False) -> float:
    """``sum_i exp(-nu(u/delta_i)) - sum_{pairs} exp(-nu(2u/(beta_i+beta_j)))``, floored at 0.

    ``pairs="unordered"`` sums over ``i < j`` (classical Bonferroni);
    ``"ordered"`` sums over all ``i != j`` and so subtracts twice as much.
    """
    if inputs.deltas is None:
        raise ValueError("the lower bound needs deltas")
    if pairs not in PAIR_CONVENTIONS:
        raise ValueError(f"pairs must be one of {PAIR_CONVENTIONS}")
    check_scope(u, allow_small_u)
    first = sum(_tail_term(inputs.phi, u / dl) for dl in inputs.deltas)
    b = inputs.betas
    second = sum(pairwise_joint_upper(b[i], b[j], inputs.phi, u, allow_small_u=True)
                 for i, j in combinations(range(len(b)), 2))
    if pairs == "ordered":
        second *= 2
    return max(0.0, first - second)


def max_tail_curve(inputs: MaxTailInputs, u_grid: Sequence[float], which: str = "full",
                   allow_small_u: bool = False) -> np.ndarray:
    """Evaluate one of the bounds over a grid of levels."""
    fn = {"full": max_tail_upper_full, "two_term": max_tail_upper_two_term,
          "lower": max_tail_lower}[which]
    return np.array([fn(inputs, float(u), allow_small_u=allow_small_u) for u in u_grid])

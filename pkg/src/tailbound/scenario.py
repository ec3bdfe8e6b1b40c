"""Scenario configuration and bound reports (JSON in, JSON/CSV out)."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Optional, Union

import numpy as np

from .distributions import DistributionSpec
from .min_tail import BivariateSubgaussianParams
from .phi import PhiError, build_phi

SCHEMA_VERSION = 1
BOUND_NAMES = ("max_upper_full", "max_upper_two_term", "max_lower", "min_upper", "zeta", "combined")
UPPER_BOUNDS = ("max_upper_full", "max_upper_two_term", "min_upper", "zeta", "combined")
VERDICTS = ("holds", "violated", "hypothesis_violated", "not_applicable")


class ConfigError(ValueError):
    """Invalid scenario configuration.  ``key`` names the offending field."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


def _u_grid(raw) -> tuple:
    if isinstance(raw, dict):
        try:
            start, stop, step = float(raw["start"]), float(raw["stop"]), float(raw["step"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("u_grid range needs numeric start, stop and step", "u_grid")
        if not step > 0 or stop < start:
            raise ConfigError("u_grid range needs step > 0 and stop >= start", "u_grid")
        n = int(round((stop - start) / step)) + 1
        return tuple(float(np.round(start + k * step, 12)) for k in range(n))
    try:
        return tuple(float(v) for v in raw)
    except (TypeError, ValueError):
        raise ConfigError("u_grid must be a list of numbers or a {start, stop, step} range", "u_grid")


def _zeta_params(raw) -> Optional[tuple]:
    if raw is None:
        return None
    items = raw if isinstance(raw, list) else [raw]
    try:
        return tuple(BivariateSubgaussianParams(float(p["sigma1"]), float(p["sigma2"]), float(p["rho"]))
                     for p in items)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid zeta_params: {exc}", "zeta_params")


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    name: str
    distribution: Optional[DistributionSpec]
    phi: Any
    u_grid: tuple
    bounds: tuple
    samples: int = 1_000_000
    seed: int = 0
    betas: Optional[tuple] = None
    deltas: Union[None, str, tuple] = None
    zeta_params: Optional[tuple] = None
    allow_small_u: bool = False
    pair_sum: str = "unordered"
    slack: float = 3.0

    @property
    def d(self) -> Optional[int]:
        if self.distribution is not None:
            return self.distribution.d
        return len(self.betas) if self.betas is not None else None

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if data.get("schema") != SCHEMA_VERSION:
            raise ConfigError(f"config needs \"schema\": {SCHEMA_VERSION}", "schema")
        known = {"schema", "name", "distribution", "phi", "u_grid", "bounds", "samples", "seed",
                 "betas", "deltas", "zeta_params", "allow_small_u", "pair_sum", "slack"}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(f"unknown config fields: {extra}", extra[0])

        name = data.get("name")
        if not isinstance(name, str) or not name:
            raise ConfigError("name must be a non-empty string", "name")

        dist = None
        if data.get("distribution") is not None:
            try:
                dist = DistributionSpec.from_dict(data["distribution"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"invalid distribution: {exc}", "distribution")

        if "u_grid" not in data:
            raise ConfigError("u_grid is required", "u_grid")
        u_grid = _u_grid(data["u_grid"])
        allow_small = bool(data.get("allow_small_u", False))
        if not u_grid:
            raise ConfigError("u_grid must not be empty", "u_grid")
        if any(b <= a for a, b in zip(u_grid, u_grid[1:])):
            raise ConfigError("u_grid must be strictly ascending", "u_grid")
        if u_grid[0] < 1 and not allow_small:
            raise ConfigError(f"u_grid starts at {u_grid[0]}: bounds are scoped to u >= 1 "
                              "(set allow_small_u to override)", "u_grid")

        bounds = data.get("bounds")
        if not isinstance(bounds, list) or not bounds:
            raise ConfigError("bounds must be a non-empty list", "bounds")
        bad = [b for b in bounds if b not in BOUND_NAMES]
        if bad:
            raise ConfigError(f"unknown bounds {bad}; choose from {list(BOUND_NAMES)}", "bounds")

        betas = data.get("betas")
        if betas is not None:
            try:
                betas = tuple(float(b) for b in betas)
            except (TypeError, ValueError):
                raise ConfigError("betas must be a list of numbers", "betas")
            if not all(b > 0 for b in betas):
                raise ConfigError("betas must be positive", "betas")
            if dist is not None and len(betas) != dist.d:
                raise ConfigError(f"betas has length {len(betas)}, distribution has d={dist.d}", "betas")

        deltas = data.get("deltas")
        if deltas is not None and deltas != "auto":
            try:
                deltas = tuple(float(x) for x in deltas)
            except (TypeError, ValueError):
                raise ConfigError("deltas must be \"auto\" or a list of numbers", "deltas")
            if not all(x > 0 for x in deltas):
                raise ConfigError("deltas must be positive", "deltas")

        zeta = _zeta_params(data.get("zeta_params"))
        d = dist.d if dist is not None else (len(betas) if betas is not None else None)
        for b in ("zeta", "combined"):
            if b in bounds and d is not None and d != 2:
                raise ConfigError(f"{b} requires d=2, got d={d}", "bounds")
        if "combined" in bounds and dist is None:
            raise ConfigError("combined needs a distribution", "bounds")
        if "zeta" in bounds and dist is None and zeta is None:
            raise ConfigError("zeta needs zeta_params or a distribution", "bounds")
        if "min_upper" in bounds and dist is None:
            raise ConfigError("min_upper needs a distribution", "bounds")
        if any(b.startswith("max_") for b in bounds) and dist is None and betas is None:
            raise ConfigError("max-tail bounds need betas or a distribution", "bounds")

        samples = data.get("samples", 1_000_000)
        if not isinstance(samples, int) or isinstance(samples, bool) or samples < 1:
            raise ConfigError("samples must be a positive integer", "samples")
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("seed must be a nonnegative integer", "seed")
        pair_sum = data.get("pair_sum", "unordered")
        if pair_sum not in ("unordered", "ordered"):
            raise ConfigError("pair_sum must be \"unordered\" or \"ordered\"", "pair_sum")
        slack = float(data.get("slack", 3.0))
        if not slack >= 0:
            raise ConfigError("slack must be nonnegative", "slack")

        phi = data.get("phi", "quadratic")
        try:
            build_phi(phi)
        except (PhiError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid phi: {exc}", "phi")

        return cls(name, dist, phi, u_grid, tuple(bounds), samples, seed, betas, deltas, zeta,
                   allow_small, pair_sum, slack)


def _finite_or_none(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


@dataclass(frozen=True)
class BoundRecord:
    u: float
    bound: str
    value: float
    empirical: Optional[float]
    stderr: Optional[float]
    verdict: str
    gap_ratio: Optional[float]


@dataclass
class BoundReport:
    name: str
    records: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema": SCHEMA_VERSION, "name": self.name, "metadata": self.metadata,
                "records": [asdict(r) for r in self.records]}

    def to_json(self) -> str:
        # float repr is the shortest string that round-trips exactly
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BoundReport":
        data = json.loads(text)
        return cls(data["name"], [BoundRecord(**r) for r in data["records"]], data["metadata"])

    def verdicts(self) -> set:
        return {r.verdict for r in self.records}

    @property
    def exit_code(self) -> int:
        v = self.verdicts()
        if "violated" in v:
            return 3
        if "hypothesis_violated" in v:
            return 4
        return 0

    def curve_rows(self) -> list:
        return [(r.u, r.bound, r.value, r.empirical, r.stderr) for r in self.records]

    def find(self, bound: str, u: float) -> BoundRecord:
        for r in self.records:
            if r.bound == bound and r.u == u:
                return r
        raise KeyError((bound, u))


def format_float(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".17g")

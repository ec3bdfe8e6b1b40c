"""Acceptance criteria 1-9, one test each, with runtime limits enforced in-test.

A summary line per criterion is printed at the end of the pytest run.
"""
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import norm

import tailbound
from tailbound.cli import run_scenario
from tailbound.distributions import DistributionSpec, sample_vector
from tailbound.max_tail import MaxTailInputs, max_tail_lower, max_tail_upper_full, max_tail_upper_two_term
from tailbound.min_tail import (BivariateSubgaussianParams, GaussianMultivariateMgf, log_mgf_conjugate,
                                zeta_bivariate, zeta_is_valid)
from tailbound.norms import (GaussianMgf, RademacherMgf, bphi_norm, independent_sum, natural_function,
                             uniform_mgf)
from tailbound.oracle import brute_force_conjugate, validate_bounds
from tailbound.phi import QuadraticPhi, build_phi, legendre_1d
from tailbound.scenario import ScenarioConfig

SCENARIOS = Path(tailbound.__file__).parent / "scenarios"
Q = QuadraticPhi()


@pytest.fixture
def clock(request):
    @contextmanager
    def run(limit):
        t0 = time.perf_counter()
        yield
        dt = time.perf_counter() - t0
        request.node._runtime_note = f"({dt:.4g} s, limit {limit:g} s)"
        assert dt < limit, f"runtime {dt:.3g} s exceeds {limit} s"
    return run


@pytest.mark.criterion(1, "zeta equals exp(-u^2) at rho=0")
def test_c1_zeta_rho0(clock):
    us = (1.0, 1.5, 2.0, 3.0)
    p = BivariateSubgaussianParams(1.0, 1.0, 0.0)
    with clock(1e-3):
        got = [zeta_bivariate(p, u) for u in us]
    for u, z in zip(us, got):
        assert abs(z - math.exp(-u * u)) <= 1e-12 * math.exp(-u * u)


@pytest.mark.criterion(2, "zeta exponent tends to u^2/2 as rho -> 1")
def test_c2_zeta_rho_to_one(clock):
    cases = [(rho, u) for rho in (0.9, 0.99, 0.999) for u in (1.0, 1.5, 2.0, 3.0)]
    ps = {rho: BivariateSubgaussianParams(1.0, 1.0, rho) for rho in (0.9, 0.99, 0.999)}
    with clock(1e-3):
        got = [zeta_bivariate(ps[rho], u) for rho, u in cases]
    for (rho, u), z in zip(cases, got):
        assert abs(math.log(z) + u * u / (1 + rho)) <= 1e-9
    # the exponent approaches u^2 / 2 monotonically
    e = [-math.log(zeta_bivariate(ps[r], 2.0)) for r in (0.9, 0.99, 0.999)]
    assert e[0] > e[1] > e[2] > 2.0 and e[2] - 2.0 < 2e-3


# 15 (sigma1, sigma2, rho) combinations inside the region where the zeta
# maximiser lies in the nonnegative orthant (rho * max(s) <= min(s)).
C3_COMBOS = ([(1.0, 1.0, r) for r in (-0.9, -0.5, 0.0, 0.5, 0.9)]
             + [(1.0, 1.5, r) for r in (-0.9, -0.5, 0.0, 0.3, 0.6)]
             + [(2.0, 1.0, r) for r in (-0.9, -0.5, 0.0, 0.25, 0.5)])


@pytest.mark.criterion(3, "zeta equals the Gaussian log-MGF conjugate (15 combos)")
def test_c3_zeta_conjugate_identity(clock):
    with clock(10.0):
        for s1, s2, rho in C3_COMBOS:
            p = BivariateSubgaussianParams(s1, s2, rho)
            assert zeta_is_valid(p)
            cov = p.cov
            model = GaussianMultivariateMgf(cov)
            for u in (1.0, 2.0, 3.0):
                x = np.array([u, u])
                lz = math.log(zeta_bivariate(p, u))
                exact = 0.5 * float(x @ np.linalg.solve(cov, x))
                assert abs(exact + lz) <= 1e-5 * abs(lz)
                ascent = log_mgf_conjugate(model, x)
                assert ascent.converged
                assert abs(ascent.value + lz) <= 1e-5 * abs(lz)
                star = np.linalg.solve(cov, x)
                axis = np.linspace(0.0, 1.25 * float(np.max(star)), 1500)
                grid = brute_force_conjugate(model, x, [axis, axis])
                assert abs(ascent.value - grid) <= 1e-3


def _sandwich_config(name, dist):
    return ScenarioConfig.from_dict({
        "schema": 1, "name": name, "distribution": dist, "u_grid": [1, 1.5, 2, 3],
        "bounds": ["max_upper_full", "max_upper_two_term", "max_lower"], "deltas": "auto",
        "samples": 1_000_000, "seed": 2024})


C4_SCENARIOS = {
    "gaussian_d2": {"kind": "gaussian", "cov": np.eye(2).tolist()},
    "gaussian_d3": {"kind": "gaussian", "cov": np.eye(3).tolist()},
    "gaussian_d5": {"kind": "gaussian", "cov": np.eye(5).tolist()},
    "gaussian_rho05": {"kind": "gaussian", "cov": [[1.0, 0.5], [0.5, 1.0]]},
    "rademacher_d2": {"kind": "iid-rademacher", "d": 2},
    "rademacher_d4": {"kind": "iid-rademacher", "d": 4},
}


@pytest.mark.criterion(4, "Bonferroni sandwich on 6 scenarios, n=1e6")
def test_c4_sandwich(clock):
    with clock(120.0):
        for name, dist in C4_SCENARIOS.items():
            rep = validate_bounds(_sandwich_config(name, dist))
            assert len(rep.records) == 12
            for r in rep.records:
                if r.bound == "max_lower":
                    assert r.verdict in ("holds", "hypothesis_violated"), (name, r)
                else:
                    assert r.verdict == "holds", (name, r)
            # calibrated deltas are checked against each marginal inside the verdict
            assert all(0 < d <= b for d, b in zip(rep.metadata["deltas"], rep.metadata["betas"]))


@pytest.mark.criterion(5, "min-tail bound validity on the Gaussian scenarios")
def test_c5_min_tail(clock):
    gaussian = {k: v for k, v in C4_SCENARIOS.items() if k.startswith("gaussian")}
    with clock(60.0):
        for name, dist in gaussian.items():
            cfg = ScenarioConfig.from_dict({
                "schema": 1, "name": name, "distribution": dist, "u_grid": [1, 1.5, 2, 3],
                "bounds": ["min_upper"], "samples": 1_000_000, "seed": 7})
            rep = validate_bounds(cfg)
            for r in rep.records:
                assert r.empirical <= r.value + 3 * r.stderr, (name, r)
                assert r.verdict == "holds"
            if name == "gaussian_d2":
                r = rep.find("min_upper", 2.0)
                assert r.value == pytest.approx(1.832e-2, abs=5e-6)
                assert r.value == pytest.approx(math.exp(-4), rel=1e-9)
                assert abs(r.empirical - norm.sf(2.0) ** 2) <= 3 * r.stderr
                assert r.gap_ratio is not None and r.gap_ratio == pytest.approx(r.value / r.empirical)


@pytest.mark.criterion(6, "Legendre engine: closed form, Fenchel-Young grid, boundary case")
def test_c6_legendre(clock):
    with clock(5.0):
        xs = np.linspace(-100, 100, 2001)
        for method in ("auto", "numeric"):
            for x in xs:
                v = legendre_1d(Q, x, method=method).value
                assert abs(v - 0.5 * x * x) <= 1e-8 * max(0.5 * x * x, 1e-300)
        phis = [Q, build_phi({"kind": "quadratic", "lambda0": 1.0}), build_phi({"kind": "power", "m": 4}),
                natural_function(RademacherMgf())]
        lam = np.linspace(-10, 10, 1000)
        x = np.linspace(-10, 10, 1000)
        for phi in phis:
            nu = np.array([legendre_1d(phi, t).value for t in x])
            lhs = lam[:, None] * x[None, :]
            rhs = np.asarray(phi(lam))[:, None] + nu[None, :]
            assert np.all(lhs <= rhs + 1e-9 * (1 + np.abs(lhs)))
        assert legendre_1d(build_phi({"kind": "quadratic", "lambda0": 1.0}), 2.0).value == 1.5


@pytest.mark.criterion(7, "norm engine: Gaussian, Rademacher, natural, homogeneity, triangle")
def test_c7_norms(clock):
    rng = np.random.default_rng(7)
    with clock(10.0):
        for s in (0.5, 1.0, 3.0):
            assert abs(bphi_norm(GaussianMgf(s), Q).tau - s) <= 1e-9
        assert abs(bphi_norm(RademacherMgf(), Q).tau - 1.0) <= 1e-6
        bases = [GaussianMgf(1.0), RademacherMgf(), uniform_mgf()]
        for m in bases:
            assert abs(bphi_norm(m, natural_function(m)).tau - 1.0) <= 1e-6
        base_tau = [bphi_norm(m, Q).tau for m in bases]
        for _ in range(1000):
            k, c = int(rng.integers(3)), float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
            assert abs(bphi_norm(bases[k].scaled(c), Q).tau - c * base_tau[k]) <= 1e-6 * c * base_tau[k]
        for _ in range(1000):
            i, j = rng.integers(3, size=2)
            a, b = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=2))
            x, y = bases[i].scaled(float(a)), bases[j].scaled(float(b))
            lhs = bphi_norm(independent_sum(x, y), Q).tau
            assert lhs <= bphi_norm(x, Q).tau + bphi_norm(y, Q).tau + 1e-9


@pytest.mark.criterion(8, "max-tail dominance, monotonicity, permutation invariance (1e4 inputs)")
def test_c8_max_tail_properties(clock):
    rng = np.random.default_rng(8)
    with clock(10.0):
        for _ in range(10_000):
            d = int(rng.integers(1, 7))
            betas = np.round(rng.uniform(0.2, 3.0, size=d), int(rng.integers(1, 4)))  # rounding makes ties
            u = float(rng.uniform(1.0, 10.0))
            x = MaxTailInputs(tuple(betas), Q)
            full, two = max_tail_upper_full(x, u), max_tail_upper_two_term(x, u)
            assert full <= two + 1e-12
            u2 = u + float(rng.uniform(0, 2))
            assert max_tail_upper_full(x, u2) <= full + 1e-15
            assert max_tail_upper_two_term(x, u2) <= two + 1e-15
            up = betas.copy()
            up[int(rng.integers(d))] += float(rng.uniform(0, 1))
            y = MaxTailInputs(tuple(up), Q)
            assert max_tail_upper_full(y, u) >= full - 1e-12
            assert max_tail_upper_two_term(y, u) >= two - 1e-12
            perm = rng.permutation(d)
            z = MaxTailInputs(tuple(betas[perm]), Q)
            assert math.isclose(max_tail_upper_full(z, u), full, rel_tol=1e-12, abs_tol=1e-300)
            assert math.isclose(max_tail_upper_two_term(z, u), two, rel_tol=1e-12, abs_tol=1e-300)
            deltas = tuple(0.5 * betas)
            lo = max_tail_lower(MaxTailInputs(tuple(betas), Q, deltas), u)
            lo_p = max_tail_lower(MaxTailInputs(tuple(betas[perm]), Q, tuple(np.asarray(deltas)[perm])), u)
            assert math.isclose(lo, lo_p, rel_tol=1e-12, abs_tol=1e-300)


@pytest.mark.criterion(9, "determinism: byte-identical reports, chunk-parallel equals sequential")
def test_c9_determinism(clock, tmp_path):
    runs = sorted(p for p in SCENARIOS.glob("*.json") if not p.stem.endswith("_curve"))
    assert len(runs) >= 7
    with clock(120.0):
        for cfg in runs:
            a, _ = run_scenario(cfg, tmp_path / "a", workers=1)
            b, _ = run_scenario(cfg, tmp_path / "b", workers=4)
            assert a.read_bytes() == b.read_bytes(), cfg.name
            ca = (tmp_path / "a" / f"{cfg.stem}.curve.csv").read_bytes()
            assert ca == (tmp_path / "b" / f"{cfg.stem}.curve.csv").read_bytes()
        spec = DistributionSpec.gaussian([[1.0, 0.3], [0.3, 2.0]])
        seq = sample_vector(spec, 300_001, seed=5, workers=1)
        par = sample_vector(spec, 300_001, seed=5, workers=8)
        assert seq.tobytes() == par.tobytes()

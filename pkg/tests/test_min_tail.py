import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailbound.distributions import DistributionSpec, sample_vector
from tailbound.max_tail import ScopeError
from tailbound.min_tail import (BivariateSubgaussianParams, ConfigurationError,
                                CustomMultivariateMgf, EmpiricalMultivariateMgf,
                                GaussianMultivariateMgf, HolderProductMgf, HolderWeights,
                                check_subgaussian_envelope, holder_mgf_bound, independent_product,
                                log_mgf_conjugate, mgf_joint_eval, min_tail_combined_bivariate,
                                min_tail_upper, orthant_tail_upper, zeta_bivariate, zeta_is_valid)
from tailbound.norms import GaussianMgf, RademacherMgf
from tailbound.oracle import brute_force_conjugate


def corr(rho, s1=1.0, s2=1.0):
    return GaussianMultivariateMgf(BivariateSubgaussianParams(s1, s2, rho).cov)


def P(s1, s2, rho):
    return BivariateSubgaussianParams(s1, s2, rho)


class TestJointMgf:
    def test_examples(self):
        assert mgf_joint_eval(GaussianMultivariateMgf(np.eye(2)), [1, 1]) == pytest.approx(math.e, rel=1e-15)
        assert mgf_joint_eval(corr(0.5), [1, 1]) == pytest.approx(math.exp(1.5), rel=1e-15)
        assert mgf_joint_eval(corr(0.5), [0, 0]) == 1.0

    def test_product_model(self):
        m = independent_product([GaussianMgf(1.0), RademacherMgf()])
        assert mgf_joint_eval(m, [0.7, 1.3]) == pytest.approx(math.exp(0.245) * math.cosh(1.3), rel=1e-13)

    def test_outside_radius_is_infinite(self):
        m = CustomMultivariateMgf(lambda lam: 0.5 * np.sum(np.asarray(lam) ** 2, axis=-1), 2, epsilon=1.0)
        assert mgf_joint_eval(m, [1.0, 1.0]) == math.inf

    def test_invalid_covariance(self):
        with pytest.raises(ValueError):
            GaussianMultivariateMgf([[1, 2], [2, 1]])


class TestHolder:
    def test_examples(self):
        g = [GaussianMgf(1.0), GaussianMgf(1.0)]
        assert holder_mgf_bound(g, [0.5, 0.5], HolderWeights((2, 2))) == pytest.approx(math.exp(0.5), rel=1e-14)
        # identical marginals, lam = (mu, mu): equals g_1(mu d)
        assert holder_mgf_bound(g, [0.5, 0.5], HolderWeights.uniform(2)) == pytest.approx(math.exp(0.5), rel=1e-14)
        assert holder_mgf_bound(g, [1, 0], HolderWeights((1.5, 3))) == pytest.approx(math.exp(0.75), rel=1e-14)

    @pytest.mark.parametrize("q", [(0.5, 2), (2, 3), (3, 3)])
    def test_invalid_weights(self, q):
        with pytest.raises(ValueError):
            HolderWeights(q)

    def test_product_model_class(self):
        m = HolderProductMgf([GaussianMgf(1.0), GaussianMgf(2.0)], HolderWeights.uniform(2))
        lam = np.array([0.3, 0.4])
        assert math.exp(float(m.log_mgf(lam))) == pytest.approx(
            holder_mgf_bound([GaussianMgf(1.0), GaussianMgf(2.0)], lam, HolderWeights.uniform(2)))


@settings(max_examples=200, deadline=None)
@given(rho=st.floats(0.0, 0.99), l1=st.floats(-3, 3), l2=st.floats(-3, 3), w=st.floats(1.05, 20.0))
def test_holder_dominates_joint(rho, l1, l2, w):
    q = HolderWeights((w, w / (w - 1)))
    exact = mgf_joint_eval(corr(rho), [l1, l2])
    assert holder_mgf_bound([GaussianMgf(1.0)] * 2, [l1, l2], q) >= exact * (1 - 1e-9)


class TestConjugate:
    def test_examples(self):
        assert log_mgf_conjugate(GaussianMultivariateMgf(np.eye(2)), [2, 2]).value == pytest.approx(4.0, rel=1e-9)
        assert log_mgf_conjugate(corr(0.5), [1, 1]).value == pytest.approx(2 / 3, rel=1e-9)
        assert log_mgf_conjugate(corr(0.5), [0, 0]).value == 0.0

    def test_grid_oracle(self):
        for model, x in ((corr(0.5), [1, 1]), (GaussianMultivariateMgf(np.eye(2)), [2, 2]),
                         (independent_product([RademacherMgf(), GaussianMgf(1.0)]), [0.5, 1.5])):
            want = brute_force_conjugate(model, x, (10.0, 0.01))
            assert log_mgf_conjugate(model, x).value == pytest.approx(want, abs=1e-3)

    def test_three_dimensional(self):
        m = GaussianMultivariateMgf(np.eye(3))
        assert orthant_tail_upper(m, [1, 1, 1]) == pytest.approx(math.exp(-1.5), rel=1e-9)

    def test_orthant_restriction_matters(self):
        # unconstrained maximiser of the rho=0.9, (2, 1)-scaled case has a negative entry
        m = corr(0.9, 2.0, 1.0)
        r = log_mgf_conjugate(m, [3, 3])
        u = log_mgf_conjugate(m, [3, 3], orthant_restricted=False)
        assert np.all(r.argmax_lambda >= 0) and np.any(u.argmax_lambda < 0)
        assert u.value > r.value
        assert r.value == pytest.approx(4.5, rel=1e-9)  # only lam_2 active: 3^2 / 2

    def test_divergent_conjugate(self):
        m = independent_product([RademacherMgf(), RademacherMgf()])
        r = log_mgf_conjugate(m, [1.5, 1.5])
        assert r.value == math.inf
        # boundary of the support: finite limit 2 ln 2
        assert log_mgf_conjugate(m, [1, 1]).value == pytest.approx(2 * math.log(2), abs=1e-6)

    def test_empirical_model_flagged(self):
        s = sample_vector(DistributionSpec.gaussian(np.eye(2)), 20_000, seed=4)
        r = log_mgf_conjugate(EmpiricalMultivariateMgf(s), [1, 1])
        assert r.lower_estimate and r.value == pytest.approx(1.0, abs=0.05)

    def test_bad_x(self):
        with pytest.raises(ValueError):
            log_mgf_conjugate(corr(0.2), [1, 1, 1])
        with pytest.raises(ValueError):
            orthant_tail_upper(corr(0.2), [-1, 1])


@settings(max_examples=40, deadline=None)
@given(a1=st.floats(0, 4), a2=st.floats(0, 4), b1=st.floats(0, 4), b2=st.floats(0, 4),
       rho=st.floats(-0.9, 0.9))
def test_conjugate_midpoint_convex(a1, a2, b1, b2, rho):
    m = corr(rho)
    f = lambda x: log_mgf_conjugate(m, x).value
    a, b = np.array([a1, a2]), np.array([b1, b2])
    assert f(0.5 * (a + b)) <= 0.5 * (f(a) + f(b)) + 1e-7 * (1 + abs(f(a)) + abs(f(b)))


class TestMinTail:
    def test_examples(self):
        iid = GaussianMultivariateMgf(np.eye(2))
        assert min_tail_upper(iid, 2) == pytest.approx(math.exp(-4), rel=1e-9)
        assert min_tail_upper(iid, 1) == pytest.approx(0.36787944117144233, rel=1e-9)
        assert min_tail_upper(GaussianMultivariateMgf([[1.0]]), 2) == pytest.approx(math.exp(-2), rel=1e-9)

    def test_scope(self):
        with pytest.raises(ScopeError):
            min_tail_upper(corr(0), 0.5)

    @pytest.mark.parametrize("cov", [np.eye(2), [[1, 0.5], [0.5, 1]], np.eye(3)])
    def test_bound_validity(self, cov):
        spec = DistributionSpec.gaussian(cov)
        s = sample_vector(spec, 1_000_000, seed=21)
        mn = s.min(axis=1)
        for u in (1, 1.5, 2, 3):
            p = np.mean(mn > u)
            se = math.sqrt(p * (1 - p) / mn.size)
            assert p <= min_tail_upper(spec.joint_mgf(), u) + 3 * se


class TestZeta:
    def test_examples(self):
        assert zeta_bivariate(P(1, 1, 0), 1) == pytest.approx(math.exp(-1), rel=1e-15)
        assert zeta_bivariate(P(1, 1, 0.999), 1) == pytest.approx(0.606379, abs=5e-7)
        assert zeta_bivariate(P(2, 1, 0), 2) == pytest.approx(math.exp(-2.5), rel=1e-14)

    def test_rho_bounds(self):
        for rho in (1.0, -1.0, 1.5):
            with pytest.raises(ValueError):
                P(1, 1, rho)

    @pytest.mark.parametrize("rho", [-0.9, -0.5, 0.0, 0.5, 0.9])
    @pytest.mark.parametrize("s1,s2", [(1, 1), (1, 1.5), (2, 1)])
    def test_matches_gaussian_conjugate(self, s1, s2, rho):
        p = P(s1, s2, rho)
        m = GaussianMultivariateMgf(p.cov)
        for u in (1, 2, 3):
            lz = math.log(zeta_bivariate(p, u))
            free = log_mgf_conjugate(m, [u, u], orthant_restricted=False).value
            assert abs(lz + free) <= 1e-5 * max(1.0, abs(lz))
            if zeta_is_valid(p):
                assert abs(lz + log_mgf_conjugate(m, [u, u]).value) <= 1e-5 * max(1.0, abs(lz))

    def test_invalid_regime_undercuts_truth(self):
        # sigma1=2, sigma2=1, rho=0.9: zeta < P(xi_2 > 3) <= the true value it should bound
        from scipy.stats import norm
        p = P(2, 1, 0.9)
        assert not zeta_is_valid(p)
        s = sample_vector(DistributionSpec.gaussian(p.cov), 1_000_000, seed=8)
        emp = np.mean(s.min(axis=1) > 3)
        assert zeta_bivariate(p, 3) < emp - 3 * math.sqrt(emp / s.shape[0])
        assert zeta_bivariate(p, 3) < norm.sf(3)
        assert min_tail_combined_bivariate(p, GaussianMultivariateMgf(p.cov), 3) >= emp

    def test_validity_region(self):
        assert zeta_is_valid(P(1, 1, 0.99)) and zeta_is_valid(P(1, 3, -0.9))
        assert not zeta_is_valid(P(1, 2, 0.6))

    def test_degenerate_negative_correlation(self):
        # rho -> -1 with equal scales: xi_2 = -xi_1, the minimum never exceeds u > 0
        s = sample_vector(DistributionSpec.gaussian([[1, -1], [-1, 1]]), 100_000, seed=3)
        emp = np.mean(s.min(axis=1) > 1)
        assert emp == 0.0
        for rho in (-0.9, -0.99, -0.999):
            z = zeta_bivariate(P(1, 1, rho), 1)
            assert math.isfinite(z) and emp <= z < 1
        assert zeta_bivariate(P(1, 1, -0.9), 1) == pytest.approx(math.exp(-10), rel=1e-12)


class TestCombined:
    def test_examples(self):
        assert min_tail_combined_bivariate(P(1, 1, 0), corr(0), 2) == pytest.approx(math.exp(-4), rel=1e-9)
        v = min_tail_combined_bivariate(P(1, 1, 0.5), corr(0.5), 2)
        assert v == pytest.approx(math.exp(-8 / 3), rel=1e-9)
        assert zeta_bivariate(P(1, 1, 0.5), 2) == pytest.approx(math.exp(-8 / 3), rel=1e-14)

    def test_tighter_model_is_dominated_by_zeta(self):
        m = independent_product([RademacherMgf(), RademacherMgf()])
        p = P(1, 1, 0)
        assert min_tail_combined_bivariate(p, m, 1.5) <= zeta_bivariate(p, 1.5)

    def test_envelope_mismatch(self):
        with pytest.raises(ConfigurationError):
            min_tail_combined_bivariate(P(1, 1, 0), corr(0, 2.0, 1.0), 2)
        with pytest.raises(ConfigurationError):
            check_subgaussian_envelope(P(1, 1, 0), GaussianMultivariateMgf(np.eye(3)))

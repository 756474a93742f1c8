"""IPW estimates, variance proxies, and the weighted ridge accumulator."""

import math

import numpy as np
import pytest

from causalbid.core import AuctionFeedback
from causalbid.value_est import RidgeState, clip_propensity, ipw, variance_proxy

WIN = AuctionFeedback(won=True, payment=0.2, observed_outcome=1.0)
LOSS_HALF = AuctionFeedback(won=False, payment=None, observed_outcome=0.5)


class TestIpw:
    def test_win_weighted(self):
        assert ipw(WIN, 0.5, explore=False) == pytest.approx(2.0)

    def test_explore_win(self):
        assert ipw(WIN, 0.123, explore=True) == pytest.approx(2.0)

    def test_loss_weighted(self):
        assert ipw(LOSS_HALF, 0.8, explore=False) == pytest.approx(-2.5)

    def test_explore_loss(self):
        assert ipw(LOSS_HALF, 0.9, explore=True) == pytest.approx(-1.0)

    def test_rejects_unclipped(self):
        for g in (0.0, 1.0):
            with pytest.raises(ValueError):
                ipw(WIN, g, explore=False)

    def test_unbiased_with_true_propensity(self):
        """Monte-Carlo mean matches the true effect within 3 standard errors."""
        rng = np.random.default_rng(9)
        n = 1_000_000
        g = 0.35
        won = rng.random(n) < g
        v1 = rng.uniform(0.4, 1.0, n)   # mean 0.7
        v0 = rng.uniform(0.0, 0.6, n)   # mean 0.3
        e = np.where(won, v1 / g, -v0 / (1 - g))
        se = e.std(ddof=1) / math.sqrt(n)
        assert abs(e.mean() - 0.4) <= 3 * se


class TestVarianceProxy:
    def test_balanced(self):
        assert variance_proxy(0.5, explore=False) == pytest.approx(4.0)

    def test_explore(self):
        assert variance_proxy(0.77, explore=True) == pytest.approx(4.0)

    def test_skewed(self):
        assert variance_proxy(0.1, explore=False) == pytest.approx(1 / 0.09)

    def test_floor(self):
        rng = np.random.default_rng(2)
        for g in rng.uniform(0.01, 0.99, 200):
            assert variance_proxy(float(g), explore=False) >= 4.0


def test_clip_propensity():
    T = 10_000
    eps = 0.5 / math.sqrt(T)
    assert clip_propensity(0.0, T) == pytest.approx(eps)
    assert clip_propensity(1.0, T) == pytest.approx(1 - eps)
    assert clip_propensity(0.4, T) == pytest.approx(0.4)


class TestRidgeState:
    def test_fresh_is_identity(self):
        st = RidgeState(d=3)
        np.testing.assert_array_equal(st.A, np.eye(3))
        np.testing.assert_array_equal(st.theta_hat(), np.zeros(3))

    def test_scalar_absorb(self):
        st = RidgeState(d=1)
        st.absorb(np.array([1.0]), e_tilde=2.0, sigma=4.0, u=0.0)
        assert st.A[0, 0] == pytest.approx(1 + 1 / 16)
        assert st.z[0] == pytest.approx(2 / 16)
        assert st.count == 1

    def test_scalar_solve(self):
        st = RidgeState(d=1, A=np.array([[2.0]]), z=np.array([1.0]))
        assert st.theta_hat()[0] == pytest.approx(0.5)

    def test_huge_sigma_is_no_op_on_A(self):
        st = RidgeState(d=2)
        st.absorb(np.array([1.0, 0.0]), e_tilde=1.0, sigma=1e12, u=0.0)
        np.testing.assert_allclose(st.A, np.eye(2), atol=1e-20)

    def test_absorbs_commute(self):
        rng = np.random.default_rng(4)
        items = [
            (rng.standard_normal(3), float(rng.normal()), float(rng.uniform(4, 30)),
             float(rng.uniform(0, 1)))
            for _ in range(6)
        ]
        a = RidgeState(d=3)
        b = RidgeState(d=3)
        for it in items:
            a.absorb(*it)
        for it in reversed(items):
            b.absorb(*it)
        np.testing.assert_allclose(a.A, b.A, rtol=1e-12)
        np.testing.assert_allclose(a.z, b.z, rtol=1e-12)
        assert a.sum_u_sq == pytest.approx(b.sum_u_sq)

    def test_rejects_bad_inputs(self):
        st = RidgeState(d=2)
        with pytest.raises(ValueError):
            st.absorb(np.ones(2), 0.0, sigma=3.0, u=0.0)
        with pytest.raises(ValueError):
            st.absorb(np.ones(2), 0.0, sigma=4.0, u=1.5)

    def test_matches_dense_normal_equations(self):
        """Same answer as solving the weighted least squares directly."""
        rng = np.random.default_rng(8)
        d, n = 4, 60
        xs = rng.standard_normal((n, d))
        xs /= np.maximum(1.0, np.linalg.norm(xs, axis=1, keepdims=True))
        es = rng.normal(size=n)
        sigmas = rng.uniform(4.0, 40.0, n)
        st = RidgeState(d=d)
        for x, e, s in zip(xs, es, sigmas):
            st.absorb(x, float(e), float(s), u=0.0)
        w = sigmas**-2
        A = np.eye(d) + (w[:, None] * xs).T @ xs
        theta_direct = np.linalg.solve(A, (w * es) @ xs)
        np.testing.assert_allclose(st.theta_hat(), theta_direct, rtol=1e-8)

    def test_consistency_toward_truth(self):
        """With exact linear responses the only error is the ridge shrinkage."""
        rng = np.random.default_rng(12)
        d = 3
        theta = np.array([0.5, -0.2, 0.1])
        st = RidgeState(d=d)
        for _ in range(20_000):
            x = rng.standard_normal(d)
            x /= np.linalg.norm(x)
            st.absorb(x, float(theta @ x), sigma=4.0, u=0.0)
        # exact identity: estimate = theta - A^-1 theta
        expected = theta - np.linalg.solve(st.A, theta)
        np.testing.assert_allclose(st.theta_hat(), expected, rtol=1e-9)
        np.testing.assert_allclose(st.theta_hat(), theta, atol=5e-3)


class TestGamma:
    def test_base_value(self):
        st = RidgeState(d=2)
        assert st.gamma(T=math.e) == pytest.approx(15.0)

    def test_with_width_mass(self):
        st = RidgeState(d=2)
        st.sum_u_sq = 4.0
        assert st.gamma(T=math.e) == pytest.approx(23.0)

    def test_monotone_over_absorbs(self):
        rng = np.random.default_rng(1)
        st = RidgeState(d=2)
        prev = st.gamma(T=100)
        for _ in range(10):
            st.absorb(rng.standard_normal(2), 0.1, sigma=5.0, u=float(rng.uniform(0, 1)))
            cur = st.gamma(T=100)
            assert cur >= prev
            prev = cur

    def test_scale(self):
        st = RidgeState(d=2)
        assert st.gamma(T=math.e, scale=0.5) == pytest.approx(8.0)


class TestConfWidth:
    def test_fresh_state(self):
        st = RidgeState(d=3)
        x = np.array([1.0, 0.0, 0.0])
        assert st.conf_width(x, T=math.e) == pytest.approx(15.0)

    def test_orthogonal_direction_unaffected(self):
        st = RidgeState(d=2)
        for _ in range(50):
            st.absorb(np.array([1.0, 0.0]), 0.3, sigma=4.0, u=0.0)
        assert st.quad_inv(np.array([0.0, 1.0])) == pytest.approx(1.0)

    def test_shrinks_with_repeated_directions(self):
        """Rank-one update oracle: quadratic form follows 1/(1 + k w)."""
        st = RidgeState(d=1)
        x = np.array([1.0])
        w = 1 / 25.0
        for k in range(1, 30):
            st.absorb(x, 0.0, sigma=5.0, u=0.0)
            assert st.quad_inv(x) == pytest.approx(1.0 / (1.0 + k * w), rel=1e-12)

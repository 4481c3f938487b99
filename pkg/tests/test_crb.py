import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from uwloc.config import PhyConfig
from uwloc.crb import (crb_from_fim, fim_cfs, fim_cts, fim_cts_bruteforce, g_ct,
                       per_anchor_term, tof_model)
from uwloc.errors import DomainError, SingularFimError

PHY = PhyConfig(k_e=1e-8)
C = 1500.0
CORNERS = np.array([[0.0, 0.0], [4500.0, 0.0], [4500.0, 4500.0], [0.0, 4500.0]])
RING = np.array([[2250 + 1800 * math.cos(a), 2250 + 1800 * math.sin(a)]
                 for a in 2 * np.pi * np.arange(5) / 5])
X = np.array([1300.0, 2900.0])

coords = st.floats(100.0, 4400.0)


class TestModel:
    def test_gradients_match_finite_differences(self):
        a = np.array([300.0, 4000.0])
        f, df, var, dvar = tof_model(X, a, PHY)
        h = 1e-3
        for i in range(2):
            e = np.eye(2)[i] * h
            fp, _, vp, _ = tof_model(X + e, a, PHY)
            fm, _, vm, _ = tof_model(X - e, a, PHY)
            assert df[i] == pytest.approx((fp - fm) / (2 * h), rel=1e-6)
            assert dvar[i] == pytest.approx((vp - vm) / (2 * h), rel=1e-6)

    def test_coincident(self):
        with pytest.raises(DomainError):
            tof_model(X, X, PHY)

    def test_variance_weight_matches_score_covariance(self):
        # oracle: the FIM is the covariance of the score of the Gaussian
        # likelihood N(f(x), sigma^2(x)), evaluated by finite differences
        phy = PhyConfig(k_e=1e-5)
        a = np.array([3500.0, 500.0])
        f, _, var, _ = tof_model(X, a, phy)
        t = f + math.sqrt(var) * np.random.default_rng(4).standard_normal(10 ** 5)
        h = 1e-2

        def loglik(x):
            fx, _, vx, _ = tof_model(x, a, phy)
            return norm.logpdf(t, fx, math.sqrt(vx))

        score = np.stack([(loglik(X + h * e) - loglik(X - h * e)) / (2 * h) for e in np.eye(2)])
        emp = score @ score.T / t.size
        exact = per_anchor_term(X, a, phy)
        other = per_anchor_term(X, a, phy, variance_weight=1.0)
        assert np.linalg.norm(emp - exact) / np.linalg.norm(exact) < 0.02
        assert np.linalg.norm(emp - exact) < np.linalg.norm(emp - other)


class TestTerms:
    @settings(max_examples=30, deadline=None)
    @given(ax=coords, ay=coords, x=coords, y=coords)
    def test_symmetric_psd(self, ax, ay, x, y):
        if math.hypot(ax - x, ay - y) < 1.0:
            return
        b = per_anchor_term(np.array([x, y]), np.array([ax, ay]), PHY)
        assert np.allclose(b, b.T)
        assert np.linalg.eigvalsh(b).min() >= -1e-12 * np.abs(b).max()

    def test_range_part_scales_inversely_with_k_e(self):
        a = RING[0]
        b1 = per_anchor_term(X, a, PHY, variance_weight=0.0)
        b2 = per_anchor_term(X, a, replace(PHY, k_e=2e-8), variance_weight=0.0)
        assert np.allclose(b1, 2 * b2)

    def test_variance_part_independent_of_k_e(self):
        a = RING[0]
        def var_part(phy):
            return per_anchor_term(X, a, phy) - per_anchor_term(X, a, phy, variance_weight=0.0)
        assert np.allclose(var_part(PHY), var_part(replace(PHY, k_e=3e-6)))


class TestCfs:
    def test_certain_delivery_is_plain_sum(self):
        r = fim_cfs(X, RING, PHY, 1.0, 3)
        assert r.p_loc == pytest.approx(1.0)
        assert np.allclose(r.fim, r.terms.sum(axis=0))

    def test_square_centre_isotropic(self):
        r = fim_cfs(np.array([2250.0, 2250.0]), CORNERS, PHY, 1.0, 3)
        assert r.crb.per_axis[0] == pytest.approx(r.crb.per_axis[1], rel=1e-9)
        assert abs(r.fim[0, 1]) < 1e-9 * r.fim[0, 0]

    def test_matches_sampled_delivery_patterns(self):
        # oracle: 10^5 Bernoulli delivery patterns conditioned on >= K heard
        r = fim_cfs(X, RING, PHY, 0.7, 3)
        heard = np.random.default_rng(6).random((10 ** 5, 5)) < 0.7
        ok = heard[heard.sum(axis=1) >= 3]
        emp = np.einsum("sj,jab->ab", ok.astype(float), r.terms) / ok.shape[0]
        assert np.linalg.norm(emp - r.fim) / np.linalg.norm(r.fim) < 0.01
        assert ok.shape[0] / 10 ** 5 == pytest.approx(r.p_loc, abs=0.005)

    def test_adding_an_anchor_lowers_bound(self):
        a = fim_cfs(X, RING[:4], PHY, 1.0, 3).crb.total
        b = fim_cfs(X, RING, PHY, 1.0, 3).crb.total
        assert b < a

    def test_too_few_anchors(self):
        with pytest.raises(DomainError):
            fim_cfs(X, RING[:2], PHY, 0.9, 3)

    def test_sensor_on_anchor_line_is_singular(self):
        # every gradient points along the line, so the cross-axis is unobservable
        line = np.array([[0.0, 0.0], [1000.0, 0.0], [2000.0, 0.0]])
        with pytest.raises(SingularFimError):
            fim_cfs(np.array([500.0, 0.0]), line, PHY, 1.0, 3).crb


class TestCts:
    def test_g_ct_at_one(self):
        assert g_ct(1.0) == pytest.approx(1.5820, abs=1e-4)

    def test_g_ct_large(self):
        assert g_ct(40.0) == pytest.approx(40.0, rel=1e-12)

    def test_g_ct_rejects_zero(self):
        with pytest.raises(DomainError):
            g_ct(0.0)

    @pytest.mark.parametrize("mu", [0.3, 1.0, 2.25])
    def test_reduction_matches_enumeration(self, mu):
        # a per-anchor cap of 24 leaves < 1e-12 of the Poisson mean untallied
        anchors = RING[:4]
        r = fim_cts(X, anchors, PHY, 0.5, mu / 5.0, 10.0, 3)
        b = fim_cts_bruteforce(X, anchors, PHY, 0.5, mu / 5.0, 10.0, 3, q_cap=24)
        assert np.linalg.norm(r.fim - b) / np.linalg.norm(b) < 1e-9

    def test_large_mean_limit(self):
        mu = 50.0
        r = fim_cts(X, RING, PHY, 1.0, mu / 10, 10.0, 3)
        assert r.p_loc == pytest.approx(1.0)
        assert np.allclose(r.fim, mu * r.terms.sum(axis=0), rtol=1e-12)

    def test_rejects_empty_window(self):
        with pytest.raises(DomainError):
            fim_cts(X, RING, PHY, 0.5, 1.0, 0.0, 3)


class TestCrbFromFim:
    def test_identity(self):
        r = crb_from_fim(np.eye(2))
        assert r.total == pytest.approx(2.0)

    def test_diagonal(self):
        r = crb_from_fim(np.diag([4.0, 0.5]))
        assert np.allclose(r.per_axis, [0.25, 2.0])

    def test_singular(self):
        with pytest.raises(SingularFimError):
            crb_from_fim(np.array([[1.0, 1.0], [1.0, 1.0]]))

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import kstest

from uwloc.channel import (cfs_link_prob, interference_pdf, packet_duration,
                           packet_success_prob, received_power, received_power_pdf,
                           survival_given_q, survival_curve, power_model)
from uwloc.errors import DomainError
from uwloc.geometry import Region, distance_pdf, sample_positions
from uwloc.numerics import GriddedPdf
from uwloc.config import PhyConfig


def sampled_distances(net, n, seed):
    rng = np.random.default_rng(seed)
    r = Region.of(net)
    d = np.linalg.norm(sample_positions(r, n, rng) - sample_positions(r, n, rng), axis=1)
    return np.maximum(d, 1.0)


class TestPacketDuration:
    def test_default_values(self, phy):
        assert packet_duration(phy) == pytest.approx(0.100)

    def test_empty_packet(self):
        assert packet_duration(PhyConfig(guard_time=0.0, bits_per_packet=0.0)) == 0.0

    def test_double_bandwidth(self):
        assert packet_duration(PhyConfig(bandwidth=4000.0)) == pytest.approx(0.075)

    def test_override(self):
        assert packet_duration(PhyConfig(packet_duration=0.3)) == 0.3


class TestReceivedPower:
    def test_fixed_distance(self, phy):
        d = GriddedPdf.from_cdf(lambda x: (x >= 1000.0).astype(float), 0.0, 0.5, 4001)
        x = received_power_pdf(phy, d, tail_mass=1e-6, n=2 ** 14)
        expect = float(received_power(phy, 1000.0))
        assert x.mean() == pytest.approx(expect, rel=1e-3)
        assert x.total() == pytest.approx(1.0)

    def test_unit_mass(self, x0):
        assert x0.total() + x0.tail == pytest.approx(1.0, abs=1e-12)

    def test_rejects_nonpositive_cutoff(self, phy, dist_pdf):
        with pytest.raises(DomainError):
            received_power_pdf(phy, dist_pdf, d_min=0.0)

    def test_change_of_variables_ks(self, net, phy, x0):
        # oracle: powers of 10^6 sampled distances
        p = received_power(phy, sampled_distances(net, 10 ** 6, 4))
        assert kstest(p, lambda v: np.minimum(x0.cdf(v), 1.0)).statistic < 0.01


class TestInterference:
    def test_q1_is_x0(self, x0):
        i = interference_pdf(x0, 1)
        assert np.array_equal(i.mass, x0.mass)

    def test_q0_rejected(self, x0):
        with pytest.raises(DomainError):
            interference_pdf(x0, 0)

    def test_q2_mean(self, net, phy):
        # untruncated grid so the mean is fully represented
        x = received_power_pdf(phy, distance_pdf(Region.of(net)), tail_mass=0.0, n=2 ** 18)
        assert interference_pdf(x, 2).mean() == pytest.approx(2 * x.mean(), rel=1e-3)

    def test_q3_matches_sampled_sums(self, net, phy, x0):
        # oracle: sum of three independently sampled powers
        p = received_power(phy, sampled_distances(net, 3 * 10 ** 5, 5)).reshape(3, -1).sum(0)
        i = interference_pdf(x0, 3, limit=x0.right)
        inside = p[p <= i.right]
        # compare conditional laws below the truncation point
        f = lambda v: np.minimum(i.cdf(v) / i.total(), 1.0)
        assert kstest(inside, f).statistic < 0.01
        assert inside.size / p.size == pytest.approx(1 - i.tail, abs=0.005)


class TestSurvival:
    def test_no_threshold(self, net, x0):
        phy = PhyConfig(gamma_0_db=-300.0)
        assert survival_given_q(phy, x0, 0) == pytest.approx(1.0)

    def test_q0_is_one_when_every_link_clears_the_noise(self, phy, x0):
        assert survival_given_q(phy, x0, 0) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("q", [1, 2])
    def test_matches_sinr_monte_carlo(self, net, phy, x0, q):
        n = 10 ** 5
        p = received_power(phy, sampled_distances(net, (q + 1) * n, 10 + q)).reshape(q + 1, n)
        ok = p[0] >= phy.gamma_0 * (p[1:].sum(0) + phy.noise_power)
        emp = ok.mean()
        s = survival_given_q(phy, x0, q)
        assert abs(emp - s) < 3 * math.sqrt(s * (1 - s) / n)

    def test_non_increasing_in_q(self, phy, x0):
        s = survival_curve(phy, x0, 6)
        assert np.all(np.diff(s) <= 1e-12)

    def test_negative_q(self, phy, x0):
        with pytest.raises(DomainError):
            survival_given_q(phy, x0, -1)


class TestSuccessProbability:
    def test_low_rate_limit(self, net, phy, x0):
        ps = packet_success_prob(phy, x0, net.n_anchors, 1e-9, net.p_l)
        assert ps == pytest.approx((1 - net.p_l) * survival_given_q(phy, x0, 0), rel=1e-7)

    def test_total_loss(self, net, phy, x0):
        assert packet_success_prob(phy, x0, net.n_anchors, 1.0, 1.0) == 0.0

    def test_vectorized(self, net, phy, x0):
        lam = np.array([0.5, 1.0, 2.0])
        v = packet_success_prob(phy, x0, net.n_anchors, lam, net.p_l)
        assert v.shape == (3,)
        assert v[1] == pytest.approx(packet_success_prob(phy, x0, net.n_anchors, 1.0, net.p_l))

    def test_q_equal_n_switch_is_small(self, net, phy, x0):
        a = packet_success_prob(phy, x0, net.n_anchors, 1.0, net.p_l)
        b = packet_success_prob(phy, x0, net.n_anchors, 1.0, net.p_l, include_q_equal_n=True)
        assert 0 <= b - a < 1e-3

    @settings(max_examples=40, deadline=None)
    @given(lam=st.floats(0.0, 50.0), p_l=st.floats(0.0, 1.0))
    def test_bounds(self, net, phy, x0, lam, p_l):
        surv = survival_curve(phy, x0, net.n_anchors - 1)
        ps = packet_success_prob(phy, None, net.n_anchors, lam, p_l, survival=surv)
        assert -1e-12 <= ps <= 1 - p_l + 1e-12

    def test_decreasing_above_upper_rate_bound(self, net, phy, x0):
        lam = np.linspace(6.0, 40.0, 50)
        ps = packet_success_prob(phy, x0, net.n_anchors, lam, net.p_l)
        assert np.all(np.diff(ps) <= 0)


class TestCfsLink:
    def test_default_link_budget(self, net, phy, x0):
        assert cfs_link_prob(phy, x0, net.p_l) == pytest.approx(0.9, abs=1e-9)

    def test_lossless(self, phy, x0):
        assert cfs_link_prob(phy, x0, 0.0) == pytest.approx(1.0, abs=1e-9)

    def test_raised_threshold_matches_sampling(self, net):
        phy = PhyConfig(gamma_0_db=12.0)
        x0 = power_model(net, phy)
        n = 10 ** 5
        p = received_power(phy, sampled_distances(net, n, 21))
        emp = (1 - net.p_l) * np.mean(p >= phy.gamma_0 * phy.noise_power)
        val = cfs_link_prob(phy, x0, net.p_l)
        assert 0.1 < val < 0.85
        assert abs(emp - val) < 3 * math.sqrt(val * (1 - val) / n)

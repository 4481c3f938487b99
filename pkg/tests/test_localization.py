import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uwloc.config import PhyConfig
from uwloc.errors import DomainError
from uwloc.localization import (GaussNewtonSettings, MeasurementSet, gauss_newton,
                                generate_measurements, initial_guess, linear_guess,
                                tof_variance)

C = 1500.0
SQUARE = np.array([[0.0, 0.0], [4500.0, 0.0], [4500.0, 4500.0], [0.0, 4500.0], [2250.0, 300.0]])
TRUTH = np.array([1700.0, 2600.0])


def exact(truth, anchors, counts=None):
    counts = np.ones(len(anchors), int) if counts is None else np.asarray(counts)
    ids = np.repeat(np.arange(len(anchors)), counts)
    pos = anchors[ids]
    return MeasurementSet(ids, pos, np.linalg.norm(pos - truth, axis=1) / C, np.zeros(ids.size))


class TestMeasurements:
    def test_variance_law(self):
        phy = PhyConfig(k_e=1e-6)
        assert tof_variance(phy, 1000.0) == pytest.approx(1e-6 * 1000.0 ** 1.4)

    @pytest.mark.parametrize("kind,factor", [("tof", 1.0), ("rtt", 2.0)])
    def test_sample_variance_within_two_percent(self, kind, factor):
        # oracle: sample variance of 10^5 draws against k_E d^n0
        phy = PhyConfig(k_e=1e-6)
        anchors = np.array([[0.0, 0.0]])
        d = 2000.0
        ms = generate_measurements(np.array([d, 0.0]), anchors, [10 ** 5], phy,
                                   np.random.default_rng(0), kind=kind)
        assert ms.values.var(ddof=1) == pytest.approx(factor * phy.k_e * d ** 1.4, rel=0.02)
        assert ms.values.mean() == pytest.approx(factor * d / C, rel=1e-3)

    def test_rtt_maps_to_one_way(self):
        phy = PhyConfig(k_e=1e-7)
        ms = generate_measurements(TRUTH, SQUARE, np.ones(5, int), phy,
                                   np.random.default_rng(1), kind="rtt")
        ow = ms.one_way()
        assert ow.kind == "tof"
        assert np.allclose(ow.values, ms.values / 2)
        assert np.allclose(ow.variances, tof_variance(phy, np.linalg.norm(SQUARE - TRUTH, axis=1)) / 2)

    def test_negative_count(self):
        with pytest.raises(DomainError):
            generate_measurements(TRUTH, SQUARE, [1, -1, 1, 1, 1], PhyConfig(),
                                  np.random.default_rng(0))

    def test_counts_roundtrip(self):
        ms = exact(TRUTH, SQUARE, [2, 0, 1, 3, 1])
        assert ms.counts(5).tolist() == [2, 0, 1, 3, 1]
        assert ms.distinct_anchors == 4


class TestGaussNewton:
    def test_noise_free_fixed_point(self):
        res = gauss_newton(exact(TRUTH, SQUARE))
        assert res.localizable
        assert np.linalg.norm(res.estimate - TRUTH) < 1e-3

    def test_three_anchor_example(self):
        anchors = np.array([[0.0, 0.0], [4500.0, 0.0], [0.0, 4500.0]])
        truth = np.array([1000.0, 2000.0])
        res = gauss_newton(exact(truth, anchors))
        assert np.linalg.norm(res.estimate - truth) < 1e-3

    def test_single_start_contracts_at_damping_rate(self):
        # near the solution each damped step removes a fraction eta of the error
        s = GaussNewtonSettings(multistart=False)
        ms = exact(TRUTH, SQUARE)
        x0 = TRUTH + np.array([3.0, -4.0])
        res = gauss_newton(ms, s, x0=x0)
        # step i has length eta * 5 (1 - eta)^(i-1); stop at the first below eps
        expect = 1 + math.ceil(math.log(s.eps / (s.eta * 5.0)) / math.log(1 - s.eta))
        assert res.iterations == expect
        assert np.linalg.norm(res.estimate - TRUTH) == pytest.approx(
            5.0 * (1 - s.eta) ** expect, rel=0.05)

    def test_truth_is_fixed_point(self):
        res = gauss_newton(exact(TRUTH, SQUARE), x0=TRUTH)
        assert res.iterations == 1
        assert np.linalg.norm(res.estimate - TRUTH) < 1e-9

    def test_iteration_cap(self):
        res = gauss_newton(exact(TRUTH, SQUARE), GaussNewtonSettings(max_iter=3, multistart=False))
        assert res.iterations == 3

    def test_two_anchors_not_localizable(self):
        res = gauss_newton(exact(TRUTH, SQUARE[:2]))
        assert not res.localizable
        assert np.all(np.isfinite(res.estimate))

    def test_start_is_centroid(self):
        ms = exact(TRUTH, SQUARE, [3, 1, 1, 1, 1])
        assert np.allclose(initial_guess(ms), SQUARE.mean(axis=0))

    def test_linear_guess_exact_without_noise(self):
        assert np.allclose(linear_guess(exact(TRUTH, SQUARE)), TRUTH, atol=1e-6)

    def test_linear_guess_needs_three_anchors(self):
        assert linear_guess(exact(TRUTH, SQUARE[:2])) is None

    def test_collinear_anchors_flagged_or_finite(self):
        line = np.array([[0.0, 0.0], [1000.0, 0.0], [2000.0, 0.0]])
        res = gauss_newton(exact(np.array([500.0, 800.0]), line))
        assert res.failed or np.all(np.isfinite(res.estimate))

    def test_empty(self):
        with pytest.raises(DomainError):
            gauss_newton(MeasurementSet(np.zeros(0, int), np.zeros((0, 2)), np.zeros(0),
                                        np.zeros(0)))

    def test_bad_settings(self):
        with pytest.raises(DomainError):
            GaussNewtonSettings(eta=0.0)

    @settings(max_examples=25, deadline=None)
    @given(perm=st.permutations(range(5)), seed=st.integers(0, 2 ** 16))
    def test_permutation_invariance(self, perm, seed):
        phy = PhyConfig(k_e=1e-7)
        ms = generate_measurements(TRUTH, SQUARE, np.ones(5, int), phy,
                                   np.random.default_rng(seed))
        p = np.asarray(perm)
        shuffled = MeasurementSet(ms.anchor_ids[p], ms.anchor_positions[p], ms.values[p],
                                  ms.variances[p])
        a, b = gauss_newton(ms).estimate, gauss_newton(shuffled).estimate
        assert np.linalg.norm(a - b) < 1e-2

    def test_repeated_measurements_help(self):
        # same geometry and noise level; two packets per anchor should not be worse
        phy = PhyConfig(k_e=1e-6)
        rng = np.random.default_rng(8)
        err = {1: [], 2: []}
        for _ in range(1000):
            for q in (1, 2):
                ms = generate_measurements(TRUTH, SQUARE, np.full(5, q), phy, rng)
                err[q].append(np.sum((gauss_newton(ms).estimate - TRUTH) ** 2))
        assert np.sqrt(np.mean(err[2])) <= np.sqrt(np.mean(err[1]))

    def test_rtt_and_tof_agree_in_the_limit(self):
        phy = PhyConfig(k_e=1e-18)
        rng = np.random.default_rng(2)
        a = gauss_newton(generate_measurements(TRUTH, SQUARE, np.ones(5, int), phy, rng)).estimate
        b = gauss_newton(generate_measurements(TRUTH, SQUARE, np.ones(5, int), phy, rng,
                                               kind="rtt")).estimate
        assert np.linalg.norm(a - b) < 1e-2

"""Collision-tolerant scheme: anchors transmit independently at Poisson rate
lambda; a sensor localizes once it holds a useful packet from K anchors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb
from scipy.stats import binom

from .channel import packet_duration, packet_success_prob, survival_curve
from .errors import DomainError, ModelViolationError, NumericError
from .numerics import GriddedPdf, bisect_increasing, maximize_scalar

PROB_TOL = 1e-12
TIME_TOL = 1e-9


@dataclass(frozen=True)
class CtsParams:
    lam: float
    t_t: float
    n_anchors: int
    t_p: float

    @property
    def load(self) -> float:
        return 2.0 * self.n_anchors * self.lam * self.t_p


@dataclass(frozen=True)
class RateOptimum:
    lambda_opt: float
    lambda_low_bound: float
    lambda_upp_bound: float
    throughput: float  # p_s * lambda at the optimum


@dataclass(frozen=True)
class CtsTiming:
    t_t_min: float
    t_ct_min: float
    lambda_used: float
    p_ct: float


def useful_packet_prob(p_s, lam, t_t):
    """At least one correctly received packet from one anchor in ``t_t``."""
    return -np.expm1(-np.asarray(p_s) * np.asarray(lam) * np.asarray(t_t))


def self_loc_prob(p_ct, n_anchors: int, k: int):
    """Probability that at least ``k`` of ``n_anchors`` anchors were heard."""
    if not 1 <= k <= n_anchors:
        raise DomainError("need 1 <= K <= N")
    return binom.sf(k - 1, n_anchors, p_ct)


def loc_prob_derivative(p_ct: float, n_anchors: int, k: int, form: str = "upper") -> float:
    """d P_loc / d p_CT, summed over the upper tail (k >= K) or, after the
    binomial mean/normalization identities, over the lower terms (k < K)."""
    if not 0.0 < p_ct < 1.0:
        raise DomainError("p_ct must lie strictly inside (0, 1)")
    n, p = n_anchors, p_ct
    if form == "upper":
        ks = np.arange(k, n + 1)
        terms = ks - n * p
    elif form == "lower":
        ks = np.arange(0, k)
        terms = n * p - ks
    else:
        raise DomainError(f"unknown form {form!r}")
    return float(np.sum(comb(n, ks) * terms * p ** (ks - 1.0) * (1 - p) ** (n - ks - 1.0)))


def required_useful_prob(p_ss: float, n_anchors: int, k: int) -> float:
    """p_CT at which the self-localization probability equals ``p_ss``."""
    if not 0.0 < p_ss < 1.0:
        raise DomainError("p_ss must lie in (0, 1)")
    return bisect_increasing(lambda p: float(self_loc_prob(p, n_anchors, k)), p_ss,
                             0.0, 1.0, xtol=PROB_TOL)


def rate_bounds(n_anchors: int, t_p: float) -> tuple[float, float]:
    """Interval that must contain the throughput-maximizing rate."""
    return 1.0 / (2 * n_anchors * t_p), (n_anchors + 1) / (2 * n_anchors * t_p)


class RateModel:
    """p_s(lambda) with the survival probabilities computed once."""

    def __init__(self, phy, x0: GriddedPdf | None, net, include_q_equal_n: bool = False,
                 survival: np.ndarray | None = None):
        self.phy, self.net = phy, net
        self.include_q_equal_n = include_q_equal_n
        q_max = net.n_anchors if include_q_equal_n else net.n_anchors - 1
        self.survival = survival if survival is not None else survival_curve(phy, x0, q_max)
        self.t_p = packet_duration(phy)

    def p_s(self, lam):
        return packet_success_prob(self.phy, None, self.net.n_anchors, lam, self.net.p_l,
                                   include_q_equal_n=self.include_q_equal_n,
                                   survival=self.survival)

    def throughput(self, lam):
        return self.p_s(lam) * np.asarray(lam)


def optimal_rate(phy, x0: GriddedPdf | None, net, tol: float = 1e-6,
                 model: RateModel | None = None) -> RateOptimum:
    model = model or RateModel(phy, x0, net)
    lo_b, hi_b = rate_bounds(net.n_anchors, model.t_p)
    lam, peak = maximize_scalar(lambda v: float(model.throughput(v)), lo_b / 4, 4 * hi_b, tol)
    # a flat peak is located only to about sqrt(machine eps) relative
    slack = max(tol, 1e-7 * hi_b)
    if not lo_b - slack <= lam <= hi_b + slack:
        raise ModelViolationError(f"optimal rate {lam} outside [{lo_b}, {hi_b}]")
    return RateOptimum(lam, lo_b, hi_b, peak)


def _request_delay(net, mode: str, d_s: float | None) -> float:
    if mode == "periodic":
        return 0.0
    if d_s is None:
        from .geometry import Region, distance_pdf
        d_s = distance_pdf(Region.of(net)).mean()
    return d_s / net.c


def min_localization_time(phy, x0: GriddedPdf | None, net, p_ss: float | None = None,
                          mode: str | None = None, d_s: float | None = None,
                          model: RateModel | None = None) -> CtsTiming:
    """Shortest window reaching ``p_ss``, at the throughput-optimal rate.

    On demand, the request hop ``d_s`` defaults to the mean sensor-anchor
    distance.
    """
    p_ss = net.p_ss if p_ss is None else p_ss
    if not 0.0 < p_ss < 1.0:
        raise DomainError("p_ss must lie in (0, 1)")
    mode = mode or net.mode
    model = model or RateModel(phy, x0, net)
    opt = optimal_rate(phy, x0, net, model=model)
    p_ct = required_useful_prob(p_ss, net.n_anchors, net.k_required)
    rate = opt.throughput
    if rate <= 0:
        raise NumericError("zero useful-packet rate; localization impossible")
    t_t = -math.log1p(-p_ct) / rate
    t_ct = t_t + _request_delay(net, mode, d_s) + net.d_sa / net.c
    return CtsTiming(t_t, t_ct, opt.lambda_opt, p_ct)


def rate_range(phy, x0: GriddedPdf | None, net, t_t: float, p_ss: float | None = None,
               model: RateModel | None = None) -> tuple[float, float]:
    """Lowest and highest rates that still reach ``p_ss`` within ``t_t``."""
    p_ss = net.p_ss if p_ss is None else p_ss
    model = model or RateModel(phy, x0, net)
    opt = optimal_rate(phy, x0, net, model=model)
    need = -math.log1p(-required_useful_prob(p_ss, net.n_anchors, net.k_required)) / t_t
    if opt.throughput < need:
        raise DomainError(f"window {t_t} s is shorter than the minimum")
    g = lambda v: float(model.throughput(v))  # noqa: E731
    low = bisect_increasing(g, need, 0.0, opt.lambda_opt, xtol=1e-12)
    hi = 2 * opt.lambda_opt
    while g(hi) > need:
        hi *= 2
    upp = bisect_increasing(lambda v: -g(v), -need, opt.lambda_opt, hi, xtol=1e-12)
    return low, upp


def loc_prob_for(model: RateModel, net, lam, t_t):
    """Self-localization probability at rate ``lam`` over window ``t_t``."""
    p_ct = useful_packet_prob(model.p_s(lam), lam, t_t)
    return self_loc_prob(p_ct, net.n_anchors, net.k_required)

"""Path loss, received-power and interference laws, packet survival.

Received power follows ``alpha_0 * P_0 * (d_0 / d) ** n_0``; a packet
survives when its SINR, with every time-overlapping packet counted at full
power, reaches ``gamma_0``.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.stats import poisson

from .errors import DomainError
from .numerics import GriddedPdf, convolve_power

POWER_GRID_POINTS = 2 ** 16
# probability of the closest (strongest) links left off the power grid
POWER_TAIL = 1e-3
REFINE_TOL = 1e-4


def packet_duration(phy) -> float:
    """Guard time plus payload airtime, with symbol time 1/B."""
    if phy.packet_duration is not None:
        return float(phy.packet_duration)
    return phy.guard_time + (phy.bits_per_packet / phy.bits_per_symbol) / phy.bandwidth


def received_power(phy, d) -> np.ndarray:
    return phy.alpha_0 * phy.p_0 * (phy.d_0 / np.asarray(d, dtype=float)) ** phy.n_0


def _distance_cdf(dist_pdf: GriddedPdf, d_min: float):
    """CDF of the distance conditioned on ``d >= d_min``."""
    f_min = float(dist_pdf.cdf(d_min))
    top = float(dist_pdf.cdf(dist_pdf.right))
    if top - f_min <= 0:
        raise DomainError("distance density has no mass above the cutoff distance")

    def cdf(d):
        return np.clip((dist_pdf.cdf(d) - f_min) / (top - f_min), 0.0, 1.0)

    return cdf


def _inverse_distance_cdf(cdf, p: float, lo: float, hi: float) -> float:
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return hi


def received_power_pdf(phy, dist_pdf: GriddedPdf, tail_mass: float = 0.0,
                       n: int = POWER_GRID_POINTS, d_min: float | None = None) -> GriddedPdf:
    """Density of the desired-signal power for a random link distance.

    Distances below ``d_min`` (default ``d_0``) are excluded. With
    ``tail_mass > 0`` the grid stops at the power exceeded with that
    probability and the remainder is carried as the density's ``tail``;
    this keeps the grid fine where the probability actually is.
    """
    d_min = phy.d_0 if d_min is None else d_min
    if d_min <= 0:
        raise DomainError("minimum distance must be positive")
    cdf_d = _distance_cdf(dist_pdf, d_min)
    k = phy.alpha_0 * phy.p_0 * phy.d_0 ** phy.n_0

    def cdf_x(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            d_of_x = np.where(x > 0, (k / np.maximum(x, 1e-300)) ** (1.0 / phy.n_0), np.inf)
        return 1.0 - cdf_d(d_of_x)

    if tail_mass > 0:
        d_q = _inverse_distance_cdf(cdf_d, tail_mass, d_min, dist_pdf.right)
        x_top = k / d_q ** phy.n_0
        step = x_top / (n - 1)
    else:
        x_top = k / d_min ** phy.n_0
        step = x_top * 1.05 / (n - 1)
    return GriddedPdf.from_cdf(cdf_x, 0.0, step, n)


def interference_pdf(x0: GriddedPdf, q: int, limit: float | None = None) -> GriddedPdf:
    """Total power of ``q`` independent interferers."""
    if q < 1:
        raise DomainError("q must be >= 1")
    return convolve_power(x0, q, limit=limit)


def _survival(phy, x0: GriddedPdf, q: int) -> float:
    threshold = phy.gamma_0 * phy.noise_power
    if q == 0:
        return float(np.clip(x0.ccdf(threshold), 0.0, 1.0))
    interference = interference_pdf(x0, q, limit=x0.right)
    w = interference.grid + phy.noise_power
    # inner integral over the SINR is the CCDF of the desired power
    integrand = interference.mass * x0.ccdf(phy.gamma_0 * w)
    return float(np.clip(np.trapezoid(integrand, dx=interference.step), 0.0, 1.0))


def _coarsen(x0: GriddedPdf) -> GriddedPdf:
    m = x0.mass[: x0.size - x0.size % 2]
    merged = 0.5 * (m[0::2] + m[1::2])
    return GriddedPdf(x0.origin + 0.5 * x0.step, 2 * x0.step, merged, x0.tail).normalize()


def survival_given_q(phy, x0: GriddedPdf, q: int, check: bool = True) -> float:
    """P(SINR >= gamma_0) for a desired packet overlapped by ``q`` others.

    The result is recomputed on a grid half as fine; a change above 1e-4
    is reported as a warning.
    """
    if q < 0:
        raise DomainError("q must be >= 0")
    value = _survival(phy, x0, q)
    if check and q > 0 and x0.size >= 256:
        coarse = _survival(phy, _coarsen(x0), q)
        if abs(coarse - value) > REFINE_TOL:
            warnings.warn(f"survival for q={q} changed by {abs(coarse - value):.2e} "
                          "under grid refinement", RuntimeWarning, stacklevel=2)
    return value


def survival_curve(phy, x0: GriddedPdf, q_max: int) -> np.ndarray:
    """``survival_given_q`` for q = 0..q_max."""
    return np.array([survival_given_q(phy, x0, q) for q in range(q_max + 1)])


def collision_load(n_anchors: int, lam, t_p: float):
    """Mean number of packets overlapping a given one: 2 N lambda T_p."""
    return 2.0 * n_anchors * np.asarray(lam, dtype=float) * t_p


def interferer_probs(n_anchors: int, lam: float, t_p: float, q_max: int) -> np.ndarray:
    return poisson.pmf(np.arange(q_max + 1), collision_load(n_anchors, lam, t_p))


def packet_success_prob(phy, x0: GriddedPdf | None, n_anchors: int, lam, p_l: float,
                        include_q_equal_n: bool = False,
                        survival: np.ndarray | None = None):
    """Per-packet reception probability under loss and collisions.

    The interferer count is summed up to N - 1 by default, or up to N with
    ``include_q_equal_n``. ``survival`` may carry precomputed values of
    ``survival_given_q`` (at least ``q_max + 1`` of them).
    """
    if not 0.0 <= p_l <= 1.0:
        raise DomainError("p_l must lie in [0, 1]")
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0):
        raise DomainError("rate must be non-negative")
    q_max = n_anchors if include_q_equal_n else n_anchors - 1
    if survival is None:
        survival = survival_curve(phy, x0, q_max)
    survival = np.asarray(survival, dtype=float)[: q_max + 1]
    load = collision_load(n_anchors, lam_arr, packet_duration(phy))
    pq = poisson.pmf(np.arange(q_max + 1)[:, None], np.atleast_1d(load)[None, :])
    ps = (1.0 - p_l) * (survival[:, None] * pq).sum(axis=0)
    return float(ps[0]) if lam_arr.ndim == 0 else ps


def cfs_link_prob(phy, x0: GriddedPdf, p_l: float) -> float:
    """Reception probability without interference: loss times SNR exceedance."""
    if not 0.0 <= p_l <= 1.0:
        raise DomainError("p_l must lie in [0, 1]")
    return (1.0 - p_l) * survival_given_q(phy, x0, 0)


def power_model(net, phy, n: int = POWER_GRID_POINTS, tail_mass: float = POWER_TAIL
                ) -> GriddedPdf:
    """Received-power density for anchor-sensor links of ``net``'s area."""
    from .geometry import Region, distance_pdf
    return received_power_pdf(phy, distance_pdf(Region.of(net)), tail_mass=tail_mass, n=n)


def snr_ok(phy, power, interference=0.0) -> np.ndarray:
    return np.asarray(power) >= phy.gamma_0 * (np.asarray(interference) + phy.noise_power)


def min_power_margin_db(phy, d_max: float) -> float:
    """SNR margin (dB) of the weakest link at distance ``d_max``."""
    x = float(received_power(phy, d_max))
    return 10 * math.log10(x / (phy.gamma_0 * phy.noise_power))

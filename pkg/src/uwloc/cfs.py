"""Collision-free scheme: anchors fire in ID order, each after hearing its
predecessor or after a timeout of one packet plus the maximum anchor-anchor
delay when that packet is lost."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .errors import DomainError, NumericError
from .geometry import Region, distance_pdf
from .numerics import GriddedPdf, convolve, convolve_power, invert_cdf


@dataclass(frozen=True)
class CfsRealization:
    u: np.ndarray          # 1 where the packet between anchors j and j+1 is lost
    d: np.ndarray          # consecutive anchor-anchor distances
    d_s: float = 0.0       # request hop, zero for periodic localization
    d_e: float | None = None  # final hop; None -> maximum anchor-sensor distance

    def __post_init__(self):
        u = np.asarray(self.u, dtype=int)
        d = np.asarray(self.d, dtype=float)
        if u.shape != d.shape:
            raise DomainError("u and d must have the same length")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "d", d)

    @property
    def n_u(self) -> int:
        return int(self.u.sum())


@dataclass(frozen=True)
class TimeStats:
    avg: float
    low: float
    upp: float


def time_of_realization(r: CfsRealization, net, t_p: float) -> float:
    if r.u.size != net.n_anchors - 1:
        raise DomainError(f"realization has {r.u.size} links, expected {net.n_anchors - 1}")
    c = net.c
    d_e = net.d_sa if r.d_e is None else r.d_e
    return float(((1 - r.u) @ r.d) / c + net.d_aa / c * r.n_u
                 + net.n_anchors * t_p + r.d_s / c + d_e / c)


def _base_pdfs(net, dist_pdf: GriddedPdf | None):
    f_d = dist_pdf if dist_pdf is not None else distance_pdf(Region.of(net))
    return f_d.rescale(1.0 / net.c)


def _chain(f_t: GriddedPdf, links: int, mode: str) -> GriddedPdf | None:
    """Travel time of ``links`` heard hops, plus the request hop on demand."""
    parts = []
    if links > 0:
        parts.append(convolve_power(f_t, links))
    if mode == "on-demand":
        parts.append(f_t)
    if not parts:
        return None
    out = parts[0]
    for p in parts[1:]:
        out = convolve(out, p)
    return out


def _check_mode(mode: str) -> None:
    if mode not in ("periodic", "on-demand"):
        raise DomainError(f"unknown mode {mode!r}")


def loss_weights(n_anchors: int, p_l: float) -> np.ndarray:
    """P(n_u = k), k = 0..N-1."""
    return binom.pmf(np.arange(n_anchors), n_anchors - 1, p_l)


def conditional_time_pdf(net, t_p: float, n_u: int, mode: str | None = None,
                         dist_pdf: GriddedPdf | None = None) -> GriddedPdf:
    """Localization-time density given ``n_u`` lost inter-anchor packets."""
    mode = mode or net.mode
    _check_mode(mode)
    f_t = _base_pdfs(net, dist_pdf)
    shift = net.n_anchors * t_p + n_u * net.d_aa / net.c + net.d_sa / net.c
    body = _chain(f_t, net.n_anchors - 1 - n_u, mode)
    if body is None:
        return GriddedPdf.delta(shift, f_t.step)
    return body.shift(shift)


def time_pdf(net, t_p: float, p_l: float | None = None, mode: str | None = None,
             dist_pdf: GriddedPdf | None = None) -> GriddedPdf:
    """Mixture over the number of lost packets of the conditional densities."""
    mode = mode or net.mode
    _check_mode(mode)
    p_l = net.p_l if p_l is None else p_l
    n = net.n_anchors
    f_t = _base_pdfs(net, dist_pdf)
    weights = loss_weights(n, p_l)
    comps = [(w, conditional_time_pdf(net, t_p, k, mode, dist_pdf))
             for k, w in enumerate(weights) if w > 0]
    step = f_t.step
    lo = min(c.origin for _, c in comps)
    hi = max(c.right for _, c in comps)
    size = int(np.ceil((hi - lo) / step)) + 3
    origin = lo - step
    mass = np.zeros(size)
    for w, comp in comps:
        mass += w * comp.resample(origin, step, size).mass
    return GriddedPdf(origin, step, mass).normalize()


def min_time(net, t_p: float, p_l: float | None = None, p_tt: float | None = None,
             mode: str | None = None, dist_pdf: GriddedPdf | None = None) -> float:
    p_tt = net.p_tt if p_tt is None else p_tt
    if not 0.0 < p_tt < 1.0:
        raise DomainError("p_tt must lie in (0, 1)")
    return invert_cdf(time_pdf(net, t_p, p_l, mode, dist_pdf), p_tt)


def average_time(net, t_p: float, p_l: float | None = None, mode: str | None = None,
                 d_avg: float | None = None, d_s_avg: float | None = None) -> float:
    mode = mode or net.mode
    p_l = net.p_l if p_l is None else p_l
    if d_avg is None:
        d_avg = distance_pdf(Region.of(net)).mean()
    if d_s_avg is None:
        d_s_avg = d_avg if mode == "on-demand" else 0.0
    n, c = net.n_anchors, net.c
    return (n * t_p + (n - 1) * (1 - p_l) * d_avg / c + (n - 1) * p_l * net.d_aa / c
            + net.d_sa / c + d_s_avg / c)


def upper_time(net, t_p: float) -> float:
    """Every inter-anchor packet lost and the requester at maximum range."""
    n, c = net.n_anchors, net.c
    return n * t_p + (n - 1) * net.d_aa / c + 2 * net.d_sa / c


def time_stats(net, t_p: float, p_l: float | None = None, p_tt: float | None = None,
               mode: str | None = None, dist_pdf: GriddedPdf | None = None) -> TimeStats:
    p_tt = net.p_tt if p_tt is None else p_tt
    f_d = dist_pdf if dist_pdf is not None else distance_pdf(Region.of(net))
    avg = average_time(net, t_p, p_l, mode, d_avg=f_d.mean())
    low = invert_cdf(conditional_time_pdf(net, t_p, 0, mode, f_d), p_tt)
    return TimeStats(avg=avg, low=low, upp=upper_time(net, t_p))


def required_anchor_count(k: int, p_cf: float, p_ss: float, n_max: int = 200) -> int:
    """Smallest N >= K whose binomial tail P(at least K of N) reaches ``p_ss``."""
    if not 0.0 < p_cf <= 1.0:
        raise DomainError("p_cf must lie in (0, 1]")
    if k < 1:
        raise DomainError("k must be >= 1")
    for n in range(k, n_max + 1):
        # sf(k - 1) = P(X >= k); the tiny slack absorbs round-off at p_cf = 1
        if binom.sf(k - 1, n, p_cf) >= p_ss - 1e-12:
            return n
    raise NumericError(f"no anchor count up to {n_max} reaches P_ss={p_ss} with p_CF={p_cf}")

"""Fisher information and Cramér-Rao bounds for both schedules.

Each anchor contributes

    sigma^-2 grad(f) grad(f)^T + w sigma^-4 grad(sigma^2) grad(sigma^2)^T

with ``f = d / c`` and ``sigma^2 = k_E d^n_0``. For Gaussian noise whose
variance depends on the parameter the exact weight is ``w = 1/2``; ``w = 1``
is kept available as ``variance_weight``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.stats import binom

from .config import SOUND_SPEED
from .errors import DomainError, SingularFimError

VARIANCE_WEIGHT = 0.5


@dataclass(frozen=True)
class CrbResult:
    per_axis: np.ndarray
    total: float


@dataclass(frozen=True)
class FimResult:
    fim: np.ndarray
    p_loc: float
    terms: np.ndarray = field(repr=False)  # per-anchor matrices b_j
    g_ct: float | None = None

    @property
    def crb(self) -> CrbResult:
        return crb_from_fim(self.fim)


def tof_model(x, anchor, phy, c: float = SOUND_SPEED):
    """Range-time ``f``, its gradient, the noise variance and its gradient."""
    x = np.asarray(x, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    diff = x - anchor
    d = float(np.linalg.norm(diff))
    if d == 0.0:
        raise DomainError("sensor coincides with anchor")
    unit = diff / d
    var = phy.k_e * d ** phy.n_0
    dvar = phy.n_0 * phy.k_e * d ** (phy.n_0 - 1) * unit
    return d / c, unit / c, var, dvar


def per_anchor_term(x, anchor, phy, c: float = SOUND_SPEED,
                    variance_weight: float = VARIANCE_WEIGHT) -> np.ndarray:
    _, df, var, dvar = tof_model(x, anchor, phy, c)
    if var <= 0:
        raise DomainError("noise variance must be positive for a finite bound")
    return np.outer(df, df) / var + variance_weight * np.outer(dvar, dvar) / var ** 2


def _terms(x, anchors, phy, c, variance_weight) -> np.ndarray:
    return np.array([per_anchor_term(x, a, phy, c, variance_weight) for a in anchors])


def _subset_mixture(terms: np.ndarray, p: float, k: int) -> tuple[np.ndarray, float]:
    """Sum over anchor subsets of size >= k of (sum of their terms) times the
    subset probability; also returns the total probability."""
    n = terms.shape[0]
    fim = np.zeros(terms.shape[1:])
    p_loc = 0.0
    for size in range(k, n + 1):
        w = p ** size * (1 - p) ** (n - size)
        for subset in combinations(range(n), size):
            fim += w * terms[list(subset)].sum(axis=0)
            p_loc += w
    return fim, p_loc


def fim_cfs(x, anchors, phy, p_cf: float, k: int, c: float = SOUND_SPEED,
            variance_weight: float = VARIANCE_WEIGHT) -> FimResult:
    """Expected FIM over delivery patterns that allow localization (each
    anchor heard at most once, with probability ``p_cf``)."""
    anchors = np.asarray(anchors, dtype=float)
    if anchors.shape[0] < k:
        raise DomainError("fewer anchors than required packets")
    terms = _terms(x, anchors, phy, c, variance_weight)
    fim, p_loc = _subset_mixture(terms, p_cf, k)
    if p_loc <= 0:
        raise SingularFimError("localization probability is zero")
    return FimResult(fim / p_loc, p_loc, terms)


def g_ct(mean_count: float) -> float:
    """Mean packet count from an anchor given that it was heard at all."""
    if mean_count <= 0:
        raise DomainError("mean packet count must be positive")
    return mean_count / -np.expm1(-mean_count)


def fim_cts(x, anchors, phy, p_s: float, lam: float, t_t: float, k: int,
            c: float = SOUND_SPEED, variance_weight: float = VARIANCE_WEIGHT) -> FimResult:
    """Expected FIM with Poisson packet counts of mean ``p_s lam t_t``.

    Only whether each anchor was heard matters once the count is replaced by
    its conditional mean, so the sum runs over the same subsets as for the
    collision-free case.
    """
    mu = p_s * lam * t_t
    if mu <= 0:
        raise DomainError("p_s * lambda * T_T must be positive")
    anchors = np.asarray(anchors, dtype=float)
    if anchors.shape[0] < k:
        raise DomainError("fewer anchors than required packets")
    terms = _terms(x, anchors, phy, c, variance_weight)
    heard = -np.expm1(-mu)
    fim, p_loc = _subset_mixture(terms, heard, k)
    if p_loc <= 0:
        raise SingularFimError("localization probability is zero")
    g = g_ct(mu)
    return FimResult(g * fim / p_loc, p_loc, terms, g)


def fim_cts_bruteforce(x, anchors, phy, p_s: float, lam: float, t_t: float, k: int,
                       q_cap: int = 8, c: float = SOUND_SPEED,
                       variance_weight: float = VARIANCE_WEIGHT) -> np.ndarray:
    """Direct sum over per-anchor counts 0..q_cap (reference computation)."""
    from scipy.stats import poisson
    anchors = np.asarray(anchors, dtype=float)
    n = anchors.shape[0]
    terms = _terms(x, anchors, phy, c, variance_weight)
    pmf = poisson.pmf(np.arange(q_cap + 1), p_s * lam * t_t)
    grids = np.meshgrid(*[np.arange(q_cap + 1)] * n, indexing="ij")
    q = np.stack([g.ravel() for g in grids], axis=1)
    ok = (q > 0).sum(axis=1) >= k
    q = q[ok]
    w = np.prod(pmf[q], axis=1)
    fim = np.einsum("s,sj,jab->ab", w, q.astype(float), terms)
    p_loc = binom.sf(k - 1, n, -np.expm1(-p_s * lam * t_t))
    return fim / p_loc


def crb_from_fim(fim) -> CrbResult:
    fim = np.asarray(fim, dtype=float)
    # relative threshold: FIM entries scale like 1/(k_E c^2)
    if np.linalg.cond(fim) > 1e12:
        raise SingularFimError("Fisher information is singular (collinear anchors?)")
    inv = np.linalg.inv(fim)
    per_axis = np.diag(inv).copy()
    return CrbResult(per_axis, float(per_axis.sum()))

"""Time-of-flight measurements and the damped Gauss-Newton self-localizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SOUND_SPEED
from .errors import DomainError


@dataclass(frozen=True)
class MeasurementSet:
    """Stacked one-way (``kind='tof'``) or round-trip (``kind='rtt'``) times.

    Row ``l`` belongs to anchor ``anchor_ids[l]`` located at
    ``anchor_positions[l]``; ``variances`` are the noise variances used to
    generate the values.
    """

    anchor_ids: np.ndarray
    anchor_positions: np.ndarray
    values: np.ndarray
    variances: np.ndarray
    kind: str = "tof"
    c: float = SOUND_SPEED

    @property
    def q(self) -> int:
        return int(self.values.size)

    def counts(self, n_anchors: int | None = None) -> np.ndarray:
        """Per-anchor measurement counts q_j."""
        n = n_anchors if n_anchors is not None else (int(self.anchor_ids.max()) + 1 if self.q else 0)
        return np.bincount(self.anchor_ids, minlength=n)

    @property
    def distinct_anchors(self) -> int:
        return int(np.unique(self.anchor_ids).size)

    def one_way(self) -> "MeasurementSet":
        """Round trips mapped to one-way equivalents (half the time, a quarter
        of the variance)."""
        if self.kind == "tof":
            return self
        return MeasurementSet(self.anchor_ids, self.anchor_positions, self.values / 2,
                              self.variances / 4, "tof", self.c)


def tof_variance(phy, d) -> np.ndarray:
    return phy.k_e * np.asarray(d, dtype=float) ** phy.n_0


def generate_measurements(truth, anchors, counts, phy, rng: np.random.Generator,
                          kind: str = "tof", c: float = SOUND_SPEED) -> MeasurementSet:
    """``counts[j]`` noisy range measurements to anchor ``j``.

    A round trip carries two independent one-way noise terms, so its
    variance is twice the one-way value.
    """
    truth = np.asarray(truth, dtype=float)
    anchors = np.asarray(anchors, dtype=float)
    counts = np.asarray(counts, dtype=int)
    if np.any(counts < 0):
        raise DomainError("counts must be non-negative")
    if kind not in ("tof", "rtt"):
        raise DomainError(f"unknown measurement kind {kind!r}")
    ids = np.repeat(np.arange(anchors.shape[0]), counts)
    pos = anchors[ids]
    d = _dist(truth, pos)
    factor = 1.0 if kind == "tof" else 2.0
    var = factor * tof_variance(phy, d)
    values = factor * d / c + rng.standard_normal(ids.size) * np.sqrt(var)
    return MeasurementSet(ids, pos, values, var, kind, c)


def _dist(x, pos):
    dim = pos.shape[1] if pos.ndim == 2 else x.size
    return np.linalg.norm(pos - _pad(x, dim), axis=-1)


def _pad(x, dim):
    x = np.asarray(x, dtype=float)
    if x.size < dim:
        x = np.concatenate([x, np.zeros(dim - x.size)])
    return x


def initial_guess(ms: MeasurementSet) -> np.ndarray:
    """Centroid of the distinct anchors that contributed measurements."""
    if ms.q == 0:
        raise DomainError("no measurements to start from")
    _, first = np.unique(ms.anchor_ids, return_index=True)
    return ms.anchor_positions[first].mean(axis=0)


@dataclass(frozen=True)
class GaussNewtonSettings:
    eta: float = 0.2
    max_iter: int = 50
    eps: float = 1e-4
    # also start from the linearized fix and keep the lower-cost result
    multistart: bool = True

    def __post_init__(self):
        if not (self.eta > 0 and self.max_iter >= 1 and self.eps > 0):
            raise DomainError("need eta > 0, max_iter >= 1, eps > 0")


@dataclass(frozen=True)
class GaussNewtonResult:
    estimate: np.ndarray
    iterations: int
    final_step: float
    localizable: bool
    failed: bool = False
    cost: float = float("nan")


def linear_guess(ms: MeasurementSet) -> np.ndarray | None:
    """Closed-form fix from differenced squared ranges, or None when the
    anchors do not span the plane."""
    ms = ms.one_way()
    _, first = np.unique(ms.anchor_ids, return_index=True)
    if first.size < ms.anchor_positions.shape[1] + 1:
        return None
    # average repeated measurements per anchor before differencing
    r = np.array([ms.values[ms.anchor_ids == ms.anchor_ids[i]].mean() for i in first]) * ms.c
    a = ms.anchor_positions[first]
    lhs = 2 * (a[1:] - a[0])
    rhs = r[0] ** 2 - r[1:] ** 2 + np.sum(a[1:] ** 2, axis=1) - np.sum(a[0] ** 2)
    sol, _, rank, _ = np.linalg.lstsq(lhs, rhs, rcond=None)
    return sol if rank == a.shape[1] else None


def _cost(ms: MeasurementSet, x) -> float:
    return float(np.sum((np.linalg.norm(x - ms.anchor_positions, axis=1) / ms.c - ms.values) ** 2))


def gauss_newton(ms: MeasurementSet, settings: GaussNewtonSettings = GaussNewtonSettings(),
                 k_required: int = 3, x0=None) -> GaussNewtonResult:
    """Unweighted least-squares fit of ranges to anchor positions.

    Iterates ``x <- x - eta (J^T J)^-1 J^T (f(x) - t)`` until the step is
    shorter than ``eps`` or ``max_iter`` is reached. With fewer than
    ``k_required`` distinct anchors the best-effort estimate is returned
    with ``localizable=False``.

    With ``settings.multistart`` and no explicit ``x0`` a second run starts
    from ``linear_guess`` and the fixed point of lower residual cost wins.
    """
    if ms.q == 0:
        raise DomainError("empty measurement set")
    ms = ms.one_way()
    first = _run(ms, settings, k_required, initial_guess(ms) if x0 is None else x0)
    if x0 is not None or not settings.multistart:
        return first
    start = linear_guess(ms)
    if start is None or not np.all(np.isfinite(start)):
        return first
    second = _run(ms, settings, k_required, start)
    if second.failed:
        return first
    if first.failed or second.cost < first.cost:
        return second
    return first


def _run(ms: MeasurementSet, settings: GaussNewtonSettings, k_required: int, x0
         ) -> GaussNewtonResult:
    anchors, t, c = ms.anchor_positions, ms.values, ms.c
    x = np.array(x0, dtype=float)
    localizable = ms.distinct_anchors >= k_required
    step_len = np.inf
    failed = False
    it = 0
    while it < settings.max_iter and step_len >= settings.eps:
        diff = x - anchors
        d = np.maximum(np.linalg.norm(diff, axis=1), 1e-9)
        jac = diff / (c * d[:, None])
        resid = d / c - t
        normal = jac.T @ jac
        try:
            delta = _solve(normal, jac.T @ resid)
        except np.linalg.LinAlgError:
            failed = True
            break
        x_new = x - settings.eta * delta
        step_len = float(np.linalg.norm(x_new - x))
        x = x_new
        it += 1
    return GaussNewtonResult(x, it, step_len, localizable, failed, _cost(ms, x))


def _solve(normal: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    # a single ridge retry for (near-)collinear geometry; persistent
    # singularity is reported to the caller
    if np.linalg.cond(normal) < 1e12:
        return np.linalg.solve(normal, rhs)
    ridge = normal + 1e-12 * np.trace(normal) * np.eye(normal.shape[0])
    if np.linalg.cond(ridge) >= 1e15:
        raise np.linalg.LinAlgError("normal matrix is singular")
    return np.linalg.solve(ridge, rhs)

"""Gridded densities and the scalar solvers used by the analytic modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigError, DomainError, NumericError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GriddedPdf:
    """A one-dimensional density sampled on a uniform grid.

    ``mass`` holds density values at ``origin + i * step``. Integrals use the
    trapezoid rule. ``tail`` is probability that lies beyond the right edge
    of the grid and is not represented; a proper density has ``tail == 0``
    and integrates to one.
    """

    origin: float
    step: float
    mass: np.ndarray = field(repr=False)
    tail: float = 0.0

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        if mass.ndim != 1 or mass.size == 0:
            raise ConfigError("mass must be a non-empty 1-D array")
        if not self.step > 0:
            raise ConfigError(f"step must be positive, got {self.step}")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ConfigError("density values must be finite and non-negative")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_cdf(cls, cdf: Callable[[np.ndarray], np.ndarray], origin: float,
                 step: float, n: int) -> "GriddedPdf":
        """Bin a distribution given by its CDF; each grid point owns the
        probability of the cell centred on it."""
        x = origin + step * np.arange(n)
        edges = np.concatenate([x - step / 2, [x[-1] + step / 2]])
        cells = np.clip(np.diff(cdf(edges)), 0.0, None)
        tail = float(np.clip(1.0 - cdf(np.array([edges[-1]]))[0], 0.0, 1.0))
        return cls(origin, step, cells / step, tail).normalize()

    @classmethod
    def delta(cls, at: float, step: float) -> "GriddedPdf":
        return cls(at, step, np.array([1.0 / step]))

    @property
    def size(self) -> int:
        return self.mass.size

    @property
    def grid(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.mass.size)

    @property
    def right(self) -> float:
        return self.origin + self.step * (self.mass.size - 1)

    def total(self) -> float:
        """Trapezoid integral of the represented part."""
        m = self.mass
        if m.size == 1:
            return float(m[0] * self.step)
        return float(self.step * (m.sum() - 0.5 * (m[0] + m[-1])))

    def normalize(self) -> "GriddedPdf":
        """Rescale so that the grid integral plus ``tail`` equals one."""
        tot = self.total()
        if tot <= 0:
            raise NumericError("cannot normalize a density with zero mass")
        return GriddedPdf(self.origin, self.step,
                          self.mass * ((1.0 - self.tail) / tot), self.tail)

    def cdf_values(self) -> np.ndarray:
        """Cumulative trapezoid at the grid points, excluding the tail."""
        m = self.mass
        if m.size == 1:
            return np.array([m[0] * self.step])
        inc = 0.5 * self.step * (m[1:] + m[:-1])
        return np.concatenate([[0.0], np.cumsum(inc)])

    def cdf(self, x) -> np.ndarray:
        return np.interp(x, self.grid, self.cdf_values(), left=0.0,
                         right=1.0 - self.tail)

    def ccdf(self, x) -> np.ndarray:
        """P(X >= x). Inside the grid the tail mass counts as exceeding
        ``x``; beyond the right edge the result is 0."""
        c = self.cdf_values()
        top = c[-1] + self.tail
        return np.interp(x, self.grid, top - c, left=top, right=0.0)

    def mean(self) -> float:
        x, m = self.grid, self.mass
        if m.size == 1:
            return float(x[0])
        return float(np.trapezoid(x * m, dx=self.step) / self.total())

    def support(self, eps: float = 0.0) -> tuple[float, float]:
        nz = np.flatnonzero(self.mass > eps * self.mass.max())
        x = self.grid
        return float(x[nz[0]]), float(x[nz[-1]])

    def shift(self, delta: float) -> "GriddedPdf":
        return GriddedPdf(self.origin + delta, self.step, self.mass, self.tail)

    def rescale(self, factor: float) -> "GriddedPdf":
        """Density of ``factor * X`` for ``factor > 0``."""
        if not factor > 0:
            raise DomainError("rescale factor must be positive")
        return GriddedPdf(self.origin * factor, self.step * factor,
                          self.mass / factor, self.tail)

    def resample(self, origin: float, step: float, n: int) -> "GriddedPdf":
        """Linear interpolation onto another grid (mass preserved by a final
        normalization). Single-point densities are split between the two
        nearest target points."""
        x = origin + step * np.arange(n)
        if self.mass.size == 1:
            pos = (self.origin - origin) / step
            i = int(math.floor(pos))
            if not 0 <= i < n - 1:
                raise DomainError("point mass falls outside the target grid")
            frac = pos - i
            out = np.zeros(n)
            out[i] = (1.0 - frac) / step
            out[i + 1] = frac / step
            return GriddedPdf(origin, step, out, self.tail)
        out = np.interp(x, self.grid, self.mass, left=0.0, right=0.0)
        return GriddedPdf(origin, step, out, self.tail).normalize()


def _same_step(a: GriddedPdf, b: GriddedPdf) -> None:
    if not math.isclose(a.step, b.step, rel_tol=1e-9):
        raise ConfigError(f"grid steps differ: {a.step} vs {b.step}")


def convolve(a: GriddedPdf, b: GriddedPdf, limit: float | None = None) -> GriddedPdf:
    """Density of the sum of two independent variables.

    The discrete linear convolution is renormalized to the product of the
    input masses (one for proper densities). With ``limit`` the result is cut
    at that abscissa and the discarded probability is moved to ``tail``;
    the retained part is then exact, because summands are non-negative
    offsets from the grid origins.
    """
    _same_step(a, b)
    if a.size * b.size <= 4096 or min(a.size, b.size) < 64:
        raw = np.convolve(a.mass, b.mass)
    else:
        raw = fftconvolve(a.mass, b.mass)
    raw = np.clip(raw, 0.0, None) * a.step
    represented = (1.0 - a.tail) * (1.0 - b.tail)
    out = GriddedPdf(a.origin + b.origin, a.step, raw, 1.0 - represented)
    if out.total() <= 0:
        raise NumericError("convolution produced zero mass")
    out = out.normalize()
    if limit is not None and limit < out.right:
        keep = int(math.floor((limit - out.origin) / out.step)) + 1
        if keep < 2:
            raise DomainError("limit leaves fewer than two grid points")
        cut = GriddedPdf(out.origin, out.step, out.mass[:keep], 0.0)
        out = GriddedPdf(out.origin, out.step, cut.mass,
                         max(0.0, 1.0 - cut.total()))
    return out


def convolve_power(a: GriddedPdf, k: int, limit: float | None = None) -> GriddedPdf:
    """k-fold self-convolution (k >= 1)."""
    if k < 1:
        raise DomainError("k must be >= 1")
    out = a
    for _ in range(k - 1):
        out = convolve(out, a, limit=limit)
    return out


def invert_cdf(f: GriddedPdf, p: float) -> float:
    """Smallest grid abscissa whose cumulative probability reaches ``p``."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {p}")
    x = f.grid
    if p == 0.0:
        return float(x[np.flatnonzero(f.mass > 0)[0]])
    cdf = f.cdf_values() / (f.total() + f.tail)
    # absorb trapezoid round-off at the top of the CDF
    idx = int(np.searchsorted(cdf, p - 1e-12, side="left"))
    return float(x[min(idx, x.size - 1)])


def maximize_scalar(fun: Callable[[float], float], lo: float, hi: float,
                    tol: float = 1e-6) -> tuple[float, float]:
    """Golden-section search for the maximum of ``fun`` on ``[lo, hi]``.

    Returns ``(argmax, max)``; the bracket shrinks until narrower than
    ``tol``.
    """
    if not lo < hi:
        raise DomainError(f"need lo < hi, got [{lo}, {hi}]")

    def ev(x):
        v = float(fun(x))
        if not math.isfinite(v):
            raise NumericError(f"objective is not finite at {x}")
        return v

    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = ev(c), ev(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = ev(d)
    # the endpoints are candidates too when the maximum sits on the boundary
    cands = [(ev(lo), lo), (ev(hi), hi), (fc, c), (fd, d), (ev(0.5 * (a + b)), 0.5 * (a + b))]
    best = max(cands, key=lambda t: t[0])
    return best[1], best[0]


def bisect_increasing(fun: Callable[[float], float], target: float, lo: float,
                      hi: float, xtol: float = 1e-12, maxiter: int = 500) -> float:
    """Solve ``fun(x) = target`` for a non-decreasing ``fun`` on ``[lo, hi]``."""
    flo, fhi = fun(lo), fun(hi)
    if not flo <= target <= fhi:
        raise NumericError(f"target {target} not bracketed by [{flo}, {fhi}]")
    for _ in range(maxiter):
        if hi - lo <= xtol:
            break
        mid = 0.5 * (lo + hi)
        if fun(mid) < target:
            lo = mid
        else:
            hi = mid
    return hi

"""Rectangular operating area: node placement and the node-to-node distance law.

Positions are plain ``(n, 2)`` arrays of metres; an optional third column
(depth) is accepted by the localizer and the bound computations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .numerics import GriddedPdf

GRID_POINTS = 2 ** 14
GRID_PAD = 0.05


@dataclass(frozen=True)
class Region:
    d_x: float
    d_y: float

    def __post_init__(self):
        if not self.d_x > 0 or not self.d_y >= 0:
            raise DomainError(f"invalid region {self.d_x} x {self.d_y}")

    @property
    def diagonal(self) -> float:
        return math.hypot(self.d_x, self.d_y)

    @classmethod
    def of(cls, net) -> "Region":
        return cls(net.d_x, net.d_y)

    def ordered(self) -> tuple[float, float]:
        """(long side, short side); the closed form assumes the short side is y."""
        return max(self.d_x, self.d_y), min(self.d_x, self.d_y)


# below this aspect ratio the rectangle is treated as a segment; the
# two-dimensional formulas lose all precision there anyway
THIN_RATIO = 1e-9


def _is_segment(a: float, b: float) -> bool:
    return b <= THIN_RATIO * a


def angle_limits(region: Region, d) -> tuple[np.ndarray, np.ndarray]:
    """Start and end polar angles of the admissible offset directions."""
    a, b = region.ordered()
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        th_s = np.where(d > a, np.arccos(np.clip(a / d, -1, 1)), 0.0)
        th_e = np.where(d > b, np.arcsin(np.clip(b / d, -1, 1)), np.pi / 2)
    return th_s, th_e


def distance_density(region: Region, d) -> np.ndarray:
    """Density of the distance between two independent uniform points."""
    a, b = region.ordered()
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    inside = (d >= 0) & (d <= math.hypot(a, b))
    if _is_segment(a, b):
        # segment of length a: triangular law of |U1 - U2|
        inside = (d >= 0) & (d <= a)
        out[inside] = 2.0 * (a - d[inside]) / a ** 2
        return out
    z = d[inside]
    th_s, th_e = angle_limits(region, z)
    bracket = (z ** 2 * (np.sin(th_e) ** 2 - np.sin(th_s) ** 2)
               + 2 * a * b * (th_e - th_s)
               + 2 * a * z * (np.cos(th_e) - np.cos(th_s))
               - 2 * b * z * (np.sin(th_e) - np.sin(th_s)))
    out[inside] = np.clip(2 * z / (a ** 2 * b ** 2) * bracket, 0.0, None)
    return out


def distance_cdf(region: Region, d) -> np.ndarray:
    """Closed-form CDF obtained by integrating the density branch by branch."""
    a, b = region.ordered()
    d = np.clip(np.asarray(d, dtype=float), 0.0, None)
    if _is_segment(a, b):
        z = np.minimum(d, a)
        return (2 * a * z - z ** 2) / a ** 2
    diag = math.hypot(a, b)
    k = 2.0 / (a ** 2 * b ** 2)

    def near(z):
        return k * (math.pi * a * b * z ** 2 / 2 - 2 * (a + b) * z ** 3 / 3 + z ** 4 / 4)

    def mid(z):
        r = np.sqrt(np.maximum(z ** 2 - b ** 2, 0.0))
        return k * (-b ** 2 * z ** 2 / 2
                    + 2 * a * b * (z ** 2 / 2 * np.arcsin(np.minimum(b / z, 1.0)) + b / 2 * r)
                    + 2 * a / 3 * r ** 3 - 2 * a * z ** 3 / 3)

    def far(z):
        ry = np.sqrt(np.maximum(z ** 2 - b ** 2, 0.0))
        rx = np.sqrt(np.maximum(z ** 2 - a ** 2, 0.0))
        return k * (-(a ** 2 + b ** 2) * z ** 2 / 2 - z ** 4 / 4
                    + 2 * a * b * (z ** 2 / 2 * np.arcsin(np.minimum(b / z, 1.0)) + b / 2 * ry
                                   - z ** 2 / 2 * np.arccos(np.minimum(a / z, 1.0)) + a / 2 * rx)
                    + 2 * a / 3 * ry ** 3 + 2 * b / 3 * rx ** 3)

    f_b = near(b)
    f_a = f_b + mid(a) - mid(b)
    out = np.where(d <= b, near(np.minimum(d, b)),
                   np.where(d <= a, f_b + mid(np.clip(d, b, a)) - mid(b),
                            f_a + far(np.clip(d, a, diag)) - far(a)))
    return np.clip(out, 0.0, 1.0)


def distance_pdf(region: Region, n: int = GRID_POINTS, pad: float = GRID_PAD) -> GriddedPdf:
    """Distance density on ``n`` points spanning the support plus padding."""
    top = region.diagonal if region.d_y > 0 and region.d_x > 0 else max(region.d_x, region.d_y)
    step = top * (1.0 + pad) / (n - 1)
    return GriddedPdf.from_cdf(lambda x: distance_cdf(region, x), 0.0, step, n)


def mean_distance(region: Region, pdf: GriddedPdf | None = None) -> float:
    return (pdf if pdf is not None else distance_pdf(region)).mean()


def sample_positions(region: Region, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. uniform points as an array of shape ``(count, 2)``."""
    if count < 0:
        raise DomainError("count must be non-negative")
    return rng.uniform(0.0, 1.0, size=(count, 2)) * np.array([region.d_x, region.d_y])

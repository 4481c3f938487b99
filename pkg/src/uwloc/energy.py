"""Average per-localization energy of the anchors under each schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import packet_duration
from .errors import DomainError


@dataclass(frozen=True)
class EnergyReport:
    scheme: str
    transmit_energy: float
    listen_energy: float

    def __post_init__(self):
        if self.transmit_energy < 0 or self.listen_energy < 0:
            raise DomainError("energies must be non-negative")

    @property
    def total(self) -> float:
        return self.transmit_energy + self.listen_energy


def _mean_distance(net) -> float:
    from .geometry import Region, mean_distance
    return mean_distance(Region.of(net))


def mean_hop_time(net, d_avg: float, p_l: float) -> float:
    """Expected wait per chain link: a heard hop, or the full timeout on loss."""
    return ((1.0 - p_l) * d_avg + p_l * net.d_aa) / net.c


def listen_times_cfs(net, d_avg: float | None = None, p_l: float | None = None) -> np.ndarray:
    """Mean receiver-on time of each anchor in firing order: ``(j-1)`` hops."""
    p_l = net.p_l if p_l is None else p_l
    d_avg = _mean_distance(net) if d_avg is None else d_avg
    return np.arange(net.n_anchors) * mean_hop_time(net, d_avg, p_l)


def avg_energy_cfs(net, phy, d_avg: float | None = None, p_l: float | None = None) -> EnergyReport:
    p_l = net.p_l if p_l is None else p_l
    if not 0.0 <= p_l <= 1.0:
        raise DomainError("p_l must lie in [0, 1]")
    tx = net.n_anchors * packet_duration(phy) * phy.p_0
    listen = phy.p_listen * float(listen_times_cfs(net, d_avg, p_l).sum())
    return EnergyReport("CFS", tx, listen)


def avg_energy_cts(net, phy, lam: float, t_t: float) -> EnergyReport:
    # anchors never listen in the collision-tolerant schedule
    if lam < 0 or t_t < 0:
        raise DomainError("lambda and T_T must be non-negative")
    return EnergyReport("CTS", lam * t_t * net.n_anchors * packet_duration(phy) * phy.p_0, 0.0)

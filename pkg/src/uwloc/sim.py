"""Event-level Monte Carlo of both schedules.

A trial places anchors and one sensor, plays out the transmissions with
link losses, collisions and measurement noise, and lets the sensor run the
Gauss-Newton solver on whatever it received. Campaigns derive one RNG
stream per trial from a master seed, so results do not depend on the
order in which trials run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import packet_duration, received_power
from .crb import _terms, crb_from_fim
from .errors import DomainError, SingularFimError
from .geometry import Region, sample_positions
from .localization import GaussNewtonSettings, gauss_newton, generate_measurements

TIME_QUANTILES = (0.1, 0.5, 0.9)


@dataclass(frozen=True)
class TrialRecord:
    scheme: str
    localization_time: float
    success: bool
    error: float                 # nan unless localized
    counts: np.ndarray
    transmit_energy: float
    listen_energy: float
    crb_total: float = math.nan  # bound for the delivered pattern
    packets_counted: int = 0     # CTS: interior packets used for p_s
    packets_received: int = 0
    thinned: int = 0

    @property
    def energy(self) -> float:
        return self.transmit_energy + self.listen_energy


def ring_layout(region: Region, n: int, scale: float = 0.4) -> np.ndarray:
    """``n`` anchors evenly spaced on an ellipse around the area centre.

    No three points on an ellipse are collinear, which keeps every
    localizable subset well conditioned.
    """
    ang = 2 * np.pi * np.arange(n) / n + np.pi / 2
    centre = np.array([region.d_x, region.d_y]) / 2
    return centre + scale * np.stack([region.d_x * np.cos(ang), region.d_y * np.sin(ang)], axis=1)


def _positions(net, rng, anchors, sensor):
    region = Region.of(net)
    a = sample_positions(region, net.n_anchors, rng) if anchors is None else np.asarray(anchors, float)
    if a.shape[0] != net.n_anchors:
        raise DomainError(f"expected {net.n_anchors} anchor positions, got {a.shape[0]}")
    s = sample_positions(region, 1, rng)[0] if sensor is None else np.asarray(sensor, float)
    return a, s


def _localize(net, phy, anchors, sensor, counts, rng, settings, kind="tof"):
    """Solve from the delivered counts; returns (success, error, crb_total)."""
    distinct = int(np.count_nonzero(counts))
    if distinct < net.k_required:
        return False, math.nan, math.nan
    ms = generate_measurements(sensor, anchors, counts, phy, rng, kind=kind, c=net.c)
    res = gauss_newton(ms, settings, net.k_required)
    if res.failed or not np.all(np.isfinite(res.estimate)):
        return True, math.nan, math.nan
    try:
        terms = _terms(sensor, anchors, phy, net.c, 0.5)
        crb = crb_from_fim(np.einsum("j,jab->ab", counts.astype(float), terms)).total
    except (SingularFimError, DomainError):
        crb = math.nan
    return True, float(np.linalg.norm(res.estimate - sensor)), crb


def run_cfs_trial(net, phy, rng: np.random.Generator, mode: str | None = None,
                  anchors=None, sensor=None, forced_losses=None, waiting: str = "chained",
                  localize: bool = True, settings: GaussNewtonSettings = GaussNewtonSettings()
                  ) -> TrialRecord:
    """One collision-free round.

    Anchor ``j+1`` fires as soon as it has received anchor ``j``'s packet.
    When that packet is lost it falls back on a timeout. Under
    ``waiting="chained"`` the timeout runs ``T_p + D_aa/c`` from anchor
    ``j``'s scheduled emission. Under ``"last_heard"`` it runs
    ``(j+1-k)(T_p + D_aa/c)`` from the emission of the latest anchor ``k``
    it did hear. Every earlier anchor is then audible, each with its own
    loss draw.

    ``forced_losses`` lists link indices (0-based, link ``j`` joins anchors
    ``j`` and ``j+1``) that are lost regardless of ``p_l``.
    """
    mode = mode or net.mode
    if mode not in ("periodic", "on-demand"):
        raise DomainError(f"unknown mode {mode!r}")
    if waiting not in ("chained", "last_heard"):
        raise DomainError(f"unknown waiting rule {waiting!r}")
    n, c, t_p = net.n_anchors, net.c, packet_duration(phy)
    anchors, sensor = _positions(net, rng, anchors, sensor)
    forced = set(forced_losses or ())
    timeout = t_p + net.d_aa / c

    t = np.empty(n)
    t[0] = np.linalg.norm(sensor - anchors[0]) / c if mode == "on-demand" else 0.0
    listen = np.zeros(n)
    for j in range(1, n):
        hop = np.linalg.norm(anchors[j] - anchors[j - 1]) / c
        lost = (j - 1) in forced or rng.random() < net.p_l
        if not lost:
            t[j] = t[j - 1] + t_p + hop
        elif waiting == "chained":
            t[j] = t[j - 1] + timeout
        else:
            k = j - 2
            while k >= 0 and rng.random() < net.p_l:
                k -= 1
            t[j] = t[k] + (j - k) * timeout if k >= 0 else t[0] + j * timeout
        # receiver on while waiting, off during the others' airtime
        listen[j] = t[j] - t[0] - j * t_p

    finish = t[-1] + t_p + net.d_sa / c
    d = np.linalg.norm(anchors - sensor, axis=1)
    delivered = (rng.random(n) >= net.p_l) & (received_power(phy, d) >= phy.gamma_0 * phy.noise_power)
    counts = delivered.astype(int)
    tx = n * t_p * phy.p_0
    if localize:
        ok, err, crb = _localize(net, phy, anchors, sensor, counts, rng, settings)
    else:
        ok, err, crb = bool(delivered.sum() >= net.k_required), math.nan, math.nan
    return TrialRecord("CFS", float(finish), ok, err, counts, tx,
                       phy.p_listen * float(listen.sum()), crb)


def _thin(times: np.ndarray, gap: float) -> np.ndarray:
    keep, last = [], -np.inf
    for x in times:
        if x - last >= gap:
            keep.append(x)
            last = x
    return np.asarray(keep)


def run_cts_trial(net, phy, lam: float, t_t: float, rng: np.random.Generator,
                  anchors=None, sensor=None, thinning: bool = False, localize: bool = True,
                  mode: str | None = None,
                  settings: GaussNewtonSettings = GaussNewtonSettings()) -> TrialRecord:
    """One collision-tolerant window of length ``t_t``.

    A packet survives at the sensor when it escapes the link loss and its
    power clears ``gamma_0`` times the noise plus every other packet whose
    arrival interval overlaps its own, all counted at full power. Lost
    packets still interfere. Packets whose whole vulnerable interval lies
    where every anchor could be transmitting are tallied separately, which
    gives an edge-free estimate of the per-packet success probability.
    """
    if lam <= 0 or t_t <= 0:
        raise DomainError("lambda and T_T must be positive")
    mode = mode or net.mode
    n, c, t_p = net.n_anchors, net.c, packet_duration(phy)
    anchors, sensor = _positions(net, rng, anchors, sensor)
    delay = np.linalg.norm(anchors - sensor, axis=1) / c
    power = received_power(phy, delay * c)

    src, emit, thinned = [], [], 0
    for j in range(n):
        k = rng.poisson(lam * t_t)
        times = np.sort(rng.uniform(0.0, t_t, k))
        if thinning:
            kept = _thin(times, t_p)
            thinned += times.size - kept.size
            times = kept
        src.append(np.full(times.size, j))
        emit.append(times)
    src = np.concatenate(src)
    emit = np.concatenate(emit)
    # on demand, each anchor opens its window when the request reaches it
    offset = delay if mode == "on-demand" else np.zeros(n)
    arrive = emit + offset[src] + delay[src]
    order = np.argsort(arrive, kind="stable")
    src, arrive = src[order], arrive[order]
    pw = power[src]

    # overlap partners of packet i are those with |a_i - a_m| < T_p
    lo = np.searchsorted(arrive, arrive - t_p, side="right")
    hi = np.searchsorted(arrive, arrive + t_p, side="left")
    csum = np.concatenate([[0.0], np.cumsum(pw)])
    interference = csum[hi] - csum[lo] - pw
    sinr_ok = pw >= phy.gamma_0 * (interference + phy.noise_power)
    alive = sinr_ok & (rng.random(src.size) >= net.p_l)
    assert np.all(pw[alive] >= phy.gamma_0 * (interference[alive] + phy.noise_power))

    start = offset + delay
    interior = (arrive - t_p >= start.max()) & (arrive + t_p <= t_t + start.min())
    counts = np.bincount(src[alive], minlength=n)
    finish = t_t + offset.max() + net.d_sa / c
    tx = src.size * t_p * phy.p_0
    if localize:
        ok, err, crb = _localize(net, phy, anchors, sensor, counts, rng, settings)
    else:
        ok, err, crb = bool(np.count_nonzero(counts) >= net.k_required), math.nan, math.nan
    return TrialRecord("CTS", float(finish), ok, err, counts, tx, 0.0, crb,
                       int(interior.sum()), int((alive & interior).sum()), thinned)


@dataclass(frozen=True)
class CampaignStats:
    scheme: str
    trials: int
    success_rate: float
    success_stderr: float
    mean_time: float
    time_stderr: float
    time_quantiles: dict
    rmse: float
    root_crb: float
    mean_energy: float
    mean_transmit_energy: float
    mean_listen_energy: float
    packet_success: float        # CTS interior p_s estimate, nan for CFS
    packets_counted: int
    thinned: int
    times: np.ndarray = field(repr=False, compare=False)
    errors: np.ndarray = field(repr=False, compare=False)
    crbs: np.ndarray = field(repr=False, compare=False)
    error_hist: tuple = field(repr=False, compare=False, default=())

    def same_as(self, other: "CampaignStats") -> bool:
        """Field-by-field equality including the raw arrays (nan-aware)."""
        return (self == other or _eq_scalars(self, other)) and all(
            np.array_equal(getattr(self, k), getattr(other, k), equal_nan=True)
            for k in ("times", "errors", "crbs"))


def _eq_scalars(a, b) -> bool:
    for k in ("scheme", "trials", "packets_counted", "thinned"):
        if getattr(a, k) != getattr(b, k):
            return False
    for k in ("success_rate", "success_stderr", "mean_time", "time_stderr", "rmse", "root_crb",
              "mean_energy", "mean_transmit_energy", "mean_listen_energy", "packet_success"):
        x, y = getattr(a, k), getattr(b, k)
        if not (x == y or (math.isnan(x) and math.isnan(y))):
            return False
    return a.time_quantiles == b.time_quantiles


def trial_streams(seed: int, trials: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


def aggregate(records: list[TrialRecord], scheme: str, hist_bins: int = 20) -> CampaignStats:
    m = len(records)
    if m == 0:
        raise DomainError("no trials to aggregate")
    ok = np.array([r.success for r in records])
    times = np.array([r.localization_time for r in records])
    errors = np.array([r.error for r in records])
    crbs = np.array([r.crb_total for r in records])
    p = ok.mean()
    fin = np.isfinite(errors)
    rmse = float(np.sqrt(np.mean(errors[fin] ** 2))) if fin.any() else math.nan
    cfin = fin & np.isfinite(crbs)
    root_crb = float(np.sqrt(np.mean(crbs[cfin]))) if cfin.any() else math.nan
    hist = np.histogram(errors[fin], bins=hist_bins) if fin.any() else ()
    counted = sum(r.packets_counted for r in records)
    received = sum(r.packets_received for r in records)
    tx = np.array([r.transmit_energy for r in records])
    li = np.array([r.listen_energy for r in records])
    return CampaignStats(
        scheme=scheme, trials=m, success_rate=float(p),
        success_stderr=float(math.sqrt(p * (1 - p) / m)),
        mean_time=float(times.mean()),
        time_stderr=float(times.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0,
        time_quantiles={q: float(np.quantile(times, q)) for q in TIME_QUANTILES},
        rmse=rmse, root_crb=root_crb,
        mean_energy=float((tx + li).mean()), mean_transmit_energy=float(tx.mean()),
        mean_listen_energy=float(li.mean()),
        packet_success=received / counted if counted else math.nan,
        packets_counted=counted, thinned=sum(r.thinned for r in records),
        times=times, errors=errors, crbs=crbs, error_hist=hist)


def run_campaign(scheme: str, net, phy, trials: int, seed: int, lam: float | None = None,
                 t_t: float | None = None, **trial_kw) -> CampaignStats:
    """``trials`` independent trials of one scheme.

    CTS needs ``lam`` and ``t_t``. Other keywords go to the trial function.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    scheme = scheme.upper()
    streams = trial_streams(seed, trials)
    if scheme == "CFS":
        records = [run_cfs_trial(net, phy, rng, **trial_kw) for rng in streams]
    elif scheme == "CTS":
        if lam is None or t_t is None:
            raise DomainError("CTS campaigns need lam and t_t")
        records = [run_cts_trial(net, phy, lam, t_t, rng, **trial_kw) for rng in streams]
    else:
        raise DomainError(f"unknown scheme {scheme!r}")
    return aggregate(records, scheme)


def accuracy_campaign(scheme: str, net, phy, trials: int, seed: int, lam: float | None = None,
                      t_t: float | None = None, k_e: float | None = None,
                      anchors=None) -> CampaignStats:
    """Estimator-versus-bound campaign on a fixed anchor constellation.

    The anchors default to ``ring_layout`` and a fresh sensor is drawn
    each trial. A fixed constellation keeps near-collinear draws from
    dominating the squared-error average.
    """
    if k_e is not None:
        phy = replace(phy, k_e=k_e)
    if anchors is None:
        anchors = ring_layout(Region.of(net), net.n_anchors)
    return run_campaign(scheme, net, phy, trials, seed, lam=lam, t_t=t_t, anchors=anchors)

"""Figure-style sweeps written as CSV files plus a run manifest.

Each figure writes ``<name>.csv`` with a fixed header. Monte Carlo figures
also write ``<name>.stderr.csv``, which holds the standard error of every
simulated column. The manifest ``<name>.manifest.json`` records the
resolved configuration, seed, trial count and sweep values, which is
enough to regenerate every row.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import poisson

from . import __version__
from .cfs import min_time, time_stats, required_anchor_count, average_time
from .channel import cfs_link_prob, collision_load, power_model, survival_curve
from .config import NetworkConfig, PhyConfig, to_dict
from .cts import RateModel, loc_prob_for, min_localization_time, rate_range
from .errors import ConfigError
from .geometry import Region, mean_distance
from .sim import accuracy_campaign

HEADERS = {
    "fig3": ["lambda", "T_T", "p_loc"],
    "fig4": ["q", "p_survive", "lambda", "p_collide"],
    "fig5": ["p_l", "N", "T_cf_min", "T_cf_low", "T_cf_upp", "T_ct_min"],
    "fig6": ["T_p", "T_cf_min", "T_ct_min"],
    "fig7": ["D", "T_cf_min", "T_ct_min"],
    "fig8": ["scheme", "error_bin", "count", "rmse", "root_crb"],
    "fig9": ["sigma_avg_d", "scheme", "rmse", "root_crb"],
}

# default sweep of each figure's free variable
DEFAULT_SWEEPS = {
    "fig3": list(np.round(np.linspace(0.2, 6.0, 30), 6)),
    "fig4": [],
    "fig5": [0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4],
    "fig6": [0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
    "fig7": [300.0, 750.0, 1500.0, 2250.0, 3000.0, 3750.0, 4500.0],
    "fig8": [],
    "fig9": [1e-9, 1e-8, 1e-7, 1e-6, 1e-5],
}
FIG3_WINDOWS = [4.0, 6.0, 8.0, 10.0]
FIG8_BINS = 20
FIG4_WINDOW_FACTOR = 1.5


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    trials: int = 1000
    seed: int = 0
    out_dir: Path = Path(".")
    sweep: tuple | None = None
    net: NetworkConfig = field(default_factory=NetworkConfig)
    phy: PhyConfig = field(default_factory=PhyConfig)

    def __post_init__(self):
        if self.name not in HEADERS:
            raise ConfigError(f"experiment.name: unknown figure {self.name!r}")
        if self.trials < 1:
            raise ConfigError("experiment.trials: must be >= 1")
        if self.sweep is not None and len(self.sweep) == 0:
            raise ConfigError("experiment.sweep: must be non-empty")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("experiment.seed: must fit in an unsigned 64-bit integer")

    @property
    def values(self) -> list:
        return list(self.sweep) if self.sweep is not None else list(DEFAULT_SWEEPS[self.name])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _t_ct(net, phy) -> float:
    return min_localization_time(phy, power_model(net, phy), net).t_ct_min


def fig3(spec: ExperimentSpec):
    model = RateModel(spec.phy, power_model(spec.net, spec.phy), spec.net)
    rows = [[lam, t, float(loc_prob_for(model, spec.net, lam, t))]
            for t in FIG3_WINDOWS for lam in spec.values]
    return rows, None


def fig4(spec: ExperimentSpec):
    net, phy = spec.net, spec.phy
    x0 = power_model(net, phy)
    model = RateModel(phy, x0, net)
    timing = min_localization_time(phy, x0, net, model=model)
    low, upp = rate_range(phy, x0, net, FIG4_WINDOW_FACTOR * timing.t_t_min, model=model)
    rates = spec.values or [low, timing.lambda_used, upp]
    surv = survival_curve(phy, x0, net.n_anchors - 1)
    rows = []
    for lam in rates:
        load = float(collision_load(net.n_anchors, lam, phy.t_p))
        for q in range(net.n_anchors):
            rows.append([q, float(surv[q]), lam, float(poisson.pmf(q, load))])
    return rows, None


def fig5(spec: ExperimentSpec):
    rows = []
    for p_l in spec.values:
        net = replace(spec.net, p_l=p_l)
        x0 = power_model(net, spec.phy)
        n = required_anchor_count(net.k_required, cfs_link_prob(spec.phy, x0, p_l), net.p_ss)
        net = replace(net, n_anchors=n)
        st = time_stats(net, spec.phy.t_p)
        rows.append([p_l, n, min_time(net, spec.phy.t_p), st.low, st.upp, _t_ct(net, spec.phy)])
    return rows, None


def fig6(spec: ExperimentSpec):
    rows = []
    for t_p in spec.values:
        phy = replace(spec.phy, packet_duration=t_p)
        rows.append([t_p, min_time(spec.net, t_p), _t_ct(spec.net, phy)])
    return rows, None


def fig7(spec: ExperimentSpec):
    rows = []
    for d in spec.values:
        net = spec.net.with_area(d)
        rows.append([d, min_time(net, spec.phy.t_p), _t_ct(net, spec.phy)])
    return rows, None


def _accuracy_pair(spec: ExperimentSpec, k_e: float | None = None):
    """Matched CFS and CTS campaigns, with the CTS window equal to the CFS
    average localization time."""
    net, phy = spec.net, spec.phy
    lam = min_localization_time(phy, power_model(net, phy), net).lambda_used
    t_t = average_time(net, phy.t_p)
    a = accuracy_campaign("CFS", net, phy, spec.trials, spec.seed, k_e=k_e)
    b = accuracy_campaign("CTS", net, phy, spec.trials, spec.seed + 1, lam=lam, t_t=t_t, k_e=k_e)
    return a, b


def _rmse_stderr(errors: np.ndarray) -> float:
    """Delta-method standard error of the RMSE."""
    e2 = errors[np.isfinite(errors)] ** 2
    if e2.size < 2 or e2.mean() == 0:
        return math.nan
    return float(e2.std(ddof=1) / math.sqrt(e2.size) / (2 * math.sqrt(e2.mean())))


def fig8(spec: ExperimentSpec):
    stats = _accuracy_pair(spec)
    finite = np.concatenate([s.errors[np.isfinite(s.errors)] for s in stats])
    edges = np.linspace(0.0, float(np.quantile(finite, 0.99)) if finite.size else 1.0, FIG8_BINS + 1)
    rows, err_rows = [], []
    for s in stats:
        e = s.errors[np.isfinite(s.errors)]
        counts, _ = np.histogram(np.clip(e, 0.0, edges[-1]), bins=edges)
        for lo, hi, k in zip(edges[:-1], edges[1:], counts):
            rows.append([s.scheme, (lo + hi) / 2, int(k), s.rmse, s.root_crb])
        err_rows.append([s.scheme, _rmse_stderr(s.errors)])
    return rows, (["scheme", "rmse_stderr"], err_rows)


def fig9(spec: ExperimentSpec):
    net, phy = spec.net, spec.phy
    d_avg = mean_distance(Region.of(net))
    rows, err_rows = [], []
    for k_e in spec.values:
        sigma = net.c * math.sqrt(k_e * d_avg ** phy.n_0)
        for s in _accuracy_pair(spec, k_e):
            rows.append([sigma, s.scheme, s.rmse, s.root_crb])
            err_rows.append([sigma, s.scheme, _rmse_stderr(s.errors)])
    return rows, (["sigma_avg_d", "scheme", "rmse_stderr"], err_rows)


FIGURES: dict[str, Callable] = {
    "fig3": fig3, "fig4": fig4, "fig5": fig5, "fig6": fig6,
    "fig7": fig7, "fig8": fig8, "fig9": fig9,
}
MONTE_CARLO = {"fig8", "fig9"}


def run_experiment(spec: ExperimentSpec) -> list[Path]:
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, stderr = FIGURES[spec.name](spec)
    files = [out / f"{spec.name}.csv"]
    _write_csv(files[0], HEADERS[spec.name], rows)
    if stderr is not None:
        files.append(out / f"{spec.name}.stderr.csv")
        _write_csv(files[-1], *stderr)
    manifest = {
        "experiment": spec.name,
        "version": __version__,
        "config": to_dict(spec.net, spec.phy),
        "sweep": [float(v) for v in spec.values],
        "seed": spec.seed if spec.name in MONTE_CARLO else None,
        "trials": spec.trials if spec.name in MONTE_CARLO else None,
        "outputs": [f.name for f in files],
    }
    files.append(out / f"{spec.name}.manifest.json")
    files[-1].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return files

"""Command-line entry point (``uwloc``).

Exit status: 0 on success, 1 on I/O failure, 2 on configuration errors,
3 on numerical failures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cfs import min_time, required_anchor_count, time_stats
from .channel import cfs_link_prob, power_model, survival_curve
from .config import load, to_dict
from .crb import fim_cfs, fim_cts
from .cts import RateModel, min_localization_time, optimal_rate
from .energy import avg_energy_cfs, avg_energy_cts
from .errors import ConfigError, DomainError, NumericError
from .experiments import HEADERS, ExperimentSpec, run_experiment
from .geometry import Region
from .sim import ring_layout, run_campaign

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration field (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--out", type=Path, default=Path("."))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uwloc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="closed-form timing analysis")
    analyze.add_argument("scheme", choices=["cfs", "cts"])
    _common(analyze)

    _common(sub.add_parser("optimal-rate", help="throughput-optimal CTS rate"))

    sim = sub.add_parser("simulate", help="Monte Carlo campaign")
    sim.add_argument("--scheme", choices=["cfs", "cts"], default="cfs")
    sim.add_argument("--lam", type=float, help="CTS rate (default: optimal)")
    sim.add_argument("--window", type=float, help="CTS window T_T (default: minimum)")
    _common(sim)

    crb = sub.add_parser("crb", help="Cramér-Rao bound at a sensor position")
    crb.add_argument("--scheme", choices=["cfs", "cts"], default="cfs")
    crb.add_argument("--at", type=float, nargs=2, metavar=("X", "Y"),
                     help="sensor position (default: area centre)")
    _common(crb)

    _common(sub.add_parser("energy", help="average energy per localization"))

    rep = sub.add_parser("reproduce", help="write a figure-style CSV")
    rep.add_argument("figure", choices=sorted(HEADERS))
    rep.add_argument("--sweep", help="comma-separated values of the swept variable")
    _common(rep)
    return parser


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(type(v).__name__)


def _cts_point(net, phy):
    x0 = power_model(net, phy)
    model = RateModel(phy, x0, net)
    return x0, model, min_localization_time(phy, x0, net, model=model)


def cmd_analyze(args, net, phy):
    if args.scheme == "cfs":
        st = time_stats(net, phy.t_p)
        x0 = power_model(net, phy)
        return {"scheme": "CFS", "T_min": min_time(net, phy.t_p), "T_avg": st.avg,
                "T_low": st.low, "T_upp": st.upp,
                "required_anchors": required_anchor_count(
                    net.k_required, cfs_link_prob(phy, x0, net.p_l), net.p_ss)}
    x0, model, t = _cts_point(net, phy)
    return {"scheme": "CTS", "T_T_min": t.t_t_min, "T_ct_min": t.t_ct_min,
            "lambda_opt": t.lambda_used, "p_ct": t.p_ct,
            "p_s": float(model.p_s(t.lambda_used)),
            "survival": survival_curve(phy, x0, net.n_anchors - 1)}


def cmd_optimal_rate(args, net, phy):
    opt = optimal_rate(phy, power_model(net, phy), net)
    return {"lambda_opt": opt.lambda_opt, "lambda_low_bound": opt.lambda_low_bound,
            "lambda_upp_bound": opt.lambda_upp_bound, "throughput": opt.throughput}


def cmd_simulate(args, net, phy):
    if args.scheme == "cfs":
        st = run_campaign("CFS", net, phy, args.trials, args.seed)
    else:
        lam, window = args.lam, args.window
        if lam is None or window is None:
            _, _, t = _cts_point(net, phy)
            lam = t.lambda_used if lam is None else lam
            window = t.t_t_min if window is None else window
        st = run_campaign("CTS", net, phy, args.trials, args.seed, lam=lam, t_t=window)
    return {k: getattr(st, k) for k in (
        "scheme", "trials", "success_rate", "success_stderr", "mean_time", "time_stderr",
        "rmse", "root_crb", "mean_energy", "packet_success", "packets_counted")} | {
        "time_quantiles": {str(q): v for q, v in st.time_quantiles.items()}}


def cmd_crb(args, net, phy):
    region = Region.of(net)
    anchors = ring_layout(region, net.n_anchors)
    x = np.array(args.at) if args.at else np.array([region.d_x, region.d_y]) / 2
    x0 = power_model(net, phy)
    if args.scheme == "cfs":
        fr = fim_cfs(x, anchors, phy, cfs_link_prob(phy, x0, net.p_l), net.k_required, net.c)
    else:
        _, model, t = _cts_point(net, phy)
        fr = fim_cts(x, anchors, phy, float(model.p_s(t.lambda_used)), t.lambda_used,
                     t.t_t_min, net.k_required, net.c)
    crb = fr.crb
    return {"scheme": args.scheme.upper(), "position": x, "anchors": anchors,
            "crb_per_axis": crb.per_axis, "crb_total": crb.total,
            "root_crb": math.sqrt(crb.total), "p_loc": fr.p_loc}


def cmd_energy(args, net, phy):
    _, _, t = _cts_point(net, phy)
    out = {}
    for rep in (avg_energy_cfs(net, phy), avg_energy_cts(net, phy, t.lambda_used, t.t_t_min)):
        out[rep.scheme] = {"transmit": rep.transmit_energy, "listen": rep.listen_energy,
                           "total": rep.total}
    out["CTS"]["lambda"], out["CTS"]["T_T"] = t.lambda_used, t.t_t_min
    return out


def cmd_reproduce(args, net, phy):
    sweep = None
    if args.sweep:
        try:
            sweep = tuple(float(v) for v in args.sweep.split(","))
        except ValueError:
            raise ConfigError(f"--sweep: cannot parse {args.sweep!r}") from None
    spec = ExperimentSpec(args.figure, trials=args.trials, seed=args.seed, out_dir=args.out,
                          sweep=sweep, net=net, phy=phy)
    return {"outputs": [str(p) for p in run_experiment(spec)]}


COMMANDS = {
    "analyze": cmd_analyze, "optimal-rate": cmd_optimal_rate, "simulate": cmd_simulate,
    "crb": cmd_crb, "energy": cmd_energy, "reproduce": cmd_reproduce,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.trials < 1:
            raise ConfigError("--trials: must be >= 1")
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed: must fit in an unsigned 64-bit integer")
        net, phy = load(args.config, args.overrides)
        result = COMMANDS[args.command](args, net, phy)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.command == "reproduce":
        result["config"] = to_dict(net, phy)
    _emit(result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

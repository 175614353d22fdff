"""Command-line front door: solve policies offline, simulate, sweep grids,
inspect the state space and cached policies.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import __version__
from .config import ExperimentConfig, build_config, parse_seeds
from .errors import (
    ConfigError,
    MmwaveMdpError,
    UnsupportedError,
    ValidationError,
)
from .multiuser import MultiUserEnv, converge, random_profile
from .output import (
    write_aggregate_csv,
    write_manifest,
    write_plotdata_csv,
    write_raw_csv,
)
from .policyio import (
    PolicyFileHeader,
    cache_dir,
    cache_filename,
    load_policy_file,
    save_policy_file,
)
from .sim import sweep as sim_sweep
from .states import (
    closed_form_state_count,
    enumerate_states,
)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="INI experiment file")
    p.add_argument("--preset", help="channel preset name")
    p.add_argument("--bss", type=int, help="number of base stations L")
    p.add_argument("--channel-states", type=int, dest="channel_states", help="chain order K")
    p.add_argument("--ues", help="UE count N, or comma list for grids")
    p.add_argument("--oh", help="handover cost fraction, or comma list for grids")
    p.add_argument("--slots", type=int, help="simulated slots per seed")
    p.add_argument("--seeds", help="seed count K (0..K-1) or comma list")
    p.add_argument("--scheme", help="comma list of schemes (mdp,load,rate,channel,upper)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--cache", help="policy cache directory")
    p.add_argument("--workers", type=int, help="parallel seed runs")


def _config_from_args(args) -> ExperimentConfig:
    flags = {
        "channel_preset": args.preset,
        "bss": args.bss,
        "channel_states": args.channel_states,
        "ues": tuple(int(x) for x in args.ues.split(",")) if args.ues else None,
        "oh": tuple(float(x) for x in args.oh.split(",")) if args.oh else None,
        "slots": args.slots,
        "seeds": parse_seeds(args.seeds) if args.seeds else None,
        "schemes": tuple(args.scheme.split(",")) if args.scheme else None,
        "out_dir": args.out,
        "workers": args.workers,
    }
    cfg = build_config(args.config, **flags)
    cfg.cache_dir = args.cache or os.environ.get("MMWAVE_MDP_CACHE") or cfg.cache_dir
    return cfg


def _policy_header(cfg: ExperimentConfig, n_ues: int, oh: float, converged, iterations):
    return PolicyFileHeader(
        bss=cfg.bss,
        channel_states=cfg.channel_states,
        ues=n_ues,
        omega=cfg.omega,
        epsilon=cfg.epsilon,
        oh=oh,
        channel_digest=cfg.channel().digest(),
        converged=converged,
        iterations=iterations,
        policy_seed=cfg.policy_seed,
    )


def cmd_solve(args) -> int:
    cfg = _config_from_args(args)
    cache = cache_dir(cfg.cache_dir)
    os.makedirs(cache, exist_ok=True)
    os.makedirs(cfg.out_dir, exist_ok=True)
    channel = cfg.channel()
    rates = cfg.rate_table()
    failures = []
    outputs = []
    for n_ues in cfg.ues:
        space = enumerate_states(cfg.bss, cfg.channel_states, n_ues)
        for oh in cfg.oh:
            env = MultiUserEnv(space, channel, rates, oh, cfg.solver_params())
            initial = random_profile(space, n_ues, cfg.policy_seed)
            max_outer = cfg.max_outer if cfg.max_outer is not None else 50 * n_ues
            result = converge(initial, env, max_outer)
            log_path = os.path.join(
                cfg.out_dir, f"convergence_L{cfg.bss}_N{n_ues}_oh{oh!r}.csv"
            )
            with open(log_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["iteration", "ue", "changed", "via_converged"])
                for rec in result.log:
                    w.writerow([rec.iteration, rec.ue, rec.changed, rec.via_converged])
            header = _policy_header(cfg, n_ues, oh, result.converged, result.iterations)
            path = os.path.join(cache, cache_filename(header))
            save_policy_file(path, header, result.profile.policies, channel)
            outputs.extend([path, log_path])
            status = "converged" if result.converged else "DID NOT CONVERGE"
            print(
                f"solve L={cfg.bss} K={cfg.channel_states} N={n_ues} oh={oh}: "
                f"{status} after {result.iterations} iterations "
                f"(|S|={len(space)}) -> {path}"
            )
            if not result.converged:
                print(
                    f"  last-cycle changes {result.last_cycle_changes()}; log: {log_path}",
                    file=sys.stderr,
                )
                failures.append((n_ues, oh, log_path))
    write_manifest(
        os.path.join(cfg.out_dir, "solve_manifest.json"), "solve", cfg.resolved(), outputs
    )
    return 1 if failures else 0


def _load_cached_policies(cfg: ExperimentConfig, n_ues: int, oh: float):
    header = _policy_header(cfg, n_ues, oh, True, 0)
    path = os.path.join(cache_dir(cfg.cache_dir), cache_filename(header))
    if not os.path.exists(path):
        raise MmwaveMdpError(
            f"no cached policy for L={cfg.bss} K={cfg.channel_states} N={n_ues} "
            f"oh={oh} (expected {path}); run `mmwave-mdp solve` with the same "
            f"configuration first"
        )
    file_header, policies = load_policy_file(path)
    if not file_header.converged:
        print(f"warning: policy file {path} is flagged non-converged", file=sys.stderr)
    return policies


def _run_grid(cfg: ExperimentConfig, command: str) -> int:
    configs = [cfg.sim_config(n, oh) for n in cfg.ues for oh in cfg.oh]
    policy_cache = {}
    if "mdp" in cfg.schemes:
        for c in configs:  # fail fast before burning simulation time
            policy_cache[(c.ues, c.oh)] = _load_cached_policies(cfg, c.ues, c.oh)

    def policies_for(c):
        return policy_cache[(c.ues, c.oh)]

    metrics = sim_sweep(configs, cfg.schemes, policies_for, workers=cfg.workers)
    os.makedirs(cfg.out_dir, exist_ok=True)
    paths = {
        "raw": os.path.join(cfg.out_dir, f"{command}_raw.csv"),
        "aggregate": os.path.join(cfg.out_dir, f"{command}_aggregate.csv"),
        "plotdata": os.path.join(cfg.out_dir, f"{command}_plotdata.csv"),
    }
    write_raw_csv(paths["raw"], metrics)
    write_aggregate_csv(paths["aggregate"], metrics)
    write_plotdata_csv(paths["plotdata"], metrics)
    write_manifest(
        os.path.join(cfg.out_dir, f"{command}_manifest.json"),
        command,
        cfg.resolved(),
        list(paths.values()),
    )
    for m in metrics:
        gain = "" if m.gain_vs_channel is None else f" gain={m.gain_vs_channel:+.1%}"
        print(
            f"{command} N={m.config.ues} oh={m.config.oh} {m.scheme:>7}: "
            f"se={m.mean_se:.4f}±{m.se_ci95:.4f} "
            f"ho/ue/kslot={m.mean_handovers_per_ue_per_kslot:.2f}{gain}"
        )
    print(f"wrote {', '.join(paths.values())}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    if len(cfg.ues) != 1 or len(cfg.oh) != 1:
        raise ConfigError("simulate takes a single N and OH; use `sweep` for grids")
    return _run_grid(cfg, "simulate")


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    return _run_grid(cfg, "sweep")


def cmd_statespace(args) -> int:
    cfg = _config_from_args(args)
    L, K = cfg.bss, cfg.channel_states
    if args.action == "count":
        rows = []
        for n in cfg.ues:
            enum_count = len(enumerate_states(L, K, n))
            try:
                closed = closed_form_state_count(L, K, n)
                ratio = repr(closed / enum_count)
            except (UnsupportedError, ValidationError):
                closed, ratio = "", ""
            rows.append([L, K, n, enum_count, closed, ratio])
            print(
                f"L={L} K={K} N={n}: enumerated={enum_count} "
                f"closed_form={closed if closed != '' else 'n/a'} ratio={ratio or 'n/a'}"
            )
        if args.csv:
            with open(args.csv, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["L", "K", "N", "enumerated", "closed_form", "ratio"])
                w.writerows(rows)
            print(f"wrote {args.csv}")
        return 0
    # dump
    if len(cfg.ues) != 1:
        raise ConfigError("statespace dump takes a single N")
    n = cfg.ues[0]
    space = enumerate_states(L, K, n)
    out = args.csv or os.path.join(cfg.out_dir, f"statespace_L{L}_K{K}_N{n}.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    header = ["index", "serving_channel", "serving_load"]
    for i in range(1, L):
        header += [f"neighbor_{i}_channel", f"neighbor_{i}_load"]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for idx, s in enumerate(space):
            row = [idx, s.serving.channel, s.serving.load]
            for c in s.neighbors:
                row += [c.channel, c.load]
            w.writerow(row)
    print(f"wrote {out} ({len(space)} states)")
    return 0


def cmd_inspect_policy(args) -> int:
    header, policies = load_policy_file(args.path)
    print(f"policy file: {args.path}")
    for name in (
        "bss",
        "channel_states",
        "ues",
        "omega",
        "epsilon",
        "oh",
        "converged",
        "iterations",
        "policy_seed",
    ):
        print(f"  {name}: {getattr(header, name)}")
    print(f"  channel_digest: {header.channel_digest[:16]}…")
    for ue, pol in enumerate(policies):
        hist = np.bincount(pol, minlength=header.bss)
        stay = hist[0] / pol.size if pol.size else 0.0
        print(
            f"  UE {ue}: {pol.size} states, action histogram {hist.tolist()}, "
            f"stay fraction {stay:.3f}"
        )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmwave-mdp",
        description="MDP-based cell selection for mmWave networks: offline policy "
        "solving, Monte Carlo evaluation against baselines, state-space reports.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="precompute converged policies per UE count")
    _add_common_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="evaluate schemes at one (N, OH) point")
    _add_common_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="evaluate schemes over an OH x N grid")
    _add_common_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("statespace", help="state-space counts and listings")
    p.add_argument("action", choices=["count", "dump"])
    p.add_argument("--csv", help="optional CSV output path")
    _add_common_flags(p)
    p.set_defaults(func=cmd_statespace)

    p = sub.add_parser("inspect-policy", help="summarize a cached policy file")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect_policy)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError, UnsupportedError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except MmwaveMdpError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``nclab {check,region,theta,simulate,sched-stats}``.

Exit codes: 0 on success, 2 for configuration/validation errors, 3 for
numerical failures (no root, quota cap exceeded, divergent moment, ...).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

from . import conditions
from .config import RunConfig, parse_config
from .errors import ConfigError, NumericalError, ValidationError
from .model import ChannelParams, EigenBlock
from .sim import montecarlo_moments, scheduler_moment_mc

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _load(path: Optional[str]) -> Optional[RunConfig]:
    if path is None:
        return None
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def _channel(args, cfg: Optional[RunConfig]) -> ChannelParams:
    base = asdict(cfg.channel) if cfg else {}
    for flag, key in (("power", "power"), ("noise", "noise_var"), ("eps", "drop_prob")):
        v = getattr(args, flag, None)
        if v is not None:
            base[key] = v
    missing = {"power", "noise_var", "drop_prob"} - base.keys()
    if missing:
        raise ConfigError(f"missing channel parameters: {sorted(missing)} "
                          "(pass --power/--noise/--eps or --config)")
    return ChannelParams(**base)


def _emit(text: str, out: Optional[str]):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_check(args) -> int:
    cfg = _load(args.config)
    ch = _channel(args, cfg)
    if args.ln:
        blocks = tuple(EigenBlock(x) for x in sorted(args.ln, reverse=True))
    elif cfg:
        blocks = cfg.system.blocks
    else:
        raise ConfigError("check needs --config or --ln")
    alpha = conditions.adaptive_feasible(blocks, ch)
    two_real = len(blocks) == 2 and all(not b.is_complex and b.algebraic_multiplicity == 1
                                        for b in blocks)
    verdict = {
        "necessary": conditions.necessity_holds(blocks, ch).holds,
        "tdma": conditions.tdma_sufficient(blocks, ch),
        "adaptive": {"feasible": alpha.feasible, "alpha_min": list(alpha.minimum_fractions)},
        "optimal2d": (conditions.optimal2d_condition(blocks[0].log_magnitude,
                                                     blocks[1].log_magnitude, ch)
                      if two_real else None),
    }
    print(json.dumps(verdict, indent=2, allow_nan=True))
    return EXIT_OK


def cmd_region(args) -> int:
    cfg = _load(args.config)
    ch = _channel(args, cfg)
    report = conditions.region_sweep(ch, args.ln_max, args.grid)
    _emit(report.to_csv(), args.out)
    return EXIT_OK


def cmd_theta(args) -> int:
    cfg = _load(args.config)
    ch = _channel(args, cfg)
    l1, l2 = args.l1, args.l2
    if (l1 is None or l2 is None) and cfg is not None:
        ln = cfg.system.log_magnitudes
        l1 = ln[0] if l1 is None else l1
        l2 = ln[1] if l2 is None and ln.size > 1 else l2
    if l1 is None or l2 is None:
        raise ConfigError("theta needs --l1 and --l2")
    sol = conditions.solve_theta(l1, l2, ch)
    print(json.dumps({"theta": sol.theta, "phi": sol.phi, "b": sol.drift,
                      "residual": sol.residual}, indent=2))
    return EXIT_OK


def _override_sim(args, cfg: RunConfig):
    sim = cfg.sim
    return (args.trials or sim.trials, args.horizon or sim.horizon,
            sim.seed if args.seed is None else args.seed)


def cmd_simulate(args) -> int:
    cfg = _load(args.config)
    trials, horizon, seed = _override_sim(args, cfg)
    curves = montecarlo_moments(cfg.system, cfg.channel, cfg.scheduler, trials, horizon, seed,
                                gain=cfg.gain)
    out = args.out or cfg.output.path
    fmt = args.format or cfg.output.format
    if fmt == "json":
        doc = {"trials": trials, "horizon": horizon, "seed": seed,
               "t": curves.checkpoints.tolist(),
               "mean_moment": curves.mean_moment[:, curves.checkpoints].tolist(),
               "mean_sq_norm": curves.mean_sq_norm[curves.checkpoints].tolist(),
               "diverged_fraction": curves.diverged_fraction[curves.checkpoints].tolist(),
               "trend_slope": curves.trend_slope.tolist()}
        _emit(json.dumps(doc, indent=2) + "\n", out)
    else:
        _emit(curves.to_csv(), out)
    return EXIT_OK


def cmd_sched_stats(args) -> int:
    cfg = _load(args.config)
    rounds = args.rounds or cfg.sim.rounds
    seed = cfg.sim.seed if args.seed is None else args.seed
    ln = cfg.system.log_magnitudes
    res = scheduler_moment_mc(cfg.scheduler, ln, cfg.channel, rounds, seed)
    _emit(res.round_log_csv(cfg.scheduler.kind), args.out or cfg.output.path)
    summary = {
        "scheduler": {"kind": cfg.scheduler.kind, "quotas": cfg.scheduler.quotas,
                      "n1": cfg.scheduler.n1},
        "rounds": rounds,
        "round_moments": [asdict(m) for m in res.round_moments],
        "phase_moments": [asdict(m) for m in res.phase_moments],
    }
    stream = sys.stderr if (args.out or cfg.output.path) in (None, "-") else sys.stdout
    print(json.dumps(summary, indent=2), file=stream)
    return EXIT_OK


def _channel_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--eps", type=float, help="erasure probability")
    p.add_argument("--power", type=float, help="average power budget P")
    p.add_argument("--noise", type=float, help="noise variance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nclab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="evaluate every stabilizability criterion")
    _channel_flags(p)
    p.add_argument("--ln", type=float, nargs="+", help="eigenvalue log-magnitudes")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("region", help="classify a grid of (ln|l1|, ln|l2|) pairs")
    _channel_flags(p)
    p.add_argument("--ln-max", type=float, default=0.12)
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("theta", help="solve the exponential-tilt equation")
    _channel_flags(p)
    p.add_argument("--l1", type=float)
    p.add_argument("--l2", type=float)
    p.set_defaults(func=cmd_theta)

    p = sub.add_parser("simulate", help="closed-loop Monte Carlo decay curves")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sched-stats", help="scheduler round statistics and moments")
    p.add_argument("--config", required=True)
    p.add_argument("--rounds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sched_stats)
    return parser


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()

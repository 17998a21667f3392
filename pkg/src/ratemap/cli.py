"""Command-line entry point.

Subcommands map 1:1 onto the experiment protocol: simulate, sweep-sigma-x,
sweep-margin, rate-cdf, demo-1d, selftest. Every data-producing run writes
CSV files plus a manifest.json with the exact configuration, seed, checksums
and trial accounting needed to replay it. Exit codes: 0 success, 1 usage,
2 numerical-failure budget exceeded.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, selftest
from .channel import NumericalError
from .config import config_to_mapping, default_config, load_config
from .mc import (SimConfig, estimate_outage, demo_1d, outage_at_margin,
                 margin_from_posteriors, rate_cdf, records_from_posteriors,
                 run_many, sweep_sigma_x)


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _fmt(value) -> str:
    """Full round-trip precision for floats, plain text otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[dict]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(row[col]) for col in header) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, cfg: SimConfig, outputs: list[Path],
                    started: float, aborted: int) -> None:
    manifest = {
        "tool": "ratemap",
        "version": __version__,
        "command": sys.argv[1:],
        "config": config_to_mapping(cfg),
        "master_seed": cfg.master_seed,
        "checksums": {p.name: _sha256(p) for p in outputs},
        "duration_seconds": round(time.monotonic() - started, 3),
        "aborted_trials": aborted,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _parse_grid(text: str) -> list[float]:
    try:
        grid = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if not grid:
        raise argparse.ArgumentTypeError("grid must not be empty")
    if any(not g >= 0.0 for g in grid):
        raise argparse.ArgumentTypeError("grid values must be >= 0")
    return grid


def _load_cfg(args: argparse.Namespace) -> SimConfig:
    cfg = load_config(args.config) if args.config else default_config()
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.trials is not None:
        updates["n_trials"] = args.trials
    if args.methods is not None:
        updates["methods"] = tuple(m.strip() for m in args.methods.split(","))
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    if getattr(args, "sigma_x", None) is not None:
        cfg = dataclasses.replace(
            cfg, noise=dataclasses.replace(cfg.noise, sigma_x=args.sigma_x))
    return cfg


def _add_common(sub: argparse.ArgumentParser, sigma_x: bool = False) -> None:
    sub.add_argument("--config", type=Path, default=None,
                     help="YAML config file (defaults fill missing keys)")
    sub.add_argument("--seed", type=int, default=None,
                     help="master seed override (unsigned 64-bit)")
    sub.add_argument("--trials", type=int, default=None,
                     help="trial count override")
    sub.add_argument("--methods", type=str, default=None,
                     help="comma-separated method subset")
    sub.add_argument("--out-dir", type=Path, default=Path("."),
                     help="directory for CSV outputs and manifest.json")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker threads; affects speed only, never results")
    sub.add_argument("--progress", action="store_true",
                     help="print a plain trial counter to stderr")
    if sigma_x:
        sub.add_argument("--sigma-x", type=float, default=None,
                         help="location noise level override, meters")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ratemap",
                     description="Rate-map simulation experiments.")
    parser.add_argument("--version", action="version",
                        version=f"ratemap {__version__}")
    subs = parser.add_subparsers(dest="command", required=True,
                                 parser_class=_Parser)

    sim = subs.add_parser("simulate",
                          help="one campaign at the configured noise level")
    _add_common(sim, sigma_x=True)

    sweep = subs.add_parser("sweep-sigma-x",
                            help="outage vs location noise level")
    _add_common(sweep)
    sweep.add_argument("--grid", type=_parse_grid, default=None,
                       help="comma-separated sigma_x values "
                            "(default 0,5,10,15,20)")

    margin = subs.add_parser("sweep-margin",
                             help="smallest back-off margin meeting the "
                                  "outage target, per method and noise level")
    _add_common(margin)
    margin.add_argument("--grid", type=_parse_grid, default=None,
                        help="comma-separated sigma_x values "
                             "(default 0,5,10,15,20)")
    margin.add_argument("--target-pout", type=float, default=None,
                        help="outage target (default: configured p_out)")

    cdf = subs.add_parser("rate-cdf",
                          help="received-rate CDF with per-method "
                               "calibrated margins")
    _add_common(cdf, sigma_x=True)

    demo = subs.add_parser("demo-1d",
                           help="single-trial prediction profile on the "
                                "line through the transmitter")
    _add_common(demo, sigma_x=True)

    subs.add_parser("selftest", help="run the embedded invariant suite")
    return parser


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    started = time.monotonic()
    posteriors, aborted = run_many(cfg, threads=args.threads,
                                   progress=args.progress)
    records = records_from_posteriors(posteriors, cfg.channel.n0,
                                      cfg.rate.p_out, cfg.rate.sigma_delta)
    rows = [{"method": est.method, "sigma_x": cfg.noise.sigma_x,
             "outage_prob": est.outage_prob, "ci_low": est.ci_low,
             "ci_high": est.ci_high, "n_samples": est.n_samples}
            for est in estimate_outage(records)]
    out = args.out_dir / "outage.csv"
    write_csv(out, ["method", "sigma_x", "outage_prob", "ci_low", "ci_high",
                    "n_samples"], rows)
    _write_manifest(args.out_dir, cfg, [out], started, len(aborted))
    return 0


def _cmd_sweep_sigma_x(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    grid = args.grid if args.grid is not None else [0.0, 5.0, 10.0, 15.0, 20.0]
    started = time.monotonic()
    rows, stats = sweep_sigma_x(cfg, grid, threads=args.threads,
                                progress=args.progress)
    out = args.out_dir / "sweep_sigma_x.csv"
    write_csv(out, ["method", "sigma_x", "outage_prob", "ci_low", "ci_high",
                    "n_samples"], rows)
    _write_manifest(args.out_dir, cfg, [out], started, stats["aborted_trials"])
    return 0


def _cmd_sweep_margin(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    grid = args.grid if args.grid is not None else [0.0, 5.0, 10.0, 15.0, 20.0]
    target = args.target_pout if args.target_pout is not None else cfg.rate.p_out
    started = time.monotonic()
    rows: list[dict] = []
    curve_rows: list[dict] = []
    aborted_total = 0
    curve_grid = [round(0.01 * i, 2) for i in range(0, 101, 2)]
    for sigma_x in grid:
        sub = dataclasses.replace(
            cfg, noise=dataclasses.replace(cfg.noise, sigma_x=float(sigma_x)))
        if args.progress:
            print(f"sigma_x = {sigma_x:g}", file=sys.stderr)
        posteriors, aborted = run_many(sub, threads=args.threads,
                                       progress=args.progress)
        aborted_total += len(aborted)
        for method in cfg.methods:
            star = margin_from_posteriors(posteriors, cfg.channel.n0,
                                          cfg.rate.p_out, method, target)
            rows.append({"method": method, "sigma_x": float(sigma_x),
                         "sigma_delta_star": star, "target_pout": target})
            for delta in curve_grid:
                k, n = outage_at_margin(posteriors, cfg.channel.n0,
                                        cfg.rate.p_out, method, delta)
                curve_rows.append({"method": method, "sigma_x": float(sigma_x),
                                   "sigma_delta": delta,
                                   "outage_prob": k / n})
    out = args.out_dir / "sweep_margin.csv"
    write_csv(out, ["method", "sigma_x", "sigma_delta_star", "target_pout"],
              rows)
    curves = args.out_dir / "margin_curves.csv"
    write_csv(curves, ["method", "sigma_x", "sigma_delta", "outage_prob"],
              curve_rows)
    _write_manifest(args.out_dir, cfg, [out, curves], started, aborted_total)
    return 0


def _cmd_rate_cdf(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    started = time.monotonic()
    posteriors, aborted = run_many(cfg, threads=args.threads,
                                   progress=args.progress)
    margins = {m: margin_from_posteriors(posteriors, cfg.channel.n0,
                                         cfg.rate.p_out, m, cfg.rate.p_out)
               for m in cfg.methods}
    records = records_from_posteriors(posteriors, cfg.channel.n0,
                                      cfg.rate.p_out, margins)
    rows = rate_cdf(records)
    out = args.out_dir / "rate_cdf.csv"
    write_csv(out, ["method", "rate", "cum_prob"], rows)
    _write_manifest(args.out_dir, cfg, [out], started, len(aborted))
    return 0


def _cmd_demo_1d(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    started = time.monotonic()
    rows = demo_1d(cfg)
    out = args.out_dir / "demo_1d.csv"
    write_csv(out, ["method", "x1", "mean", "lower", "upper", "truth"], rows)
    _write_manifest(args.out_dir, cfg, [out], started, 0)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep-sigma-x": _cmd_sweep_sigma_x,
    "sweep-margin": _cmd_sweep_margin,
    "rate-cdf": _cmd_rate_cdf,
    "demo-1d": _cmd_demo_1d,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return selftest.run()
    try:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"ratemap: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"ratemap: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

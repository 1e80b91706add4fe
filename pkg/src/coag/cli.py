"""``coag run <scenario> --config <path> [--out DIR] [--gamma G] [--horizon T] [--fibres Q]``.

Exit status: 0 when every verdict passes, 1 when any fails, 2 on bad input
or a failed construction.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import SCENARIOS, load_config, run_scenario


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coag", description="Diagonal-kernel coagulation experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("scenario", choices=SCENARIOS)
    run.add_argument("--config", required=True, help="JSON config file")
    run.add_argument("--out", default=None, help="output directory (default: from config or ./out/<scenario>)")
    run.add_argument("--gamma", type=float, default=None)
    run.add_argument("--horizon", type=float, default=None)
    run.add_argument("--fibres", type=int, default=None)
    run.add_argument("--no-plots", action="store_true")
    run.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.scenario, out_dir=args.out, gamma=args.gamma,
                          horizon=args.horizon, fibres=args.fibres)
        if cfg.out_dir is None:
            cfg.out_dir = f"out/{cfg.scenario}"
        rep = run_scenario(cfg, plots=not args.no_plots)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"coag: error: {exc}", file=sys.stderr)
        return 2
    for v in rep.verdicts:
        tol = v.tolerance if not isinstance(v.tolerance, tuple) else list(v.tolerance)
        print(f"{'PASS' if v.passed else 'FAIL'}  {v.name:<28} {v.value:.3e} {v.relation} {tol}")
    print(f"report: {cfg.out_dir}/report.json")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())

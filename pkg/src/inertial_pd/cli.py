"""Command-line front end: ``inertial-pd {run,compare,check,reproduce}``.

Exit codes: 0 success, 2 configuration error, 3 integration failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .dynamics import SystemVariant
from .experiments import (ConfigError, RunConfig, cmd_check, cmd_compare, cmd_reproduce, cmd_run,
                          example2_config)
from .integrator import IntegrationError
from .problem import ProblemError

EXIT_CONFIG = 2
EXIT_INTEGRATION = 3


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if args.t_end is not None:
        changes["t_end"] = args.t_end
    if args.samples is not None:
        changes["samples"] = args.samples
    if args.rtol is not None:
        changes["stepper"] = replace(cfg.stepper, rtol=args.rtol)
    if args.variant is not None:
        changes["variant"] = SystemVariant.parse(args.variant)
    if args.seed is not None and cfg.problem.get("kind") == "random":
        changes["problem"] = {**cfg.problem, "seed": args.seed}
    return replace(cfg, **changes) if changes else cfg


def _load(path, args) -> RunConfig:
    cfg = RunConfig.load(path) if path else example2_config()
    return _apply_overrides(cfg, args)


def _common(p, variant=True):
    p.add_argument("--out", default="runs", help="output directory (default: runs)")
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--rtol", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    if variant:
        p.add_argument("--variant", choices=[v.value for v in SystemVariant])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inertial-pd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate one configuration and write its artifacts")
    p.add_argument("--config", help="JSON run config (default: the d=5, e=1, v=1 three-variable preset)")
    _common(p)

    p = sub.add_parser("compare", help="run several configurations side by side")
    p.add_argument("--config", action="append", required=True, help="repeat for each configuration")
    _common(p)
    p.add_argument("--name", default="compare", help="stem of the comparison CSV")

    p = sub.add_parser("check", help="classify a configuration without integrating")
    p.add_argument("--config", help="JSON run config (default: the d=5, e=1, v=1 three-variable preset)")
    _common(p)

    p = sub.add_parser("reproduce", help="run the preset sweep behind one figure")
    p.add_argument("example", choices=["1a", "1b", "2a", "2b"])
    _common(p, variant=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            art = cmd_run(_load(args.config, args), args.out)
            print(json.dumps({"csv": str(art.csv_path), "metadata": str(art.meta_path),
                              "fits": str(art.fits_path), "regime": art.result.regime.label,
                              "elapsed_s": round(art.result.elapsed, 3)}, indent=2))
        elif args.command == "check":
            report = cmd_check(_load(args.config, args))
            print(json.dumps(report.to_dict(), indent=2))
        elif args.command == "compare":
            configs = [_load(path, args) for path in args.config]
            out = f"{args.out}/{args.name}.csv"
            header, table = cmd_compare(configs, out)
            print(json.dumps({"csv": out, "columns": header, "rows": int(table.shape[0])}, indent=2))
        elif args.command == "reproduce":
            kw = {}
            if args.t_end is not None:
                kw["t_end"] = args.t_end
            if args.samples is not None:
                kw["samples"] = args.samples
            if args.seed is not None:
                kw["seed"] = args.seed
            if args.rtol is not None:
                kw["rtol"] = args.rtol
            arts = cmd_reproduce(args.example, args.out, **kw)
            print(json.dumps([{"name": a.name, "csv": str(a.csv_path), "regime": a.result.regime.label}
                              for a in arts], indent=2))
    except (ConfigError, ProblemError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: simulate, scan, validate, poles.

Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
failures inside a run.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import ConfigError, SpinCavityError
from .scan import load_config, run_poles, run_scan, run_simulate, run_validate


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spincavity",
        description="Cavity amplitude dynamics of a driven, inhomogeneously "
                    "broadened spin ensemble",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "simulate": "run a single trajectory and write it as CSV",
        "scan": "sweep omega_p, Omega or tau and write per-point summaries",
        "validate": "cross-check the solver against the discrete N-spin system",
        "poles": "report response poles and closed-form decay rates",
    }
    for name, desc in descriptions.items():
        cmd = sub.add_parser(name, help=desc)
        cmd.add_argument("--config", required=True,
                         help="path to a run config, or a bundled name like fig2b.json")
        cmd.add_argument("--out", help="override the configured output path")
        cmd.add_argument("--workers", type=int, help="override the worker count")
        cmd.add_argument("--reproducible", action="store_true",
                         help="suppress the timestamp comment for byte-identical output")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.workers is not None:
            config = replace(config, workers=args.workers)
        if args.reproducible:
            config = replace(config, reproducible=True)
        if args.command == "simulate":
            run_simulate(config, out_path=args.out)
        elif args.command == "scan":
            run_scan(config, out_path=args.out)
        elif args.command == "validate":
            report = run_validate(config)
            for key in ("n_spins", "stratified", "l2_distance", "l2_threshold",
                        "conservation_drift", "drift_threshold"):
                print(f"{key} = {report[key]}")
            print("l2_check:", "PASS" if report["l2_pass"] else "FAIL")
            print("conservation_check:",
                  "PASS" if report["conservation_pass"] else "FAIL")
            if args.out:
                import json
                with open(args.out, "w", encoding="utf-8") as fh:
                    json.dump(report, fh, indent=1, sort_keys=True)
                    fh.write("\n")
        else:
            report = run_poles(config)
            for key in sorted(report):
                print(f"{key} = {report[key]}")
            if args.out:
                import json
                with open(args.out, "w", encoding="utf-8") as fh:
                    json.dump(report, fh, indent=1, sort_keys=True)
                    fh.write("\n")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SpinCavityError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

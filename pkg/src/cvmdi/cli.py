"""Command line entry point: ``cvmdi {run,region,oracle-check,calibrate} --config FILE``.

Exit codes: 0 success, 2 malformed config, 3 infeasible parameters,
4 internal assertion or failed oracle check.
"""
import argparse
import dataclasses
import logging
import sys
import traceback

from . import experiments as ex
from ._validation import ConfigError, InfeasibleParameterError
from .config import load_config

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4

log = logging.getLogger("cvmdi")


def build_parser():
    parser = argparse.ArgumentParser(prog="cvmdi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "Monte Carlo witness estimates over a parameter sweep"),
        ("region", "closed-form witness margin map and its zero contours"),
        ("oracle-check", "compare the engine against the independent Wigner-sampling oracle"),
        ("calibrate", "fit the modulator response and compensate target amplitudes"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides CVMDI_OUT and the config)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("--k", type=float, help="violation threshold in standard errors")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _apply_overrides(cfg, args):
    changes = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be in [0, 2**64)", key="--seed")
        changes["seed"] = args.seed
    if args.k is not None:
        changes["violation_k"] = args.k
    if args.threads is not None and args.threads < 1:
        raise ConfigError("threads must be >= 1", key="--threads")
    out = ex.output_dir(cfg, args.out)
    if out != cfg.output:
        changes["output"] = out
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _execute(args):
    cfg = _apply_overrides(load_config(args.config), args)
    code = EXIT_OK
    if args.command == "run":
        rows, summary = ex.run(cfg, args.threads)
        files = {
            "results.csv": ("csv", (ex.run_columns(cfg.protocol), rows)),
            "summary.json": ("json", summary),
            "plot.gp": ("text", ex.run_plot_script(cfg)),
        }
        for r in rows:
            log.info("point %d: value %.6g +- %.2g, threshold %.6g, violated %s",
                     r["point"], r["value"], r["std_error"], r["threshold"], r["violated"])
    elif args.command == "oracle-check":
        rows, summary = ex.oracle_check(cfg, args.threads)
        files = {
            "results.csv": ("csv", (ex.oracle_columns(cfg.protocol), rows)),
            "summary.json": ("json", summary),
        }
        for r in rows:
            line = (f"point {r['point']}: engine {r['engine_value']:.6g} +- {r['engine_std_error']:.2g}, "
                    f"oracle {r['oracle_value']:.6g} +- {r['oracle_std_error']:.2g}, "
                    f"{r['z']:.2f} SE -> {'PASS' if r['pass'] else 'FAIL'}")
            if "variant" in r:
                line += f"; oracle matches {r['variant']} (plus {r['z_plus']:.1f} SE, minus {r['z_minus']:.1f} SE)"
            print(line)
        if not summary["passed"]:
            code = EXIT_INTERNAL
    elif args.command == "region":
        grid, rows, contour_rows, summary = ex.region(cfg, args.threads)
        files = {
            "region.csv": ("csv", (ex.REGION_COLUMNS, rows)),
            "contour.csv": ("csv", (ex.CONTOUR_COLUMNS, contour_rows)),
            "summary.json": ("json", summary),
            "plot.gp": ("text", ex.region_plot_script(summary)),
        }
    else:
        rows, summary = ex.calibrate(cfg)
        files = {
            "results.csv": ("csv", (ex.CALIBRATION_COLUMNS, rows)),
            "summary.json": ("json", summary),
        }
    ex.write_outputs(cfg.output, files)
    print(f"wrote {', '.join(sorted(files))} to {cfg.output}")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return _execute(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleParameterError as exc:
        print(f"infeasible parameters: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

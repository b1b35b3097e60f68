"""Command line entry point: ``simulate`` and ``sweep``.

Exit codes: 0 success, 1 configuration error, 2 solver non-convergence in
strict mode, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, SimConfig, load_config, normalize_algorithm
from .simulation import NonConvergenceError, run_experiment, sweep, write_text

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """Argument errors are configuration errors (exit code 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _csv_floats(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty value list")
    return values


def _csv_ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of integers: {text!r}")


def _common(p):
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--v", type=float, dest="v_param", help="control parameter V")
    p.add_argument("--lambda", type=float, dest="lam", help="mean arrivals per slot (bit/slot/Hz)")
    p.add_argument("--slots", type=int, help="number of slots")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--strict", action="store_true", default=None,
                   help="exit with code 2 if any solver fails to converge")
    p.add_argument("--out", help="CSV output path (default: stdout)")


def build_parser():
    parser = _Parser(prog="cran-d2d", description="C-RAN / D2D cross-layer resource allocation simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sim = sub.add_parser("simulate", help="run one Monte Carlo simulation")
    sim.add_argument("--algorithm", help="jmsra, cran or d2d")
    _common(sim)
    sw = sub.add_parser("sweep", help="sweep one parameter")
    sw.add_argument("--axis", required=True, choices=("v", "lambda", "fronthaul", "distance"))
    sw.add_argument("--values", required=True, type=_csv_floats, help="comma separated values")
    sw.add_argument("--algorithms", default="jmsra,cran,d2d", help="comma separated algorithms")
    sw.add_argument("--seeds", type=_csv_ints, help="comma separated seeds (default: --seed)")
    sw.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    _common(sw)
    return parser


def _config(args):
    cfg = load_config(args.config) if args.config else SimConfig()
    overrides = {k: getattr(args, k) for k in ("v_param", "lam", "slots", "seed", "strict")
                 if getattr(args, k, None) is not None}
    if getattr(args, "algorithm", None) is not None:
        overrides["algorithm"] = args.algorithm
    return cfg.with_(**overrides) if overrides else cfg


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        write_text(out, text)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "simulate":
            res = run_experiment(cfg)
            _emit(res.csv_text, args.out)
        else:
            algorithms = tuple(normalize_algorithm(a) for a in args.algorithms.split(",") if a.strip())
            if args.workers < 1:
                raise ConfigError("workers must be >= 1")
            _, text = sweep(cfg, args.axis, args.values, algorithms, args.seeds,
                            workers=args.workers)
            _emit(text, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

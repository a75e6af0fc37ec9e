"""Command-line entry point: ``hypersac {optimize,random-search,ablate,grad-check}``."""
import argparse
import sys

from . import gradcheck
from .errors import ConfigError, DatasetError, HyperSacError
from .harness import (VARIANTS, RunConfig, emit_ablation, emit_metrics, run_ablation,
                      run_random_search, run_sac_hpo, seed_override)
from .objectives import ObjectiveSpec

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """Bad flags are configuration errors, so they exit with 1 rather than 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(parser):
    parser.add_argument("--config", help="JSON file mirroring RunConfig fields")
    parser.add_argument("--variant", choices=sorted(VARIANTS))
    parser.add_argument("--seed", type=int)
    parser.add_argument("--episodes", type=int)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--objective", help="sphere, rastrigin-like or a CSV path")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--timing", action="store_true",
                        help="record wall-clock seconds (outputs are then not reproducible)")


def build_parser():
    parser = _Parser(prog="hypersac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _common(sub.add_parser("optimize", help="tune hyper-parameters with SAC"))
    _common(sub.add_parser("random-search", help="uniform random search at the same budget"))
    ablate = sub.add_parser("ablate", help="run several variants over shared seeds")
    _common(ablate)
    ablate.add_argument("--variants", nargs="+", default=list(VARIANTS))
    ablate.add_argument("--seeds", nargs="+", type=int)
    ablate.add_argument("--with-random", action="store_true",
                        help="add budget-matched random search runs")
    check = sub.add_parser("grad-check", help="finite-difference gradient suite")
    check.add_argument("--seeds", type=int, default=20)
    return parser


def load_config(args):
    """File values, then ``HYPERSAC_SEED``, then command-line flags."""
    config = RunConfig.from_json(args.config) if args.config else RunConfig()
    config = seed_override(config)
    changes = {}
    for name in ("variant", "episodes", "horizon", "out"):
        value = getattr(args, name)
        if value is not None:
            changes[name] = value
    if args.seed is not None:
        changes["seeds"] = [args.seed]
    if args.objective is not None:
        changes["objective"] = ObjectiveSpec.parse(args.objective)
    if args.timing:
        changes["record_wall_clock"] = True
    return config.replace(**changes) if changes else config


def _print_report(report):
    lam = ", ".join(f"{v:.6g}" for v in report.best_lambda or [])
    print(f"{report.variant} seed={report.seed} best_loss={report.best_loss:.6g} "
          f"evaluations={report.evaluations} best_lambda=[{lam}]")


def run(args):
    if args.command == "grad-check":
        results = gradcheck.run_suite(seeds=args.seeds)
        return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME

    config = load_config(args)
    if args.command == "ablate":
        seeds = args.seeds or config.seeds
        ablation = run_ablation(config, args.variants, seeds, include_random=args.with_random)
        for variant in ablation.variants:
            for seed in ablation.seeds:
                _print_report(ablation.runs[variant, seed])
        paths = emit_ablation(ablation, config.out, config.record_wall_clock)
    else:
        runner = run_sac_hpo if args.command == "optimize" else run_random_search
        reports = [runner(config, seed) for seed in config.seeds]
        for report in reports:
            _print_report(report)
        paths = emit_metrics(reports, config.out, config.record_wall_clock)
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (ConfigError, DatasetError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HyperSacError, OSError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

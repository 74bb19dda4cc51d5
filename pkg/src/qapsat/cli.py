"""``qapsat`` command-line entry point.

Exit status: 0 on success, 1 on usage errors, 2 on data or validation
errors (unreadable or malformed files, contract violations).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import QapError

log = logging.getLogger("qapsat")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _auto_or_int(text):
    if text == "auto":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}") from None


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _positive(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _emit(fmt, fields: dict):
    if fmt == "csv":
        print(",".join(fields))
        print(",".join("" if v is None else str(v) for v in fields.values()))
    else:
        for key, v in fields.items():
            print(f"{key}: {'-' if v is None else v}")


def _load(path):
    from .instance_io import InstanceFilePair, read_instance

    return read_instance(InstanceFilePair.from_data_path(path))


# --------------------------------------------------------------------------
# subcommands


def cmd_generate(args):
    from .generator import GeneratorConfig, generate
    from .instance_io import InstanceFilePair, write_instance

    qs = generate(GeneratorConfig(n=args.n, m=args.m, m1=args.m1, seed=args.seed, k=args.k))
    out = Path(args.out)
    stem = f"qapsat_n{args.n:02d}_m1-{args.m1:02d}_m{args.m:02d}_s{args.seed}"
    pair = InstanceFilePair(out / f"{stem}.dat", out / f"{stem}.json")
    write_instance(qs, pair)
    print(pair.data_path)
    print(pair.meta_path)
    return EXIT_OK


def cmd_suite(args):
    from .generator import generate_suite
    from .harness import ExperimentPlan

    plan = ExperimentPlan.load(args.plan)
    seed = plan.master_seed if args.seed is None else args.seed
    pairs = generate_suite(plan.cells(), plan.instances_per_cell, seed, args.out, k=plan.k)
    print(f"{len(pairs)} instances written to {args.out}")
    return EXIT_OK


def cmd_solve(args):
    from .core import QapSatInstance
    from .exact import branch_and_bound, enumerate_min

    inst = _load(args.input)
    target = args.target
    if target == "auto":
        target = inst.global_lower_bound if isinstance(inst, QapSatInstance) else None
    if args.method == "enum":
        out = enumerate_min(inst)
    else:
        out = branch_and_bound(inst, target=target, node_cap=args.node_cap)
    _emit(args.format, {
        "minimum": out.minimum,
        "satisfied": None if out.satisfied is None else int(out.satisfied),
        "proven": int(out.proven),
        "nodes": out.nodes_expanded,
        "lap_calls": out.lap_calls,
        "seconds": round(out.elapsed, 6),
        "permutation": " ".join(str(int(v) + 1) for v in out.argmin),
    })
    return EXIT_OK


def cmd_rots(args):
    from .exact import branch_and_bound
    from .rots import RotsConfig, rots_runs, summarize

    inst = _load(args.input)
    optimum = args.optimum
    if optimum == "auto":
        out = branch_and_bound(inst)
        optimum = out.minimum
    cfg = RotsConfig(max_iterations=args.max_iterations, runs=args.runs, seed=args.seed)
    results = rots_runs(inst, optimum, cfg)
    rate, iters = summarize(results, cfg.max_iterations)
    _emit(args.format, {
        "optimum": optimum,
        "runs": cfg.runs,
        "success_rate": round(rate, 6),
        "mean_iterations": round(iters, 3),
        "best": min(r.best_value for r in results),
    })
    return EXIT_OK


def cmd_experiment(args):
    from .harness import ExperimentPlan, run_experiment

    plan = ExperimentPlan.load(args.plan)
    if args.workers is not None:
        plan.workers = args.workers
    if args.solvers is not None:
        plan = ExperimentPlan(**{**plan.__dict__, "solvers": args.solvers.split(",")})
    ledger = args.ledger or plan.ledger
    if ledger is None:
        raise UsageError("no ledger path: pass --ledger or set 'ledger' in the plan")
    path = run_experiment(plan, ledger)
    print(path)
    return EXIT_OK


def cmd_analyze(args):
    from .analysis import analyze_ledger, load_ledger, summary_lines, write_analysis
    from .plots import emit_plots

    result = analyze_ledger(load_ledger(args.ledger), effort=args.effort, success_form=args.success_form)
    paths = write_analysis(result, args.out)
    if not args.no_plots:
        paths += emit_plots(result, args.out)
    for line in summary_lines(result):
        print(line)
    for p in paths:
        log.info("wrote %s", p)
    return EXIT_OK


def cmd_plot(args):
    from .analysis import read_analysis
    from .plots import emit_plots

    paths = emit_plots(read_analysis(args.fits), args.out)
    for p in paths:
        print(p)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qapsat", description="QAP-SAT instance generation, exact and tabu solving, "
                "phase-transition experiments.  Set QAPSAT_LOG=INFO for progress messages.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)

    g = sub.add_parser("generate", help="write one QAP-SAT instance (matrix file + JSON sidecar)")
    g.add_argument("--n", type=int, required=True, help="instance size")
    g.add_argument("--k", type=int, default=3, help="clause arity (default 3)")
    g.add_argument("--m", type=int, required=True, help="number of flow (A) clauses")
    g.add_argument("--m1", type=int, required=True, help="number of distance (B) clauses")
    g.add_argument("--seed", type=_nonneg, required=True, help="generator seed")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("suite", help="write every instance of a plan's design grid")
    s.add_argument("--plan", required=True, help="experiment plan (JSON)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=_nonneg, default=None, help="master seed (default: the plan's)")
    s.set_defaults(func=cmd_suite)

    v = sub.add_parser("solve", help="solve an instance exactly")
    v.add_argument("--in", dest="input", required=True, help="matrix file; a .json sidecar next to it is used if present")
    v.add_argument("--method", choices=("bnb", "enum"), default="bnb", help="exact method (default bnb)")
    v.add_argument("--target", type=_auto_or_int, default=None,
                   help="stop once this value is reached; 'auto' uses the sidecar's clause lower bound "
                        "(optimization mode without a sidecar)")
    v.add_argument("--node-cap", type=_positive, default=None, help="give up after this many expanded nodes")
    v.add_argument("--format", choices=("plain", "csv"), default="plain", help="output format")
    v.set_defaults(func=cmd_solve)

    r = sub.add_parser("rots", help="repeated robust tabu search runs against a known optimum")
    r.add_argument("--in", dest="input", required=True, help="matrix file")
    r.add_argument("--optimum", type=_auto_or_int, default="auto",
                   help="target value; 'auto' solves the instance first (default)")
    r.add_argument("--runs", type=_positive, default=30, help="independent runs (default 30)")
    r.add_argument("--max-iterations", type=_positive, default=1000, help="iteration budget per run (default 1000)")
    r.add_argument("--seed", type=_nonneg, default=0, help="seed for the run seeds (default 0)")
    r.add_argument("--format", choices=("plain", "csv"), default="plain", help="output format")
    r.set_defaults(func=cmd_rots)

    e = sub.add_parser("experiment", help="run a plan and append results to a CSV ledger (restartable)")
    e.add_argument("--plan", required=True, help="experiment plan (JSON)")
    e.add_argument("--ledger", default=None, help="ledger CSV (default: the plan's)")
    e.add_argument("--workers", type=_positive, default=None, help="worker processes (default: the plan's)")
    e.add_argument("--solvers", default=None, help="comma-separated subset of bnb,enum,rots")
    e.set_defaults(func=cmd_experiment)

    a = sub.add_parser("analyze", help="fit models to a ledger; writes curves.csv, fits.csv and figures")
    a.add_argument("--ledger", required=True, help="ledger CSV")
    a.add_argument("--out", required=True, help="output directory")
    a.add_argument("--effort", choices=("mean_nodes", "mean_seconds"), default="mean_nodes",
                   help="B&B effort measure for the sigmoid fits")
    a.add_argument("--success-form", choices=("complement", "decreasing"), default="complement",
                   help="tabu success curve model: sigmoid on 1 - rate (default) or falling sigmoid on the rate")
    a.add_argument("--no-plots", action="store_true", help="skip the figures")
    a.set_defaults(func=cmd_analyze)

    f = sub.add_parser("plot", help="render figures from an analyze output directory")
    f.add_argument("--fits", required=True, help="directory holding curves.csv and fits.csv")
    f.add_argument("--out", required=True, help="output directory")
    f.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    from .harness import configure_logging

    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (QapError, OSError, ValueError) as exc:
        print(f"qapsat: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:  # --help / --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

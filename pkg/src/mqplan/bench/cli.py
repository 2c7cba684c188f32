"""Command line entry point: ``python -m mqplan.bench <command> ...``.

Commands
--------
run      seeded runs of one planner on one scenario
family   shuffled family instances on one session per shuffle
ablate   repeated-query sessions with and without batch rewinding
sweep    first-solution runs across collision checking resolutions
list     bundled scenario names
"""

from __future__ import annotations

import argparse
import logging
import sys

from mqplan.bench import emit, runner
from mqplan.bench.scenario import ScenarioError, bundled_scenarios, load_scenario
from mqplan.planners import PLANNERS

log = logging.getLogger("mqplan.bench")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _resolutions(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text!r}") from None
    if not vals or any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError("resolutions must be positive")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mqplan", description="Multi-query manipulation planning benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, planner_default="eolazyprmstar"):
        sp.add_argument("--scenario", required=True, help="scenario file or bundled scenario name")
        sp.add_argument("--planner", choices=sorted(PLANNERS), default=planner_default)
        sp.add_argument("--seed", type=int, default=0, help="seed of the first run")
        sp.add_argument("--budget", type=_positive_float, default=10.0, help="time budget per action (s)")
        sp.add_argument("--out", default="results", help="output directory")

    sp = sub.add_parser("run", help="seeded runs on one scenario")
    common(sp)
    sp.add_argument("--runs", type=_positive_int, default=100)
    sp.add_argument("--mode", choices=runner.MODES, default="first")
    sp.add_argument("--variant", type=int, default=None, help="family variant to run instead of the base problem")

    sp = sub.add_parser("family", help="shuffled family instances")
    common(sp)
    sp.add_argument("--shuffles", type=_positive_int, default=20)

    sp = sub.add_parser("ablate", help="batch rewinding ablation on repeated queries")
    common(sp)
    sp.add_argument("--runs", type=_positive_int, default=20)
    sp.add_argument("--queries", type=_positive_int, default=10)
    sp.add_argument("--no-rewind", action="store_true", help="only run the variant without rewinding")

    sp = sub.add_parser("sweep", help="collision checking resolution sweep")
    common(sp, planner_default="rrtconnect")
    sp.add_argument("--runs", type=_positive_int, default=20)
    sp.add_argument("--resolutions", type=_resolutions, default=[1e-2, 1e-3])

    sub.add_parser("list", help="list bundled scenarios")
    return p


def _report(paths: dict) -> None:
    for name, path in paths.items():
        print(f"{name}: {path}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "list":
        for name in bundled_scenarios():
            print(name)
        return 0
    try:
        sc = load_scenario(args.scenario)
        if args.command == "run":
            if args.variant is not None and not 0 <= args.variant < len(sc.family):
                raise ValueError(f"scenario {sc.name!r} has {len(sc.family)} family variants")
            log.info("run %s on %s: %d runs", args.planner, sc.name, args.runs)
            recs = runner.run_benchmark(sc, args.planner, args.runs, args.seed, args.budget, args.mode,
                                        variant=args.variant)
            _report(emit.emit_runs(recs, args.out, args.budget))
        elif args.command == "family":
            log.info("family %s on %s: %d shuffles", args.planner, sc.name, args.shuffles)
            recs = runner.run_family(sc, args.planner, args.shuffles, args.seed, args.budget)
            _report(emit.emit_queries(recs, args.out, "family"))
        elif args.command == "ablate":
            settings = [False] if args.no_rewind else [True, False]
            recs = []
            for rw in settings:
                log.info("ablate %s on %s: rewind=%s", args.planner, sc.name, rw)
                recs += runner.run_repeated(sc, args.planner, args.runs, args.queries, args.seed, args.budget, rw)
            _report(emit.emit_queries(recs, args.out, "ablation"))
        elif args.command == "sweep":
            log.info("sweep %s on %s: %s", args.planner, sc.name, args.resolutions)
            sweep = runner.run_sweep(sc, args.planner, args.resolutions, args.runs, args.seed, args.budget)
            _report(emit.emit_sweep(sweep, args.out))
    except (ScenarioError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

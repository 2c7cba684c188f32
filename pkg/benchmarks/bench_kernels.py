"""Compare the compiled collision kernels with the pure-Python twin.

Runs batched state checks on random configurations of every bundled
scenario, asserts that both backends return identical collision bits and
prints the per-state time of each backend and the speedup. A second table
times whole planner runs per backend in subprocesses, since the backend is
chosen at import time.

Usage::

    python benchmarks/bench_kernels.py [--states N] [--repeat R] [--seed S] [--runs K]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from mqplan import _kernels_py
from mqplan.bench.scenario import bundled_scenarios, load_scenario
from mqplan.kernels import PART_OS, PART_RO, PART_RS
from mqplan.rgg import sample_uniform

try:
    from mqplan import _kernels as _kernels_c  # type: ignore[attr-defined]
except ImportError:
    _kernels_c = None

MASK = PART_RS | PART_RO | PART_OS


def _time(fn, args, repeat: int) -> tuple[float, np.ndarray]:
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_scenario(name: str, n_states: int, repeat: int, seed: int) -> dict:
    sc = load_scenario(name)
    scene = sc.build_scene()
    act = sc.sequence()[-1]
    scene.update_parametrization(act.moved, act.objects)
    qs = sample_uniform(np.random.default_rng(seed), sc.bounds, n_states)
    args = (scene.body_poses(qs), scene._verts, scene._nverts, scene._radius, scene._bound,
            scene._pairs, scene._parts, MASK)
    t_py, bits_py = _time(_kernels_py.state_flags, args, 1)
    row = {"scenario": name, "states": n_states, "pairs": len(scene._pairs), "python_us": 1e6 * t_py / n_states}
    if _kernels_c is not None:
        t_c, bits_c = _time(_kernels_c.state_flags, args, repeat)
        if not np.array_equal(np.asarray(bits_c), np.asarray(bits_py)):
            raise AssertionError(f"{name}: backends disagree")
        row["cython_us"] = 1e6 * t_c / n_states
        row["speedup"] = t_py / t_c
    return row


_END_TO_END = """
import sys, time
from mqplan.bench.runner import run_benchmark
from mqplan.bench.scenario import load_scenario
sc = load_scenario(sys.argv[1])
t0 = time.perf_counter()
recs = run_benchmark(sc, sys.argv[2], int(sys.argv[3]), 0, 60.0)
assert all(r.success for r in recs)
print(time.perf_counter() - t0, sum(sum(a.checks_rs + a.checks_ro + a.checks_os for a in r.actions) for r in recs))
"""


def end_to_end(scenario: str, planner: str, runs: int, pure: bool) -> tuple[float, int]:
    env = dict(os.environ, MQPLAN_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", _END_TO_END, scenario, planner, str(runs)], env=env,
                         check=True, capture_output=True, text=True).stdout.split()
    return float(out[0]), int(out[1])


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--states", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=3, help="planner runs per backend in the end-to-end table")
    args = p.parse_args(argv)
    if _kernels_c is None:
        print("compiled extension not built; only the Python backend is timed", file=sys.stderr)
    print(f"{'scenario':<18}{'pairs':>6}{'python us/state':>17}{'cython us/state':>17}{'speedup':>9}")
    for name in bundled_scenarios():
        r = bench_scenario(name, args.states, args.repeat, args.seed)
        c = f"{r['cython_us']:>17.2f}{r['speedup']:>9.1f}" if "cython_us" in r else f"{'-':>17}{'-':>9}"
        print(f"{r['scenario']:<18}{r['pairs']:>6}{r['python_us']:>17.2f}{c}")
    if _kernels_c is None:
        return 0
    print()
    print(f"{'scenario':<18}{'planner':<15}{'python s':>10}{'cython s':>10}{'speedup':>9}")
    for name, planner in (("wall_gap", "rrtconnect"), ("wall_gap", "eirmstar"), ("handover", "eolazyprmstar")):
        t_py, n_py = end_to_end(name, planner, args.runs, True)
        t_c, n_c = end_to_end(name, planner, args.runs, False)
        if n_py != n_c:
            raise AssertionError(f"{name}/{planner}: check counts differ between backends")
        print(f"{name:<18}{planner:<15}{t_py:>10.2f}{t_c:>10.2f}{t_py / t_c:>9.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

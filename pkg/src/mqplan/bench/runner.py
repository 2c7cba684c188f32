"""Seeded benchmark runs: sequences, families, rewinding ablation and resolution sweeps."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from mqplan.bench.scenario import ScenarioFile
from mqplan.manip import SessionPolicy, solve_family, solve_sequence
from mqplan.planners import PLANNERS, PlannerConfig, PlanningSession, Query, StopCondition, make_planner

MODES = ("first", "anytime")


@dataclass
class ActionRecord:
    index: int
    success: bool
    t_init: float
    c_init: float
    cost: float
    checks_rs: int
    checks_ro: int
    checks_os: int
    trace: list = field(default_factory=list)
    path: list | None = None


@dataclass
class RunRecord:
    scenario: str
    planner: str
    seed: int
    mode: str
    budget: float
    actions: list

    @property
    def success(self) -> bool:
        return bool(self.actions) and all(a.success for a in self.actions)

    @property
    def solve_time(self) -> float:
        """Time to a first solution of every action, planned back to back; ``inf`` on failure."""
        if not self.success:
            return math.inf
        return float(sum(a.t_init for a in self.actions))

    def counters(self) -> tuple:
        return tuple((a.checks_rs, a.checks_ro, a.checks_os) for a in self.actions)


def _config(scenario: ScenarioFile, overrides: dict | None) -> PlannerConfig:
    cfg = scenario.planner
    return dataclasses.replace(cfg, **overrides) if overrides else dataclasses.replace(cfg)


def _check_args(planner: str, mode: str, runs: int = 1) -> None:
    if planner not in PLANNERS:
        raise ValueError(f"unknown planner {planner!r}; choose from {sorted(PLANNERS)}")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if runs < 1:
        raise ValueError("runs must be at least 1")


def _action_record(i: int, sol, keep_path: bool) -> ActionRecord:
    c = sol.checks_init if sol.success else sol.checks
    return ActionRecord(
        i, sol.success, sol.t_init, sol.c_init, sol.cost, c.rs, c.ro, c.os, list(sol.trace),
        sol.path.configs.tolist() if keep_path and sol.path is not None else None,
    )


def run_benchmark(scenario: ScenarioFile, planner: str, runs: int, seed0: int = 0, budget: float = 10.0,
                  mode: str = "first", variant: int | None = None, overrides: dict | None = None,
                  max_iterations: int | None = None, keep_paths: bool = False) -> list[RunRecord]:
    """Run ``runs`` fresh sessions with seeds ``seed0 + i`` on the scenario's action sequence.

    Check counters are those spent up to the first solution of each action.
    """
    _check_args(planner, mode, runs)
    cfg = _config(scenario, overrides)
    stop = StopCondition(mode == "first", budget, max_iterations)
    out = []
    for i in range(runs):
        seed = seed0 + i
        scene = scenario.build_scene(variant)
        session = PlanningSession(scene, scenario.bounds, cfg, seed)
        sols = solve_sequence(session, scenario.sequence(variant), SessionPolicy(planner, "full", stop))
        acts = [_action_record(k, s, keep_paths) for k, s in enumerate(sols)]
        out.append(RunRecord(scenario.name, planner, seed, mode, budget, acts))
    return sorted(out, key=lambda r: r.seed)


@dataclass
class QueryRecord:
    """One query inside a multi-query session (family instance or repeated query)."""

    scenario: str
    planner: str
    seed: int
    setting: str
    position: int
    instance: int
    success: bool
    t_init: float
    checks_rs: int
    checks_ro: int
    checks_os: int
    graph_size: int


def run_family(scenario: ScenarioFile, planner: str, shuffles: int, seed0: int = 0, budget: float = 10.0,
               overrides: dict | None = None) -> list[QueryRecord]:
    """Solve all family instances in ``shuffles`` random orders, reusing robot/static knowledge only."""
    _check_args(planner, "first", shuffles)
    cfg = _config(scenario, overrides)
    instances = scenario.instances()
    scenes = [sc for sc, _ in instances]
    seqs = [sq for _, sq in instances]
    policy = SessionPolicy(planner, "static", StopCondition(True, budget))
    out = []
    for k in range(shuffles):
        seed = seed0 + k
        order = np.random.default_rng(seed).permutation(len(scenes)).tolist()
        results = solve_family(scenes, seqs, policy, scenario.bounds, cfg, seed, order)
        for pos, res in enumerate(results):
            c = [s.checks for s in res.solutions]
            out.append(QueryRecord(
                scenario.name, planner, seed, "family", pos, res.instance, res.success, res.t_init,
                sum(x.rs for x in c), sum(x.ro for x in c), sum(x.os for x in c),
                max((s.graph_size for s in res.solutions), default=0),
            ))
    return out


def run_repeated(scenario: ScenarioFile, planner: str, runs: int, queries: int = 10, seed0: int = 0,
                 budget: float = 10.0, rewind: bool = True, overrides: dict | None = None,
                 setting: str | None = None) -> list[QueryRecord]:
    """Multi-query sessions cycling through the scenario's actions as independent queries."""
    _check_args(planner, "first", runs)
    ov = dict(overrides or {})
    ov["rewind"] = rewind
    cfg = _config(scenario, ov)
    seq = scenario.sequence()
    setting = setting or ("rewind" if rewind else "no-rewind")
    out = []
    for r in range(runs):
        seed = seed0 + r
        session = PlanningSession(scenario.build_scene(), scenario.bounds, cfg, seed)
        p = make_planner(planner, session)
        for qi in range(queries):
            act = seq[qi % len(seq)]
            sol = p.solve(Query(act.q_start, act.q_goal, act.moved, act.objects, StopCondition(True, budget)))
            c = sol.checks
            out.append(QueryRecord(scenario.name, planner, seed, setting, qi, qi % len(seq), sol.success,
                                   sol.t_init, c.rs, c.ro, c.os, sol.graph_size))
    return out


def run_sweep(scenario: ScenarioFile, planner: str, resolutions, runs: int, seed0: int = 0,
              budget: float = 10.0) -> dict[float, list[RunRecord]]:
    """First-solution runs at each collision checking resolution.

    Only the checking resolution varies: the steer factor is rescaled so that
    the steer step keeps the scenario's distance at every resolution.
    """
    steer = scenario.planner.steer_step
    return {
        float(res): run_benchmark(scenario, planner, runs, seed0, budget, "first",
                                  overrides={"resolution": float(res), "steer_factor": steer / float(res)})
        for res in resolutions
    }

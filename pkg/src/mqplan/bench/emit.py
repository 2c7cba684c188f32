"""Machine-readable result tables (CSV) and a JSON summary.

Every table has a fixed schema in :data:`SCHEMAS`; :func:`validate_table`
checks a written file against it. Failures are written as ``inf``.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from pathlib import Path

import numpy as np

from mqplan.bench.runner import QueryRecord, RunRecord
from mqplan.bench.stats import cost_on_grid, log_grid, median_ci, success_curve

SCHEMAS: dict[str, list[tuple[str, type]]] = {
    "runs": [
        ("scenario", str), ("planner", str), ("seed", int), ("action", int), ("t_init_s", float),
        ("c_init", float), ("checks_rs", int), ("checks_ro", int), ("checks_os", int), ("success", int),
    ],
    "summary": [
        ("scenario", str), ("planner", str), ("runs", int), ("successes", int),
        ("t_init_median", float), ("t_init_lower", float), ("t_init_upper", float),
        ("c_init_median", float), ("c_init_lower", float), ("c_init_upper", float),
        ("checks_median", float),
    ],
    "success_curve": [("scenario", str), ("planner", str), ("time_s", float), ("success_rate", float)],
    "cost_curve": [
        ("scenario", str), ("planner", str), ("action", int), ("time_s", float),
        ("cost_median", float), ("cost_lower", float), ("cost_upper", float),
    ],
    "queries": [
        ("scenario", str), ("planner", str), ("seed", int), ("setting", str), ("position", int),
        ("instance", int), ("t_init_s", float), ("checks_rs", int), ("checks_ro", int), ("checks_os", int),
        ("graph_size", int), ("success", int),
    ],
    "query_summary": [
        ("scenario", str), ("planner", str), ("setting", str), ("position", int), ("runs", int),
        ("t_init_median", float), ("t_init_lower", float), ("t_init_upper", float), ("checks_median", float),
    ],
    "sweep": [
        ("scenario", str), ("planner", str), ("resolution", float), ("action", int), ("runs", int),
        ("checks_median", float), ("t_init_median", float),
    ],
}


def _write(path: Path, schema: str, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [c for c, _ in SCHEMAS[schema]]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            if len(r) != len(cols):
                raise ValueError(f"{schema} row has {len(r)} fields, expected {len(cols)}")
            w.writerow([int(x) if isinstance(x, bool) else x for x in r])
    return path


def validate_table(path, schema: str) -> int:
    """Check header and field types of a CSV table; returns the number of data rows."""
    columns = SCHEMAS[schema]
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != [c for c, _ in columns]:
        raise ValueError(f"{path}: header does not match schema {schema!r}")
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(columns):
            raise ValueError(f"{path}:{i}: {len(row)} fields, expected {len(columns)}")
        for (name, kind), val in zip(columns, row):
            try:
                kind(val)
            except ValueError:
                raise ValueError(f"{path}:{i}: column {name!r} is not {kind.__name__}: {val!r}") from None
            if kind is float and math.isnan(float(val)):
                raise ValueError(f"{path}:{i}: column {name!r} is NaN")
    return len(rows) - 1


# -- row builders ---------------------------------------------------------------------


def run_rows(records: list[RunRecord]) -> list[list]:
    """One row per (run, action), sorted by scenario, planner and seed."""
    rows = []
    for r in sorted(records, key=lambda r: (r.scenario, r.planner, r.seed)):
        for a in r.actions:
            rows.append([r.scenario, r.planner, r.seed, a.index, a.t_init, a.c_init,
                         a.checks_rs, a.checks_ro, a.checks_os, a.success])
    return rows


def _groups(records, key):
    out = defaultdict(list)
    for r in records:
        out[key(r)].append(r)
    return dict(sorted(out.items()))


def summary_rows(records: list[RunRecord]) -> list[list]:
    """One row per (scenario, planner): whole-sequence solve time and initial cost."""
    rows = []
    for (scn, pl), rs in _groups(records, lambda r: (r.scenario, r.planner)).items():
        t = median_ci([r.solve_time for r in rs])
        c = median_ci([sum(a.c_init for a in r.actions) if r.success else math.inf for r in rs])
        checks = float(np.median([sum(a.checks_rs + a.checks_ro + a.checks_os for a in r.actions) for r in rs]))
        rows.append([scn, pl, len(rs), sum(r.success for r in rs), t.median, t.lower, t.upper,
                     c.median, c.lower, c.upper, checks])
    return rows


def success_rows(records: list[RunRecord], grid) -> list[list]:
    rows = []
    for (scn, pl), rs in _groups(records, lambda r: (r.scenario, r.planner)).items():
        curve = success_curve([r.solve_time for r in rs], grid)
        rows.extend([scn, pl, float(t), float(v)] for t, v in zip(grid, curve))
    return rows


def cost_rows(records: list[RunRecord], grid) -> list[list]:
    """Median best cost per action over runs at each grid time (time measured within the action)."""
    rows = []
    for (scn, pl), rs in _groups(records, lambda r: (r.scenario, r.planner)).items():
        n_act = max(len(r.actions) for r in rs)
        for k in range(n_act):
            curves = np.array([
                cost_on_grid(r.actions[k].trace if k < len(r.actions) else [], grid) for r in rs
            ])
            for j, t in enumerate(grid):
                s = median_ci(curves[:, j])
                rows.append([scn, pl, k, float(t), s.median, s.lower, s.upper])
    return rows


def query_rows(records: list[QueryRecord]) -> list[list]:
    return [
        [q.scenario, q.planner, q.seed, q.setting, q.position, q.instance, q.t_init,
         q.checks_rs, q.checks_ro, q.checks_os, q.graph_size, q.success]
        for q in sorted(records, key=lambda q: (q.scenario, q.planner, q.setting, q.seed, q.position))
    ]


def query_summary_rows(records: list[QueryRecord]) -> list[list]:
    """Median time to first solution per query position (plot-ready multi-query curves)."""
    rows = []
    for (scn, pl, st, pos), qs in _groups(records, lambda q: (q.scenario, q.planner, q.setting, q.position)).items():
        s = median_ci([q.t_init for q in qs])
        checks = float(np.median([q.checks_rs + q.checks_ro + q.checks_os for q in qs]))
        rows.append([scn, pl, st, pos, len(qs), s.median, s.lower, s.upper, checks])
    return rows


def sweep_rows(sweep: dict[float, list[RunRecord]]) -> list[list]:
    rows = []
    for res, recs in sorted(sweep.items(), reverse=True):
        for (scn, pl), rs in _groups(recs, lambda r: (r.scenario, r.planner)).items():
            n_act = max(len(r.actions) for r in rs)
            for k in range(n_act):
                acts = [r.actions[k] for r in rs if k < len(r.actions)]
                checks = float(np.median([a.checks_rs + a.checks_ro + a.checks_os for a in acts]))
                t = median_ci([a.t_init if a.success else math.inf for a in acts]).median
                rows.append([scn, pl, res, k, len(acts), checks, t])
    return rows


# -- writers --------------------------------------------------------------------------


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


def _write_json(path: Path, tables: dict) -> Path:
    doc = {name: [dict(zip([c for c, _ in SCHEMAS[name]], row)) for row in rows] for name, rows in tables.items()}
    path.write_text(json.dumps(_json_safe(doc), indent=1))
    return path


def emit_runs(records: list[RunRecord], out_dir, budget: float | None = None) -> dict[str, Path]:
    """Write per-run, summary, success-curve and cost-curve tables plus ``summary.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if budget is None:
        budget = max((r.budget for r in records), default=1.0)
    grid = log_grid(budget)
    tables = {"runs": run_rows(records), "summary": summary_rows(records)}
    if records:
        tables["success_curve"] = success_rows(records, grid)
        tables["cost_curve"] = cost_rows(records, grid)
    else:
        tables["success_curve"] = []
        tables["cost_curve"] = []
    paths = {name: _write(out / f"{name}.csv", name, rows) for name, rows in tables.items()}
    paths["json"] = _write_json(out / "summary.json", {"summary": tables["summary"]})
    return paths


def emit_queries(records: list[QueryRecord], out_dir, stem: str = "queries") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summ = query_summary_rows(records)
    paths = {
        "queries": _write(out / f"{stem}.csv", "queries", query_rows(records)),
        "query_summary": _write(out / f"{stem}_summary.csv", "query_summary", summ),
    }
    paths["json"] = _write_json(out / f"{stem}_summary.json", {"query_summary": summ})
    return paths


def emit_sweep(sweep: dict[float, list[RunRecord]], out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = sweep_rows(sweep)
    return {
        "sweep": _write(out / "sweep.csv", "sweep", rows),
        "runs": _write(out / "sweep_runs.csv", "runs", run_rows([r for rs in sweep.values() for r in rs])),
        "json": _write_json(out / "sweep.json", {"sweep": rows}),
    }

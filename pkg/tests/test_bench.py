"""Scenario files, statistics, result tables, runner and command line."""

from __future__ import annotations

import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
import yaml
from oracles import binomial_ci_ranks

from mqplan.bench import emit, runner
from mqplan.bench.cli import main
from mqplan.bench.scenario import ScenarioError, bundled_scenarios, dump_scenario, load_scenario, parse_scenario
from mqplan.bench.stats import ci_ranks, cost_on_grid, log_grid, median_ci, power_law_exponent, success_curve

# -- statistics -----------------------------------------------------------------------


def test_ci_ranks_match_exact_binomial_oracle():
    for n in range(1, 201):
        assert ci_ranks(n) == binomial_ci_ranks(n), n


def test_median_ci_of_one_to_hundred():
    s = median_ci(range(1, 101))
    assert s.median == 50.5
    assert (s.rank_lower, s.rank_upper) == (40, 61)
    assert (s.lower, s.upper) == (40.0, 61.0)


def test_median_ci_degenerate_samples():
    s = median_ci([3.25])
    assert (s.median, s.lower, s.upper) == (3.25, 3.25, 3.25)
    s = median_ci([7.0] * 13)
    assert (s.median, s.lower, s.upper) == (7.0, 7.0, 7.0)
    with pytest.raises(ValueError):
        median_ci([])
    with pytest.raises(ValueError):
        median_ci([1.0, math.nan])


def test_median_ci_with_failures():
    s = median_ci([1.0, 2.0, math.inf, math.inf])
    assert s.median == math.inf
    assert median_ci([1.0, 2.0, 3.0, math.inf]).median == 2.5


def test_median_ci_is_order_independent():
    rng = np.random.default_rng(0)
    x = rng.random(57)
    a, b = median_ci(x), median_ci(rng.permutation(x))
    assert a == b
    assert a.lower <= a.median <= a.upper


def test_success_curves():
    grid = log_grid(10.0)
    assert np.all(success_curve([0.0] * 5, grid) == 1.0)
    assert np.all(success_curve([math.inf] * 5, grid) == 0.0)
    rng = np.random.default_rng(1)
    times = np.where(rng.random(100) < 0.2, math.inf, rng.exponential(2.0, 100))
    c = success_curve(times, grid)
    assert np.all(np.diff(c) >= 0) and 0 <= c[0] and c[-1] <= 1
    assert c[-1] == pytest.approx(np.mean(times <= 10.0))


def test_log_grid():
    g = log_grid(10.0)
    assert g[0] == pytest.approx(1e-3) and g[-1] == pytest.approx(10.0) and np.all(np.diff(g) > 0)


def test_cost_on_grid():
    out = cost_on_grid([(0.5, 3.0), (2.0, 2.0), (4.0, 2.5)], [0.1, 0.5, 1.0, 3.0, 5.0])
    assert out.tolist() == [math.inf, 3.0, 3.0, 2.0, 2.0]


def test_power_law_exponent():
    xs = [100, 1000]
    assert power_law_exponent(xs, [3 * x ** 0.8 for x in xs]) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        power_law_exponent([1], [1])


# -- scenario files ---------------------------------------------------------------------


def test_bundled_wall_gap():
    sc = load_scenario("wall_gap")
    assert len(sc.actions) == 2 and len(sc.movables) == 1
    assert set(bundled_scenarios()) >= {"wall_gap", "handover", "corridor_family", "empty_world"}


@pytest.mark.parametrize("name", ["wall_gap", "handover", "corridor_family", "empty_world"])
def test_round_trip(name):
    sc = load_scenario(name)
    again = parse_scenario(dump_scenario(sc))
    assert again.to_dict() == sc.to_dict()


def _wall_gap_text():
    return dump_scenario(load_scenario("wall_gap"))


def test_chaining_error_names_action():
    doc = yaml.safe_load(_wall_gap_text())
    doc["actions"][1]["start"] = [0.7, 0.2]
    with pytest.raises(ScenarioError, match="action 1") as info:
        parse_scenario(yaml.safe_dump(doc, sort_keys=False), "bad.yaml")
    assert "actions/1" in str(info.value)


@pytest.mark.parametrize("old, new, where", [
    ("version: 1", "version: 2", "version"),
    ("radius: 0.03", "radius: -0.03", "robot"),
    ("type: freeflyer", "type: hovercraft", "robot/type"),
    ("name: wall_gap", "name: wall_gap\ncolour: red", "colour"),
    ("batch_size: 500", "batch_size: 0", "planner"),
])
def test_errors_name_field_and_line(old, new, where):
    text = _wall_gap_text()
    assert old in text
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text.replace(old, new, 1), "bad.yaml")
    msg = str(info.value)
    assert where in msg and "bad.yaml:" in msg
    assert info.value.line is not None


def test_malformed_yaml_and_missing_file(tmp_path):
    with pytest.raises(ScenarioError):
        parse_scenario("name: [unclosed", "x.yaml")
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.yaml")


def test_endpoint_outside_bounds_rejected():
    doc = yaml.safe_load(_wall_gap_text())
    doc["bounds"][0] = [0.0, 0.5]
    with pytest.raises(ScenarioError, match="outside the bounds"):
        parse_scenario(yaml.safe_dump(doc, sort_keys=False))


def test_family_instances():
    sc = load_scenario("corridor_family")
    inst = sc.instances()
    assert len(inst) == 10
    assert all(inst[0][0].same_environment(s) for s, _ in inst)
    assert len({repr(s.movables) for s, _ in inst}) > 1


# -- runner and tables --------------------------------------------------------------------


@pytest.fixture(scope="module")
def records():
    sc = load_scenario("wall_gap")
    return runner.run_benchmark(sc, "eirmstar", 3, 0, 10.0) + runner.run_benchmark(sc, "rrtconnect", 3, 0, 10.0)


def test_runs_with_equal_seeds_are_identical():
    sc = load_scenario("wall_gap")
    a = runner.run_benchmark(sc, "eolazyprmstar", 2, 5, 10.0, keep_paths=True)
    b = runner.run_benchmark(sc, "eolazyprmstar", 2, 5, 10.0, keep_paths=True)
    assert [r.counters() for r in a] == [r.counters() for r in b]
    assert [[x.path for x in r.actions] for r in a] == [[x.path for x in r.actions] for r in b]


def test_anytime_mode_records_traces():
    sc = load_scenario("wall_gap")
    recs = runner.run_benchmark(sc, "eirmstar", 1, 0, 10.0, "anytime", max_iterations=4)
    for a in recs[0].actions:
        assert len(a.trace) >= 1 and a.cost <= a.c_init


def test_runner_argument_errors():
    sc = load_scenario("wall_gap")
    with pytest.raises(ValueError):
        runner.run_benchmark(sc, "prm", 1)
    with pytest.raises(ValueError):
        runner.run_benchmark(sc, "eirmstar", 0)
    with pytest.raises(ValueError):
        runner.run_benchmark(sc, "eirmstar", 1, mode="forever")


def test_emitted_tables_validate(records, tmp_path):
    paths = emit.emit_runs(records, tmp_path, 10.0)
    assert emit.validate_table(paths["runs"], "runs") == 12
    assert emit.validate_table(paths["summary"], "summary") == 2
    n = emit.validate_table(paths["success_curve"], "success_curve")
    assert n == 2 * len(log_grid(10.0))
    assert emit.validate_table(paths["cost_curve"], "cost_curve") == 2 * 2 * len(log_grid(10.0))
    doc = json.loads(paths["json"].read_text())
    assert {row["planner"] for row in doc["summary"]} == {"eirmstar", "rrtconnect"}
    with open(paths["success_curve"]) as fh:
        rows = list(csv.DictReader(fh))
    for pl in ("eirmstar", "rrtconnect"):
        vals = [float(r["success_rate"]) for r in rows if r["planner"] == pl]
        assert vals == sorted(vals)


def test_zero_runs_give_header_only_tables(tmp_path):
    paths = emit.emit_runs([], tmp_path)
    for name in ("runs", "summary", "success_curve", "cost_curve"):
        assert emit.validate_table(paths[name], name) == 0
        assert paths[name].read_text().strip() == ",".join(c for c, _ in emit.SCHEMAS[name])


def test_validate_table_rejects_bad_files(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("scenario,planner\n")
    with pytest.raises(ValueError):
        emit.validate_table(p, "runs")
    header = ",".join(c for c, _ in emit.SCHEMAS["success_curve"])
    p.write_text(header + "\nwall_gap,eirmstar,abc,0.5\n")
    with pytest.raises(ValueError, match="time_s"):
        emit.validate_table(p, "success_curve")
    p.write_text(header + "\nwall_gap,eirmstar,nan,0.5\n")
    with pytest.raises(ValueError, match="NaN"):
        emit.validate_table(p, "success_curve")


def test_query_and_sweep_tables(tmp_path):
    sc = load_scenario("wall_gap")
    q = runner.run_repeated(sc, "eirmstar", 2, 4, 0, 10.0)
    assert [r.position for r in q] == [0, 1, 2, 3] * 2
    paths = emit.emit_queries(q, tmp_path, "rep")
    assert emit.validate_table(paths["queries"], "queries") == 8
    assert emit.validate_table(paths["query_summary"], "query_summary") == 4
    sw = runner.run_sweep(sc, "rrtconnect", [0.02, 0.01], 2, 0, 10.0)
    paths = emit.emit_sweep(sw, tmp_path)
    assert emit.validate_table(paths["sweep"], "sweep") == 4
    assert emit.validate_table(paths["runs"], "runs") == 8


# -- command line -----------------------------------------------------------------------


def test_cli_list(capsys):
    assert main(["list"]) == 0
    assert "wall_gap" in capsys.readouterr().out.split()


def test_cli_run_writes_tables(tmp_path, capsys):
    assert main(["run", "--scenario", "wall_gap", "--planner", "eirmstar", "--runs", "2", "--out", str(tmp_path)]) == 0
    assert emit.validate_table(tmp_path / "runs.csv", "runs") == 4
    assert "runs:" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "--scenario", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err
    bad = tmp_path / "bad.yaml"
    bad.write_text("version: 1\nname: x\n")
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["run", "--scenario", "wall_gap", "--variant", "3", "--out", str(tmp_path)]) == 2
    for argv in (["run"], ["run", "--scenario", "wall_gap", "--runs", "0"], ["bogus"],
                 ["run", "--scenario", "wall_gap", "--planner", "prm"],
                 ["sweep", "--scenario", "wall_gap", "--resolutions", "0.01,-1"]):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "mqplan.bench", "list"], capture_output=True, text=True, check=True)
    assert "handover" in out.stdout

import json
import subprocess
import sys
from dataclasses import replace

import pytest

from shieldmmu.cli import main
from shieldmmu.cost import ConfigError, CostModel
from shieldmmu.harness import (
    Mode,
    ScenarioConfig,
    arity_sweep,
    emit_report,
    load_reports,
    render_report,
    run_scenario,
    simulate,
)
from shieldmmu.workloads import Kind, WorkloadSpec, generate_trace

SMALL = WorkloadSpec(Kind.BTREE, 150)


def cfg(mode=Mode.DEFEND, **kw):
    return ScenarioConfig(mode=mode, workload=SMALL, **kw)


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_report_round_trip(tmp_path, fmt):
    reports = [run_scenario(cfg(m)) for m in Mode]
    path = tmp_path / f"r.{fmt}"
    emit_report(reports, fmt, path)
    assert load_reports(path) == reports


def test_reports_are_byte_identical():
    a = render_report([run_scenario(cfg())], "json")
    b = render_report([run_scenario(cfg())], "json")
    assert a == b


def test_seed_changes_targets():
    a = simulate(cfg(Mode.ATTACK, target_fraction=0.5, seed=1))
    b = simulate(cfg(Mode.ATTACK, target_fraction=0.5, seed=2))
    assert a.targets != b.targets


@pytest.mark.parametrize("field,value", [
    ("arity", 3), ("tlb_capacity", 0), ("frame_capacity", 0),
    ("target_fraction", 1.5), ("unwarmed_fraction", -0.1),
])
def test_config_validation(field, value):
    with pytest.raises(ConfigError):
        cfg(**{field: value})


def test_cost_model_validation(tmp_path):
    with pytest.raises(ConfigError):
        CostModel(hash_node=-1)
    with pytest.raises(ConfigError):
        CostModel.from_mapping({"warp": 1})
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"hash_node": 7}))
    assert CostModel.from_file(path).hash_node == 7
    path.write_text("[1]")
    with pytest.raises(ConfigError):
        CostModel.from_file(path)


def test_defend_report_fields():
    r = run_scenario(cfg(unwarmed_fraction=0.2))
    assert r.undefended_leakage == r.targets
    assert r.defended_failures == int(0.2 * r.pages)
    assert r.success_rate == pytest.approx(1 - r.defended_failures / r.undefended_leakage)
    assert r.attacks_detected == r.targets - r.defended_failures
    assert r.forest_trees == 1
    assert r.events["RestoredBypassOs"] == r.attacks_detected


def test_partial_targeting():
    r = run_scenario(cfg(Mode.ATTACK, target_fraction=0.25))
    assert r.targets == round(0.25 * r.pages)
    assert r.leakage == r.targets


def test_swap_pressure_keeps_translations_consistent():
    base = simulate(replace(cfg(Mode.BASELINE), frame_capacity=8))
    defended = simulate(replace(cfg(Mode.DEFEND), frame_capacity=8))
    assert base.report.os_faults == defended.report.os_faults
    assert base.translations == defended.translations


def test_sweep_order_and_parallel_equivalence():
    serial = arity_sweep(cfg(), (2, 8))
    parallel = arity_sweep(cfg(), (2, 8), jobs=2)
    assert [r.arity for r in serial] == [2, 8]
    assert serial == parallel


def test_trace_override():
    trace = generate_trace(WorkloadSpec(Kind.NTIMES, 30))
    r = run_scenario(ScenarioConfig(mode=Mode.ATTACK, trace=trace))
    assert r.pages == 30 and r.workload == "ntimes:30"


# CLI ---------------------------------------------------------------------------------


def test_cli_simulate_json(tmp_path, capsys):
    out = tmp_path / "r.json"
    events = tmp_path / "e.jsonl"
    leak = tmp_path / "l.csv"
    rc = main(["simulate", "--mode", "attack", "--workload", "ntimes:40", "--seed", "3",
               "--out", str(out), "--events", str(events), "--leakage", str(leak)])
    assert rc == 0
    (report,) = load_reports(out)
    assert report.leakage == 40 and report.seed == 3
    assert len(leak.read_text().splitlines()) == 41
    assert events.read_text().count("\n") == len(simulate(
        ScenarioConfig(mode=Mode.ATTACK, workload=WorkloadSpec(Kind.NTIMES, 40, 3), seed=3)).mmu.events)


def test_cli_stdout_csv(capsys):
    assert main(["simulate", "--workload", "sps:50", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("schema_version,mode,workload")
    assert len(lines) == 2


def test_cli_sweep(capsys):
    assert main(["sweep-arity", "--workload", "ntimes:20", "--arities", "2", "8"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert [r["arity"] for r in payload["reports"]] == [2, 8]


def test_cli_replay(tmp_path, capsys):
    trace = tmp_path / "t.trace"
    generate_trace(WorkloadSpec(Kind.HASH, 100)).save(trace)
    assert main(["replay", "--trace-file", str(trace), "--mode", "defend"]) == 0
    report = json.loads(capsys.readouterr().out)["reports"][0]
    assert report["workload"] == "file:t.trace"
    assert report["success_rate"] == 1.0


@pytest.mark.parametrize("argv", [
    ["simulate", "--arity", "5"],
    ["simulate", "--workload", "quux:3"],
    ["simulate", "--target-frac", "2"],
    ["simulate", "--tlb", "0"],
    ["simulate", "--cost-model", "/nonexistent.json"],
    ["simulate", "--mode", "baseline", "--leakage", "/tmp/x.csv"],
    ["replay", "--trace-file", "/nonexistent.trace"],
    ["sweep-arity", "--arities", "2", "7"],
])
def test_cli_config_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "error:" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "shieldmmu", "simulate", "--arity", "9"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    proc = subprocess.run([sys.executable, "-m", "shieldmmu", "simulate", "--workload", "ntimes:10"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["reports"][0]["pages"] == 10


def test_defended_run_sends_no_attack_faults_to_the_os():
    spec = WorkloadSpec(Kind.SDG, 300)
    base = run_scenario(ScenarioConfig(mode=Mode.BASELINE, workload=spec))
    defended = run_scenario(ScenarioConfig(mode=Mode.DEFEND, workload=spec))
    attacked = run_scenario(ScenarioConfig(mode=Mode.ATTACK, workload=spec))
    assert base.os_faults == base.pages
    assert defended.os_faults == base.os_faults and defended.measure_faults == 0
    assert attacked.measure_faults == attacked.targets

"""Scenario runner, report determinism, CLI behavior."""

import json
from pathlib import Path

import pytest

from gentorus.cli import main
from gentorus.report import (
    emit_report,
    load_report,
    report_to_csv,
    report_to_json,
    report_to_table,
    reports_equal,
)
from gentorus.scenario import Scenario, ScenarioError, exit_code_for, run_scenario

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


def minimal_config():
    return {
        "name": "mini",
        "torus": {"n": 1, "K": 1},
        "structure": {"type": "complex"},
        "metric": {"g": [[1, 0], [0, 1]]},
        "experiments": [
            {"kind": "identity-suite", "seed": 0, "samples": 10},
            {"kind": "hodge-table"},
        ],
    }


def test_minimal_scenario_passes():
    report, timings = run_scenario(minimal_config())
    assert report["summary"]["status"] == "pass"
    assert exit_code_for(report) == 0
    suite = report["experiments"][0]
    assert all(e["passed"] for e in suite["entries"])
    assert len(timings) == 2


def test_reports_byte_identical():
    a, _ = run_scenario(minimal_config())
    b, _ = run_scenario(minimal_config())
    assert report_to_json(a).encode() == report_to_json(b).encode()
    assert report_to_csv(a) == report_to_csv(b)


def test_report_round_trip():
    report, _ = run_scenario(minimal_config())
    again = load_report(report_to_json(report))
    assert reports_equal(report, again)
    assert again == report


def test_empty_experiment_list_is_valid():
    config = minimal_config()
    config["experiments"] = []
    report, _ = run_scenario(config)
    assert report["summary"]["status"] == "pass"
    assert report["config"]["name"] == "mini"
    assert report["experiments"] == []


def test_scan_csv_one_row_per_t_level(tmp_path):
    config = json.loads((SCENARIOS / "t2_criterion_scan.json").read_text())
    config["experiments"] = [config["experiments"][1]]  # scan only
    report, _ = run_scenario(config)
    csv_text = report_to_csv(report)
    rows = [line for line in csv_text.splitlines() if ",scan_row," in line]
    # 4 t-samples x 3 levels x 2 quantities (dimension, rank)
    assert len(rows) == 24
    table = report_to_table(report)
    assert "level" in table


def test_level_validation():
    config = minimal_config()
    config["experiments"] = [{"kind": "extend", "level": 5}]
    with pytest.raises(ScenarioError, match="level"):
        Scenario(config)


def test_bad_structure_type():
    config = minimal_config()
    config["structure"] = {"type": "hyperbolic"}
    with pytest.raises(ScenarioError, match="unknown structure type"):
        Scenario(config)


def test_truncation_error_named_mode():
    """A box too small for the driving products is an operational error
    naming the offending frequency."""
    config = {
        "name": "too-small",
        "torus": {"n": 1, "K": 1},
        "structure": {"type": "complex"},
        "deformation": {
            "coefficients": {
                "1,0": {"terms": {"0,1": {"modes": [{"k": [1, 0], "c": [0.4, 0]}]}}}
            }
        },
        "experiments": [{"kind": "extend", "level": -1, "order": 3}],
    }
    report, _ = run_scenario(config)
    exp = report["experiments"][0]
    assert exp["status"] == "error"
    assert "TruncationError" in exp["error"]
    assert "(" in exp["error"]  # the offending mode appears
    assert exit_code_for(report) == 1


def test_cli_run_and_verify(tmp_path, capsys):
    config_path = SCENARIOS / "t2_complex_identity.json"
    out_dir = tmp_path / "out"
    code = main(["run", str(config_path), "--out", str(out_dir), "--format", "json"])
    assert code == 0
    report_path = out_dir / "t2-complex-identity.json"
    assert report_path.exists()
    # golden-file comparison mode
    code = main(["verify", str(config_path), str(report_path)])
    assert code == 0
    # corrupt the golden file: verify fails
    doc = load_report(report_path.read_text())
    doc["experiments"][0]["status"] = "fail"
    report_path.write_text(report_to_json(doc))
    code = main(["verify", str(config_path), str(report_path)])
    assert code == 1


def test_cli_emits_requested_formats(tmp_path):
    config_path = SCENARIOS / "t2_criterion_scan.json"
    out_dir = tmp_path / "multi"
    for fmt, suffix in (("csv", ".csv"), ("table", ".txt")):
        code = main(["run", str(config_path), "--out", str(out_dir), "--format", fmt])
        assert code == 0
        assert (out_dir / f"t2-criterion-scan{suffix}").exists()


def test_cli_negative_control_exit_code():
    config_path = SCENARIOS / "t4_negative_control.json"
    code = main(["run", str(config_path)])
    assert code == 2


def test_cli_parallel_matches_serial():
    config = minimal_config()
    serial, _ = run_scenario(config, parallel=False)
    parallel, _ = run_scenario(config, parallel=True)
    assert report_to_json(serial) == report_to_json(parallel)


def test_emit_report_identical_bytes(tmp_path):
    report, timings = run_scenario(minimal_config())
    p1 = emit_report(report, tmp_path / "a", formats=["json", "csv", "table"])
    p2 = emit_report(report, tmp_path / "b", formats=["json", "csv", "table"])
    for a, b in zip(p1, p2):
        assert a.read_bytes() == b.read_bytes()


def test_expand_deformation_through_runner():
    """First-order data is completed by the integrability recursion before
    the experiments run; varying deformations go through the norm gate."""
    # drop policy: the high-order criterion products overflow the box and
    # are accounted rather than fatal (diagnostics regime)
    config = {
        "name": "expand",
        "torus": {"n": 2, "K": 3, "policy": "drop"},
        "structure": {"type": "complex"},
        "deformation": {
            "coefficients": {
                "1,0": {"terms": {"0,2": {"modes": [{"k": [1, 0, 0, 0], "c": [0.3, 0]}]}}},
                "0,1": {"terms": {"0,3": {"modes": [{"k": [0, 1, 0, 0], "c": [0.25, 0]}]}}},
            },
            "expand": True,
            "order": 3,
        },
        "experiments": [
            {"kind": "criterion", "t": [0.3], "samples": 3, "seed": 5},
        ],
    }
    report, _ = run_scenario(config)
    assert report["summary"]["status"] == "pass"
    entries = {e["name"]: e for e in report["experiments"][0]["entries"]}
    gate = entries["criterion_norm_gate[t=0.3]"]
    assert 0 < gate["value"] < 1.0
    # the recursion generated a genuine mixed-order coefficient
    scenario = Scenario(config)
    assert (1, 1) in scenario.series.coefficients


def test_scan_levels_subset():
    config = json.loads((SCENARIOS / "t2_criterion_scan.json").read_text())
    config["experiments"] = [
        {"kind": "scan", "t_samples": [0.0, 0.1], "levels": [-1, 1], "order": 1}
    ]
    report, _ = run_scenario(config)
    rows = report["experiments"][0]["tables"]["rows"]
    assert {r["level"] for r in rows} == {-1, 1}
    assert report["summary"]["status"] == "pass"


def test_b_transform_structure_through_config():
    config = {
        "name": "sheared",
        "torus": {"n": 1, "K": 1},
        "structure": {
            "type": "b_transform",
            "base": {"type": "complex"},
            "B": [[0, 0.6], [-0.6, 0]],
        },
        "metric": {"g": [[1, 0], [0, 1]], "b": [[0, 0.6], [-0.6, 0]]},
        "experiments": [{"kind": "hodge-table"}],
    }
    report, _ = run_scenario(config)
    assert report["summary"]["status"] == "pass"
    dims = report["experiments"][0]["tables"]["kernel_dimensions"]["dbar"]
    assert dims == {"-1": 1, "0": 2, "1": 1}


def test_twisted_structure_reports_finding():
    """A twisted background genuinely fails solvability classes: the run
    surfaces it as a mathematical finding with exit code 2."""
    config = {
        "name": "twisted",
        "torus": {"n": 2, "K": 1},
        "structure": {"type": "complex", "H": [{"indices": [0, 1, 2], "c": [1.0, 0]}]},
        "experiments": [{"kind": "hodge-table"}],
    }
    report, _ = run_scenario(config)
    exp = report["experiments"][0]
    assert exp["status"] == "finding"
    assert any("class check" in f for f in exp["findings"])
    assert exit_code_for(report) == 2
    dims = exp["tables"]["kernel_dimensions"]["dbar"]
    assert dims == {"-2": 1, "-1": 3, "0": 4, "1": 3, "2": 1}


def test_fail_fast_stops_early():
    config = {
        "name": "ff",
        "torus": {"n": 1, "K": 1},
        "structure": {"type": "complex"},
        "deformation": {
            "coefficients": {
                "1,0": {"terms": {"0,1": {"modes": [{"k": [1, 0], "c": [0.4, 0]}]}}}
            }
        },
        "experiments": [
            {"kind": "extend", "level": -1, "order": 3},  # truncation error
            {"kind": "hodge-table"},
        ],
    }
    full, _ = run_scenario(config)
    assert len(full["experiments"]) == 2
    stopped, _ = run_scenario(config, fail_fast=True)
    assert len(stopped["experiments"]) == 1

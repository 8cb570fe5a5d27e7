"""CLI surface: every subcommand through CliRunner, plus config precedence."""

import csv
import io
import json
import zlib

import pytest
from click.testing import CliRunner

from irplan.cli import main
from irplan.domain import Incident
from irplan.planner import PlannerConfig, plan
from irplan.response_model import SyntheticConfig, build_synthetic
from irplan.rng import Stream


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def incident_file(tmp_path, ransomware_incident):
    path = tmp_path / "incident.json"
    path.write_text(json.dumps(ransomware_incident.to_json_dict()))
    return path


def cli_equivalent_model(incident: Incident, seed: int, **synthetic_kw):
    mixed = Stream(seed).child(zlib.crc32(incident.id.encode())).key
    return build_synthetic(SyntheticConfig(**synthetic_kw | {"seed": mixed}))


def parse_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


# --- plan --------------------------------------------------------------------

def test_plan_writes_trajectory_json(runner, incident_file, ransomware_incident):
    result = runner.invoke(
        main,
        ["plan", "--incident", str(incident_file), "--n", "3", "--m", "3", "--seed", "21"],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(result.stdout)
    config = PlannerConfig(n_candidates=3, m_samples=3, seed=21)
    expected = plan(cli_equivalent_model(ransomware_incident, 21), ransomware_incident, config)
    assert payload == expected.to_json_dict()
    assert "terminal after" in result.stderr


def test_plan_out_file(runner, incident_file, tmp_path):
    out = tmp_path / "plan.json"
    result = runner.invoke(
        main,
        ["plan", "--incident", str(incident_file), "--seed", "3", "--out", str(out)],
    )
    assert result.exit_code == 0
    assert result.stdout == ""
    assert json.loads(out.read_text())["seed"] == 3


def test_plan_exact_mode(runner, incident_file, ransomware_incident):
    result = runner.invoke(
        main,
        ["plan", "--incident", str(incident_file), "--seed", "21", "--exact"],
    )
    assert result.exit_code == 0
    payload = json.loads(result.stdout)
    config = PlannerConfig(seed=21, exact_expectation=True)
    expected = plan(cli_equivalent_model(ransomware_incident, 21), ransomware_incident, config)
    assert payload == expected.to_json_dict()


def test_plan_rejects_unreadable_incident(runner, tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text("{nope")
    result = runner.invoke(main, ["plan", "--incident", str(bad)])
    assert result.exit_code == 1
    assert "cannot read incident file" in result.stderr


def test_plan_aborted_is_reported_cleanly(runner, incident_file, tmp_path):
    # replay backend with an empty fixture dies on the first model query
    config = tmp_path / "config.json"
    config.write_text(
        json.dumps({"llm": {"endpoint_url": "http://example.invalid/v1", "model_name": "m"}})
    )
    fixture = tmp_path / "empty.jsonl"
    fixture.write_text("")
    result = runner.invoke(
        main,
        [
            "--config", str(config),
            "plan",
            "--incident", str(incident_file),
            "--backend", "llm",
            "--llm-mode", "replay",
            "--fixture", str(fixture),
        ],
    )
    assert result.exit_code == 1
    assert "partial trajectory of 0 steps" in result.stderr


def test_plan_llm_backend_requires_config_section(runner, incident_file):
    result = runner.invoke(
        main, ["plan", "--incident", str(incident_file), "--backend", "llm"]
    )
    assert result.exit_code == 1
    assert "'llm' section" in result.stderr


# --- seed and config precedence ------------------------------------------------

def test_global_seed_reaches_planner(runner, incident_file):
    result = runner.invoke(
        main, ["--seed", "9", "plan", "--incident", str(incident_file)]
    )
    assert result.exit_code == 0
    assert json.loads(result.stdout)["seed"] == 9


def test_config_file_sets_planner_fields(runner, incident_file, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"planner": {"n_candidates": 2, "m_samples": 2, "seed": 5}}))
    result = runner.invoke(
        main, ["--config", str(config), "plan", "--incident", str(incident_file)]
    )
    assert result.exit_code == 0
    payload = json.loads(result.stdout)
    assert payload["seed"] == 5
    assert all(len(step["candidates"]) == 2 for step in payload["steps"])


def test_seed_precedence_subcommand_beats_global_beats_config(
    runner, incident_file, tmp_path
):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"planner": {"seed": 5}}))
    base = ["--config", str(config)]
    from_config = runner.invoke(main, base + ["plan", "--incident", str(incident_file)])
    assert json.loads(from_config.stdout)["seed"] == 5
    from_global = runner.invoke(
        main, base + ["--seed", "9", "plan", "--incident", str(incident_file)]
    )
    assert json.loads(from_global.stdout)["seed"] == 9
    from_sub = runner.invoke(
        main,
        ["--config", str(config), "--seed", "9", "plan", "--incident", str(incident_file), "--seed", "11"],
    )
    assert json.loads(from_sub.stdout)["seed"] == 11


def test_non_object_config_file_is_rejected(runner, incident_file, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps([1, 2, 3]))
    result = runner.invoke(
        main, ["--config", str(config), "plan", "--incident", str(incident_file)]
    )
    assert result.exit_code == 1
    assert "JSON object" in result.stderr


# --- verify ----------------------------------------------------------------------

def test_verify_lemma1_csv(runner):
    result = runner.invoke(main, ["verify", "lemma1", "--count", "5"])
    assert result.exit_code == 0, result.output
    rows = parse_csv(result.stdout)
    assert len(rows) == 5
    assert {"model_seed", "eta", "lhs", "rhs", "holds"} <= set(rows[0])
    assert all(row["holds"] == "True" for row in rows)
    assert "5/5 trials hold" in result.stderr


def test_verify_lemma1_seed_changes_trials(runner):
    a = runner.invoke(main, ["--seed", "1", "verify", "lemma1", "--count", "3"])
    b = runner.invoke(main, ["--seed", "2", "verify", "lemma1", "--count", "3"])
    assert a.exit_code == b.exit_code == 0
    assert a.stdout != b.stdout


def test_verify_prop1_csv(runner):
    result = runner.invoke(main, ["verify", "prop1", "--count", "3"])
    assert result.exit_code == 0, result.output
    rows = parse_csv(result.stdout)
    assert len(rows) == 3
    assert all(row["violations"] == "0" for row in rows)
    assert "0 violations" in result.stderr


def test_verify_prop2_csv(runner):
    result = runner.invoke(main, ["verify", "prop2", "--trials", "2000"])
    assert result.exit_code == 0, result.output
    rows = parse_csv(result.stdout)
    assert len(rows) == 1
    assert float(rows[0]["empirical_failure_rate"]) <= float(rows[0]["hoeffding_bound"])
    assert rows[0]["holds"] == "True"


# --- estimate-h --------------------------------------------------------------------

def test_estimate_h_payload_shape(runner):
    result = runner.invoke(main, ["estimate-h", "--samples", "40"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.stdout)
    estimate = payload["estimate"]
    assert estimate["sample_count"] == 40
    assert 0.0 <= estimate["empirical_rate"] <= 1.0
    curve = payload["confidence_vs_samples"]
    assert [p["sample_count"] for p in curve] == [1, 5, 10, 20, 30, 50, 75, 100]
    confidences = [p["confidence"] for p in curve]
    assert confidences == sorted(confidences)
    joint = payload["joint_bound_vs_candidates"]
    assert [p["n_candidates"] for p in joint] == list(range(1, 11))
    bounds = [p["joint_bound"] for p in joint]
    assert bounds == sorted(bounds, reverse=True)


def test_estimate_h_labels_file_matches_builtin_oracle(runner, tmp_path):
    from irplan.verify import synthetic_probe_incident

    incident = synthetic_probe_incident()
    model = cli_equivalent_model(incident, 0)
    labels = {
        action.text: bool(model.hallucinated[i])
        for i, action in enumerate(model.actions)
    }
    labels_file = tmp_path / "labels.json"
    labels_file.write_text(json.dumps(labels))
    with_labels = runner.invoke(
        main, ["estimate-h", "--samples", "25", "--labels", str(labels_file)]
    )
    builtin = runner.invoke(main, ["estimate-h", "--samples", "25"])
    assert with_labels.exit_code == builtin.exit_code == 0
    assert (
        json.loads(with_labels.stdout)["estimate"]
        == json.loads(builtin.stdout)["estimate"]
    )


def test_estimate_h_missing_label_fails(runner, tmp_path):
    labels_file = tmp_path / "labels.json"
    labels_file.write_text(json.dumps({"unrelated action": True}))
    result = runner.invoke(
        main, ["estimate-h", "--samples", "5", "--labels", str(labels_file)]
    )
    assert result.exit_code == 1
    assert "no label for action" in result.stderr


def test_estimate_h_llm_backend_needs_labels(runner):
    result = runner.invoke(main, ["estimate-h", "--backend", "llm"])
    assert result.exit_code == 1
    assert "--labels" in result.stderr or "'llm' section" in result.stderr


# --- evaluate ---------------------------------------------------------------------

def test_evaluate_json_report(runner, corpus_dir):
    result = runner.invoke(
        main, ["evaluate", "--corpus", str(corpus_dir), "--seeds", "0,1"]
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.stdout)
    assert len(report["rows"]) == 6
    assert report["errors"] == []
    assert set(report["aggregates"]) == {"set-one", "set-two"}


def test_evaluate_csv_report(runner, corpus_dir):
    result = runner.invoke(
        main, ["evaluate", "--corpus", str(corpus_dir), "--format", "csv"]
    )
    assert result.exit_code == 0
    rows = parse_csv(result.stdout)
    assert len(rows) == 3
    assert {"dataset", "incident_id", "seed", "recovery_time", "ineffective_pct", "failed"} == set(rows[0])


def test_evaluate_rejects_bad_seeds(runner, corpus_dir):
    result = runner.invoke(
        main, ["evaluate", "--corpus", str(corpus_dir), "--seeds", "a,b"]
    )
    assert result.exit_code == 1
    assert "bad --seeds" in result.stderr


# --- bench-scaling ------------------------------------------------------------------

def test_bench_scaling_csv(runner):
    result = runner.invoke(
        main,
        ["bench-scaling", "--latency-ms", "1", "--n-values", "1,2", "--repeats", "1"],
    )
    assert result.exit_code == 0, result.output
    rows = parse_csv(result.stdout)
    assert [(r["n_candidates"], r["mode"]) for r in rows] == [
        ("1", "sequential"),
        ("2", "sequential"),
        ("1", "parallel"),
        ("2", "parallel"),
    ]
    assert all(float(r["seconds"]) > 0 for r in rows)


def test_bench_scaling_rejects_bad_n_values(runner):
    result = runner.invoke(main, ["bench-scaling", "--n-values", "x"])
    assert result.exit_code == 1
    assert "bad --n-values" in result.stderr

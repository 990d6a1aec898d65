import json

import pytest

from passandswap.cli import main


OPEN_DOC = {
    "schema": "pands-open/1",
    "classes": 3,
    "arrival_rates": [0.8, 0.8, 0.8],
    "rate_function": {
        "kind": "multi_server",
        "server_rates": [1.0, 1.0],
        "compat": [[1], [2], [1, 2]],
    },
    "swapping_edges": [[1, 2], [2, 3]],
}

TWO_CLASS_DOC = {
    "schema": "pands-open/1",
    "classes": 2,
    "arrival_rates": [0.8, 0.8],
    "rate_function": {
        "kind": "multi_server",
        "server_rates": [1.0, 1.0, 1.0],
        "compat": [[1, 3], [2, 3]],
    },
    "swapping_edges": [],
}

CLOSED_DOC = {
    "schema": "pands-closed/1",
    "classes": 3,
    "rate_function": {
        "kind": "multi_server",
        "server_rates": [1.0, 2.0],
        "compat": [[1], [2], [1, 2]],
    },
    "swapping_edges": [[1, 2], [2, 3]],
    "initial_state": [1, 2, 1, 2, 2, 3],
}

CLUSTER_DOC = {
    "schema": "pands-cluster/1",
    "job_types": [
        {"name": "A", "rate": 1.0, "slots": 1, "machines": ["1", "3"]},
        {"name": "B", "rate": 1.0, "slots": 1, "machines": ["2", "3"]},
    ],
    "machines": [
        {"name": "1", "rate": 1.0, "buffer": 1},
        {"name": "2", "rate": 1.0, "buffer": 1},
        {"name": "3", "rate": 1.0, "buffer": 1},
    ],
}


@pytest.fixture
def model_path(tmp_path):
    def write(doc, name="model.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)

    return write


def run_json(capsys, argv):
    code = main(argv + ["--format", "json"])
    out = capsys.readouterr().out
    return code, (json.loads(out) if out else None)


def test_validate(capsys, model_path):
    code, doc = run_json(capsys, ["validate", model_path(OPEN_DOC)])
    assert code == 0
    assert doc["result"]["ok"] is True
    assert doc["header"]["tool"] == "passandswap"
    assert len(doc["header"]["model_sha256"]) == 64


def test_stability(capsys, model_path):
    code, doc = run_json(capsys, ["stability", model_path(TWO_CLASS_DOC)])
    assert code == 0
    assert doc["result"]["stable"] is True


def test_trace_golden(capsys, model_path):
    code, doc = run_json(
        capsys,
        [
            "trace",
            model_path(OPEN_DOC),
            "--state",
            "1,3,3,2,2,3,1,2",
            "--position",
            "1",
        ],
    )
    assert code == 0
    result = doc["result"]
    assert result["chain"] == [1, 4, 6, 8]
    assert result["departing_class"] == 2
    assert result["next_state"] == [3, 3, 1, 2, 2, 1, 3]


def test_analyze_and_oracle_compare(capsys, model_path, tmp_path):
    path = model_path(TWO_CLASS_DOC)
    code, doc = run_json(capsys, ["analyze", path, "-N", "4"])
    assert code == 0
    assert doc["result"]["states"] == 31
    dump = tmp_path / "generator.txt"
    code, doc = run_json(
        capsys,
        ["oracle-compare", path, "-N", "4", "--dump-matrix", str(dump)],
    )
    assert code == 0
    assert float(doc["result"]["total_variation"]) < 1e-10
    lines = dump.read_text().strip().splitlines()
    assert lines[0] == "# states 31"
    u, v, rate = lines[1].split()
    assert float(rate) != 0.0


def test_closed_analyze_routes_through_split(capsys, model_path):
    code, doc = run_json(
        capsys, ["closed-analyze", model_path(CLOSED_DOC)]
    )
    assert code == 0
    assert doc["result"]["route"] == "isomorphic"
    assert doc["result"]["adherence"]["adheres"] is False
    total = sum(float(r["probability"]) for r in doc["result"]["distribution"])
    assert abs(total - 1.0) < 1e-9


def test_closed_analyze_adhering_initial(capsys, model_path):
    doc_in = dict(CLOSED_DOC, initial_state=[1, 2, 3])
    code, doc = run_json(capsys, ["closed-analyze", model_path(doc_in)])
    assert code == 0
    assert doc["result"]["route"] == "direct"
    assert doc["result"]["adherence"]["adheres"] is True
    assert doc["result"]["adherence"]["placement_arcs"]


def test_iso_summary(capsys, model_path):
    code, doc = run_json(capsys, ["iso", model_path(CLOSED_DOC)])
    assert code == 0
    assert doc["result"]["split_map"]["2"] == ["2", "2'", "2''"]


def test_classes_command(capsys, model_path):
    code, doc = run_json(capsys, ["classes", model_path(CLOSED_DOC)])
    assert code == 0
    assert doc["result"]["transient_states"] == 0


def test_cluster_pipeline(capsys, model_path, tmp_path):
    path = model_path(CLUSTER_DOC)
    out = tmp_path / "tandem.json"
    code, doc = run_json(
        capsys, ["cluster-compile", path, "-o", str(out)]
    )
    assert code == 0
    emitted = json.loads(out.read_text())
    assert emitted["schema"] == "pands-tandem/1"
    code, doc = run_json(capsys, ["tandem-analyze", str(out)])
    assert code == 0
    code, doc = run_json(capsys, ["cluster-analyze", path])
    assert code == 0
    assert float(doc["result"]["blocking"]["A"]) > 0.0


def test_simulate_command(capsys, model_path, tmp_path):
    log = tmp_path / "events.log"
    code, doc = run_json(
        capsys,
        [
            "simulate",
            model_path(TWO_CLASS_DOC),
            "--events",
            "2000",
            "--reps",
            "2",
            "--seed",
            "9",
            "-N",
            "4",
            "--trace-log",
            str(log),
        ],
    )
    assert code == 0
    assert doc["result"]["replications"] == 2
    lines = log.read_text().strip().splitlines()
    assert lines and lines[0].startswith("t=")
    assert any("ev=complete-q0" in line and "depart=" in line for line in lines)


def test_simulate_cluster_protocol(capsys, model_path):
    code, doc = run_json(
        capsys,
        [
            "simulate",
            model_path(CLUSTER_DOC),
            "--events",
            "2000",
            "--reps",
            "2",
        ],
    )
    assert code == 0
    assert "blocking:A" in doc["result"]["fractions"]


def test_repeated_runs_are_byte_identical(capsys, model_path):
    path = model_path(TWO_CLASS_DOC)
    argv = ["analyze", path, "-N", "4", "--format", "json"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    second = capsys.readouterr().out
    assert first == second


def test_parse_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["validate", str(bad)]) == 2
    missing = tmp_path / "absent.json"
    assert main(["validate", str(missing)]) == 2


def test_budget_exit_code(capsys, model_path):
    path = model_path(TWO_CLASS_DOC)
    assert main(["analyze", path, "-N", "12", "--budget", "10"]) == 3


def test_table_output_contains_header(capsys, model_path):
    assert main(["stability", model_path(TWO_CLASS_DOC)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# schema: pands-output/1")
    assert "# tool: passandswap" in out
    assert "stable: True" in out

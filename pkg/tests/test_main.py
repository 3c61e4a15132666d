import json

import pytest

import agents.flow_run
import main
from middleware import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK
from tools.errors import StepSizeUnderflowError

SMALL_INVOLUTIVITY = {
    "involutivity_size": 3,
    "involutivity_samples": 2,
    "involutivity_n_max": 1,
    "involutivity_k_max": 2,
}


def _last_json(capsys):
    out = capsys.readouterr().out
    start = out.index("{")
    return json.loads(out[start:])


def test_involutivity_command(write_config, tmp_path, capsys):
    path = write_config(SMALL_INVOLUTIVITY)
    assert main.main(["involutivity", "--config", str(path)]) == EXIT_OK
    response = _last_json(capsys)
    assert response["success"] is True
    assert (tmp_path / "out" / "involutivity.csv").exists()
    assert (tmp_path / "out" / "involutivity_report.json").exists()


def test_cli_overrides(write_config, tmp_path):
    path = write_config(SMALL_INVOLUTIVITY)
    other = tmp_path / "elsewhere"
    assert main.main(["involutivity", "--config", str(path), "--out", str(other), "--seed", "42"]) == EXIT_OK
    header = (other / "involutivity.csv").read_text(encoding="utf-8").splitlines()[0]
    config = json.loads(header[len("# config: "):])
    assert config["seed"] == 42
    assert config["output_dir"] == str(other)


def test_runs_are_reproducible(write_config, tmp_path):
    path = write_config({**SMALL_INVOLUTIVITY, "seed": 5})
    target = tmp_path / "out" / "involutivity.csv"
    assert main.main(["involutivity", "--config", str(path)]) == EXIT_OK
    first = target.read_bytes()
    assert main.main(["involutivity", "--config", str(path)]) == EXIT_OK
    assert target.read_bytes() == first


def test_missing_config_file(tmp_path, capsys):
    assert main.main(["paper-check", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert _last_json(capsys)["status"] == "config_error"


def test_malformed_config(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"mesh": {"n": 1}}', encoding="utf-8")
    assert main.main(["quasirep-check", "--config", str(path)]) == EXIT_CONFIG
    path.write_text('{"u0": "tanh"}', encoding="utf-8")
    assert main.main(["quasirep-check", "--config", str(path)]) == EXIT_CONFIG


def test_duplicate_nodes_exit_code(write_config):
    path = write_config({"mesh": {"kind": "explicit", "nodes": [0.0, 0.0]}})
    assert main.main(["quasirep-check", "--config", str(path)]) == EXIT_CONFIG


def test_integrator_failure_exit_code(write_config, monkeypatch, capsys):
    def fail(config):
        raise StepSizeUnderflowError(0.5, "step size underflow")

    monkeypatch.setattr(agents.flow_run, "run_flow", fail)
    path = write_config({"mesh": {"n": 4}})
    assert main.main(["flow", "--config", str(path)]) == EXIT_NUMERICAL
    payload = _last_json(capsys)
    assert payload["status"] == "numerical_error"
    assert payload["t_reached"] == 0.5


def test_unknown_command(write_config):
    with pytest.raises(SystemExit) as excinfo:
        main.main(["dance", "--config", str(write_config())])
    assert excinfo.value.code == 2


def test_workflow_graph_ends_in_storage_response():
    for command in main.COMMAND_NODES:
        graph = main.create_workflow(command).get_graph()
        name = main.node_name(command)
        assert {name, "storage_response"} <= set(graph.nodes)
        edges = {(edge.source, edge.target) for edge in graph.edges}
        assert (name, "storage_response") in edges
        assert ("storage_response", "__end__") in edges


def test_flow_command_on_default_profiles(write_config, tmp_path):
    path = write_config({"mesh": {"n": 4}, "flow_config": {"t_end": 0.25, "snapshot_count": 2, "invariants_m_max": 2}})
    assert main.main(["flow", "--config", str(path)]) == EXIT_OK
    report = json.loads((tmp_path / "out" / "flow_report.json").read_text(encoding="utf-8"))
    assert report["success"] is True
    assert report["data"]["summary"]["max_invariant_rel_drift"] <= 1e-6

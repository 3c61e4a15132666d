import asyncio
import json

import numpy as np
import pytest

from agents.flow_run import dividend_check, flow_node
from agents.involutivity import involutivity_node, random_alpha, run_involutivity, spec_grid
from agents.lab_setup import sweep_meshes
from agents.paper_check import CONSISTENT, INCONSISTENT, paper_check_node, run_paper_check
from agents.parallel_coordinator import sweep
from agents.pde_compare import pde_compare_node, slope_rows
from agents.quasirep_check import quasirep_check_node
from agents.storage_response import storage_response_node
from models import ExperimentConfig
from tools.io_tools import read_csv

SHORT_FLOW = {"t_end": 0.2, "snapshot_count": 3, "invariants_m_max": 2}


def _run(node, state):
    return asyncio.run(node(state))


def test_sweep_meshes_deduplicates():
    config = ExperimentConfig.model_validate({"mesh": {"n": 4}, "n_sweep": [2, 4, 8, 2]})
    assert [m.n for m in sweep_meshes(config)] == [4, 2, 8]
    explicit = ExperimentConfig.model_validate({"mesh": {"kind": "explicit", "nodes": [0.0, 1.0]}, "n_sweep": [4]})
    assert [m.n for m in sweep_meshes(explicit)] == [2]


def test_sweep_reraises_first_failure():
    def work(x):
        if x == 2:
            raise ValueError("two")
        return x * x

    assert asyncio.run(sweep(work, [1, 3], "squares")) == [1, 9]
    with pytest.raises(ValueError, match="two"):
        asyncio.run(sweep(work, [1, 2, 3], "squares"))


def test_quasirep_check_node(lab_state):
    state = _run(quasirep_check_node, lab_state("quasirep-check", {"mesh": {"n": 4}, "n_sweep": [2, 8]}))
    assert state["summary"]["sizes"] == [4, 2, 8]
    assert state["summary"]["passed"]
    path = state["outputs"]["quasirep_check"]
    with open(path, encoding="utf-8") as fh:
        assert fh.readline().startswith("# config: ")
    df = read_csv(path)
    assert set(df["n"]) == {2, 4, 8}
    assert df["passed"].all()


def test_flow_node_at_rest_has_no_drift(lab_state):
    payload = {"mesh": {"n": 4}, "u0": "poly:0", "v0": "poly:0", "flow_config": SHORT_FLOW}
    state = _run(flow_node, lab_state("flow", payload))
    summary = state["summary"]
    assert summary["rule"] == "casimir"
    assert summary["max_invariant_rel_drift"] == 0.0
    assert summary["max_eigenvalue_rel_drift"] == 0.0
    assert not summary["dividend_violated"]
    snapshots = json.loads(open(state["outputs"]["flow_snapshots"], encoding="utf-8").read())
    assert snapshots["window"] == [0, 3]
    assert len(snapshots["snapshots"]) == 3
    assert "flow_residuals" not in state["outputs"]


def test_flow_node_paper_B_writes_residuals(lab_state):
    payload = {"mesh": {"n": 4}, "flow": {"rule": "paper_B"}, "flow_config": {**SHORT_FLOW, "t_end": 0.1}}
    state = _run(flow_node, lab_state("flow", payload))
    residuals = read_csv(state["outputs"]["flow_residuals"])
    assert len(residuals) == 3
    assert residuals["lambda3_norm"].iloc[0] > 0
    np.testing.assert_allclose(residuals["lambda3_norm"].iloc[0], residuals["lambda3_closed_form"].iloc[0], rtol=1e-10)
    summary = json.loads(open(state["outputs"]["flow_summary"], encoding="utf-8").read())
    assert summary["report"]["closed"] is False
    assert "naive_comparison" in summary


def test_flow_node_naive_rule(lab_state):
    payload = {"mesh": {"n": 4}, "flow": {"rule": "naive"}, "flow_config": SHORT_FLOW}
    state = _run(flow_node, lab_state("flow", payload))
    assert state["summary"]["rule"] == "naive"
    summary = json.loads(open(state["outputs"]["flow_summary"], encoding="utf-8").read())
    assert "naive_comparison" not in summary
    assert summary["report"]["spectrum_exact"] is False


def test_flow_node_fixed_generator(lab_state):
    payload = {
        "mesh": {"kind": "explicit", "nodes": [0.0, 1.0]},
        "u0": "poly:0,1",
        "v0": "poly:1",
        "flow": {"rule": "fixed", "fixed": {"0": [[1.0, 0.0], [0.0, -1.0]]}},
        "flow_config": SHORT_FLOW,
    }
    state = _run(flow_node, lab_state("flow", payload))
    assert state["summary"]["rule"] == "fixed"
    assert state["summary"]["max_invariant_rel_drift"] <= 1e-6
    conservation = read_csv(state["outputs"]["flow_conservation"])
    assert set(conservation["t"]) == {0.0, 0.1, 0.2}


def test_dividend_check_without_naive_run():
    class _Report:
        @staticmethod
        def max_invariant_rel_drift():
            return 1e-9

    class _Result:
        report = _Report()

    check = dividend_check(_Result(), None)
    assert check["naive_max_rel_drift"] is None
    assert not check["dividend_violated"]
    assert dividend_check(_Result(), _Result())["dividend_violated"] is False


def test_slope_rows_exact_for_polynomials():
    config = ExperimentConfig(u0="poly:1,0,2", v0="poly:0,1,1")
    mesh = sweep_meshes(config)[0]
    rows = slope_rows(mesh, config)
    assert all(r["exact"] and r["passed"] for r in rows)
    assert all(r["abs_bound"] == 1e-10 and r["error"] <= 1e-10 for r in rows)
    rows = slope_rows(mesh, ExperimentConfig(u0="sin", v0="poly:0,1"))
    assert not any(r["exact"] for r in rows)


def test_slope_rows_hand_evaluated():
    config = ExperimentConfig(u0="poly:0,1", v0="poly:0,1")
    mesh = sweep_meshes(config)[0]
    assert mesh.n == 8
    rows = {r["field"]: r for r in slope_rows(mesh, config)}
    assert rows["u"]["error"] <= 1e-10
    assert rows["v"]["error"] == 0.0
    rows = slope_rows(mesh, ExperimentConfig(u0="sin", v0="poly:0"))
    assert all(r["error"] == 0.0 for r in rows)


def test_pde_compare_constant_state_is_stationary(lab_state):
    payload = {"mesh": {"n": 4}, "n_sweep": [4], "u0": "poly:0.5", "v0": "poly:0.25", "flow_config": SHORT_FLOW}
    state = _run(pde_compare_node, lab_state("pde-compare", payload))
    summary = state["summary"]
    assert summary["sizes"] == [4]
    assert set(summary["max_error"]) == {"naive", "casimir(2,4)", "paper_B"}
    assert max(summary["max_error"].values()) <= 1e-10
    assert summary["slope_checks_exact"] and summary["slope_checks_passed"]
    by_n = read_csv(state["outputs"]["pde_error_vs_n"])
    assert list(by_n.columns) == ["flow", "n", "field", "observable_degree", "max_error"]


def test_flow_node_on_default_profiles(lab_state):
    payload = {"mesh": {"n": 4}, "flow_config": {"t_end": 0.5, "snapshot_count": 3}}
    state = _run(flow_node, lab_state("flow", payload))
    summary = state["summary"]
    assert state["status"] == "integrated"
    assert summary["rule"] == "casimir"
    assert summary["t_reached"] == pytest.approx(0.5)
    assert summary["max_invariant_rel_drift"] <= 1e-6
    assert summary["max_eigenvalue_rel_drift"] <= 1e-6
    conservation = read_csv(state["outputs"]["flow_conservation"])
    assert "coeff_rel_drift" in conservation.columns
    assert set(conservation["t"]) == {0.0, 0.25, 0.5}


def test_pde_compare_on_default_profiles(lab_state):
    payload = {"mesh": {"n": 4}, "n_sweep": [4], "flow_config": {"t_end": 0.5, "snapshot_count": 3, "invariants_m_max": 2}}
    state = _run(pde_compare_node, lab_state("pde-compare", payload))
    summary = state["summary"]
    assert state["status"] == "compared"
    assert set(summary["max_error"]) == {"naive", "casimir(2,4)", "paper_B"}
    assert all(np.isfinite(v) for v in summary["max_error"].values())
    assert summary["slope_checks_exact"] and summary["slope_checks_passed"]
    compare = read_csv(state["outputs"]["pde_compare"])
    assert set(compare["t"]) == {0.0, 0.25, 0.5}


def test_paper_check_verdicts():
    config = ExperimentConfig.model_validate({"mesh": {"n": 4}, "random_states": 3, "u0": "sin", "v0": "cos"})
    report = run_paper_check(config)
    assert len(report["rows"]) == 7
    assert all(r["generator_matches_oracle"] for r in report["rows"])
    assert all(r["lambda3_matches_closed_form"] for r in report["rows"])
    verdicts = {v["residual"]: v["verdict"] for v in report["verdicts"]}
    assert verdicts["lambda3_norm"] == INCONSISTENT
    assert verdicts["generator_vs_printed"] == INCONSISTENT
    assert set(verdicts.values()) <= {CONSISTENT, INCONSISTENT}
    diagonal = [r for r in report["rows"] if r["kind"] == "diagonal"]
    assert all(r["generator_oracle"] == 0.0 for r in diagonal)


def test_paper_check_node(lab_state):
    state = _run(paper_check_node, lab_state("paper-check", {"mesh": {"n": 4}, "random_states": 2}))
    assert state["summary"]["states"] == 5
    assert state["summary"]["generator_matches_oracle"]
    verdicts = read_csv(state["outputs"]["paper_check_verdicts"])
    assert len(verdicts) == 4


def test_involutivity_rows():
    config = ExperimentConfig(involutivity_size=3, involutivity_samples=2, involutivity_n_max=2, involutivity_k_max=2)
    rows = run_involutivity(config)
    specs = spec_grid(2, 2)
    pairs = len(specs) * (len(specs) - 1) // 2
    assert sum(r["check"] == "involutivity" for r in rows) == 2 * pairs
    assert sum(r["check"] == "casimir" for r in rows) == 2 * len(specs)
    assert max(r["rel_defect"] for r in rows) <= 1e-9
    diagonal = run_involutivity(config, diagonal=True)
    assert all(r["defect"] == 0.0 for r in diagonal)


def test_random_alpha_shape(rng):
    alpha = random_alpha(rng, 3)
    np.testing.assert_array_equal(alpha.coeff(3), np.eye(3))
    assert max(alpha.support) == 3
    diagonal = random_alpha(rng, 3, diagonal=True)
    for c in diagonal.coeffs.values():
        np.testing.assert_array_equal(c, np.diag(np.diag(c)))


def test_involutivity_node_and_report(lab_state):
    state = lab_state(
        "involutivity",
        {"involutivity_size": 3, "involutivity_samples": 2, "involutivity_n_max": 1, "involutivity_k_max": 2},
    )
    state = _run(involutivity_node, state)
    assert state["summary"]["passed"]
    state = _run(storage_response_node, state)
    response = state["response"]
    assert response["success"] is True
    assert response["status"] == "success"
    report = json.loads(open(state["outputs"]["report"], encoding="utf-8").read())
    assert report["data"]["summary"]["passed"] is True
    assert report["config"]["involutivity_size"] == 3

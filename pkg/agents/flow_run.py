# ./agents/flow_run.py
import asyncio
import logging
from typing import Any, Dict, Optional

from agents.lab_setup import configured_rep, initial_samples
from models import ExperimentConfig, GeneratorKind
from tools.aks_tools import (
    FlowResult,
    GeneratorRule,
    RiemannState,
    integrate_flow,
    integrate_naive_riemann,
    paper_residuals,
    riemann_alpha,
)
from tools.errors import LaxMarkovError
from tools.io_tools import loop_from_json, loop_to_json, write_csv, write_json

logger = logging.getLogger(__name__)

CONSERVATION_COLUMNS = ["t", "invariant_id", "m", "exponent", "value", "abs_drift", "rel_drift", "coeff_rel_drift"]
SPECTRUM_COLUMNS = ["t", "lambda", "index", "real", "imag", "abs_drift"]


def build_rule(config: ExperimentConfig, n: int) -> Optional[GeneratorRule]:
    """Generator rule for the configured flow; None selects the naive discretization."""
    flow = config.flow
    if flow.rule == GeneratorKind.CASIMIR:
        return GeneratorRule.casimir(flow.casimir)
    if flow.rule == GeneratorKind.FIXED:
        return GeneratorRule.fixed_generator(loop_from_json(flow.fixed, n))
    if flow.rule == GeneratorKind.PAPER_B:
        return GeneratorRule.paper_B()
    return None


def run_flow(config: ExperimentConfig) -> Dict[str, Any]:
    rep = configured_rep(config)
    u, v = initial_samples(config, rep.mesh)
    state = RiemannState.from_samples(rep, u, v)
    rule = build_rule(config, rep.n)

    if rule is None:
        naive = integrate_naive_riemann(rep, state.U, state.V, config.flow_config, ordering=config.flow.ordering)
        return {"result": naive, "naive": None, "rule": GeneratorKind.NAIVE.value}

    result = integrate_flow(riemann_alpha(state), rule, config.flow_config)
    try:
        naive = integrate_naive_riemann(rep, state.U, state.V, config.flow_config, ordering=config.flow.ordering)
    except LaxMarkovError as e:
        # comparison only
        logger.warning(f"Naive comparison run failed: {str(e)}")
        naive = None
    return {"result": result, "naive": naive, "rule": rule.kind.value}


def residual_rows(result: FlowResult) -> list:
    rows = []
    for t, snap in zip(result.times, result.snapshots):
        residuals = paper_residuals(snap.coeff(2), snap.coeff(1), snap.coeff(0))
        rows.append({"t": float(t), **residuals.model_dump()})
    return rows


def dividend_check(result: FlowResult, naive: Optional[FlowResult]) -> Dict[str, Any]:
    """Compare invariant drift of a Lax flow with the matched naive run."""
    lax_drift = result.report.max_invariant_rel_drift()
    if naive is None:
        return {"lax_max_rel_drift": lax_drift, "naive_max_rel_drift": None, "dividend_violated": False}
    naive_drift = naive.report.max_invariant_rel_drift()
    return {
        "lax_max_rel_drift": lax_drift,
        "naive_max_rel_drift": naive_drift,
        "dividend_violated": bool(lax_drift > naive_drift),
    }


async def flow_node(state: Dict[str, Any]) -> Dict[str, Any]:
    try:
        logger.debug("Entering flow_node")
        config = state["config"]
        out_dir = state["out_dir"]
        runs = await asyncio.to_thread(run_flow, config)
        result: FlowResult = runs["result"]
        naive: Optional[FlowResult] = runs["naive"]

        outputs = state["outputs"]
        outputs["flow_snapshots"] = str(
            write_json(
                out_dir / "flow_snapshots.json",
                {
                    "rule": result.label,
                    "window": list(result.window),
                    "times": [float(t) for t in result.times],
                    "snapshots": [loop_to_json(s) for s in result.snapshots],
                },
                config,
            )
        )
        outputs["flow_conservation"] = str(
            write_csv(out_dir / "flow_conservation.csv", result.conservation_rows, config, columns=CONSERVATION_COLUMNS)
        )
        outputs["flow_spectrum"] = str(
            write_csv(out_dir / "flow_spectrum.csv", result.spectrum_rows, config, columns=SPECTRUM_COLUMNS)
        )
        if runs["rule"] == GeneratorKind.PAPER_B.value:
            outputs["flow_residuals"] = str(write_csv(out_dir / "flow_residuals.csv", residual_rows(result), config))

        summary: Dict[str, Any] = {"rule": runs["rule"], "report": result.report.model_dump()}
        if runs["rule"] != GeneratorKind.NAIVE.value:
            summary["naive_comparison"] = dividend_check(result, naive)
            if summary["naive_comparison"]["dividend_violated"]:
                logger.warning(
                    f"Lax flow drift {summary['naive_comparison']['lax_max_rel_drift']:.3e} exceeds the naive "
                    f"discretization drift {summary['naive_comparison']['naive_max_rel_drift']:.3e}"
                )
        outputs["flow_summary"] = str(write_json(out_dir / "flow_summary.json", summary, config))

        state["summary"].update(
            {
                "rule": runs["rule"],
                "t_reached": result.report.t_reached,
                "steps": result.report.steps,
                "max_invariant_rel_drift": result.report.max_invariant_rel_drift(),
                "max_coeff_rel_drift": result.report.max_coeff_rel_drift(),
                "max_eigenvalue_rel_drift": result.report.max_eigenvalue_rel_drift(),
                "truncation_leakage": result.report.truncation_leakage,
                "dividend_violated": summary.get("naive_comparison", {}).get("dividend_violated", False),
            }
        )
        state["messages"].append(f"flow ({result.label}) reached t={result.report.t_reached:.6g}")
        state["status"] = "integrated"
        return state
    except Exception as e:
        logger.error(f"Flow run failed: {str(e)}")
        state["status"] = "flow_failed"
        raise

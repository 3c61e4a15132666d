# ./agents/involutivity.py
import asyncio
import logging
from itertools import combinations
from typing import Any, Dict, List

import numpy as np

from models import CasimirSpec, ExperimentConfig
from tools.aks_tools import casimir_gradient, r_poisson_value
from tools.io_tools import write_csv
from tools.loop_tools import LoopElement, loop_bracket, random_loop_element

logger = logging.getLogger(__name__)

COLUMNS = ["sample", "check", "n1", "k1", "n2", "k2", "defect", "scale", "rel_defect"]
INVOLUTIVITY_RTOL = 1e-9
CASIMIR_RTOL = 1e-11


def random_alpha(rng: np.random.Generator, n: int, diagonal: bool = False) -> LoopElement:
    """lambda^3 I plus integer coefficients on exponents 0..2."""
    X = random_loop_element(rng, n, range(3))
    coeffs = {j: np.diag(np.diag(c)) if diagonal else c for j, c in X.coeffs.items()}
    coeffs[3] = np.eye(n)
    return LoopElement(coeffs, n)


def spec_grid(n_max: int, k_max: int) -> List[CasimirSpec]:
    return [CasimirSpec(n=n, k=k) for n in range(n_max + 1) for k in range(k_max + 1)]


def defect_rows(alpha: LoopElement, specs: List[CasimirSpec], sample: int) -> List[Dict[str, Any]]:
    gradients = {s: casimir_gradient(alpha, s) for s in specs}
    norm = alpha.norm()
    rows = []
    for s, g in gradients.items():
        defect = loop_bracket(g, alpha).norm()
        scale = max(1.0, norm * g.norm())
        rows.append(
            {"sample": sample, "check": "casimir", "n1": s.n, "k1": s.k, "n2": None, "k2": None,
             "defect": defect, "scale": scale, "rel_defect": defect / scale}
        )
    for s1, s2 in combinations(specs, 2):
        g1, g2 = gradients[s1], gradients[s2]
        defect = abs(r_poisson_value(alpha, g1, g2))
        scale = max(1.0, norm * g1.norm() * g2.norm())
        rows.append(
            {"sample": sample, "check": "involutivity", "n1": s1.n, "k1": s1.k, "n2": s2.n, "k2": s2.k,
             "defect": defect, "scale": scale, "rel_defect": defect / scale}
        )
    return rows


def run_involutivity(config: ExperimentConfig, diagonal: bool = False) -> List[Dict[str, Any]]:
    rng = np.random.default_rng(config.seed)
    specs = spec_grid(config.involutivity_n_max, config.involutivity_k_max)
    rows = []
    for sample in range(config.involutivity_samples):
        alpha = random_alpha(rng, config.involutivity_size, diagonal=diagonal)
        rows.extend(defect_rows(alpha, specs, sample))
    return rows


async def involutivity_node(state: Dict[str, Any]) -> Dict[str, Any]:
    try:
        logger.debug("Entering involutivity_node")
        config = state["config"]
        rows = await asyncio.to_thread(run_involutivity, config)

        worst = {
            check: max((r["rel_defect"] for r in rows if r["check"] == check), default=0.0)
            for check in ("involutivity", "casimir")
        }
        passed = worst["involutivity"] <= INVOLUTIVITY_RTOL and worst["casimir"] <= CASIMIR_RTOL
        if not passed:
            logger.warning(f"Involutivity defects above tolerance: {worst}")

        state["outputs"]["involutivity"] = str(
            write_csv(state["out_dir"] / "involutivity.csv", rows, config, columns=COLUMNS)
        )
        state["summary"].update(
            {
                "pairs_evaluated": sum(r["check"] == "involutivity" for r in rows),
                "max_involutivity_rel_defect": worst["involutivity"],
                "max_casimir_rel_defect": worst["casimir"],
                "passed": passed,
            }
        )
        state["messages"].append(f"involutivity max scaled defect {worst['involutivity']:.3e}")
        state["status"] = "checked"
        return state
    except Exception as e:
        logger.error(f"Involutivity check failed: {str(e)}")
        state["status"] = "involutivity_failed"
        raise

# ./tools/io_tools.py
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Union

import numpy as np
import pandas as pd

from models import ExperimentConfig, MeshKind
from tools.calogero_tools import Mesh, build_mesh
from tools.errors import ConfigError, DimensionMismatchError
from tools.loop_tools import LoopElement

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"


def matrix_to_json(A) -> List[List[float]]:
    return np.asarray(A, dtype=float).tolist()


def matrix_from_json(rows) -> np.ndarray:
    A = np.asarray(rows, dtype=float)
    if A.ndim != 2:
        raise ConfigError(f"expected a row-major matrix, got an array of shape {A.shape}")
    return A


def mesh_to_json(mesh: Mesh) -> Dict[str, List[float]]:
    return {"nodes": mesh.nodes.tolist(), "rho": mesh.rho.tolist()}


def mesh_from_json(payload: Mapping[str, Any]) -> Mesh:
    """Rebuild a mesh from its nodes; a stored rho must agree with the recomputed one."""
    if "nodes" not in payload:
        raise ConfigError("mesh JSON needs a 'nodes' array")
    mesh = build_mesh(MeshKind.EXPLICIT, nodes=payload["nodes"])
    if "rho" in payload:
        rho = np.asarray(payload["rho"], dtype=float)
        if rho.shape != mesh.rho.shape or not np.allclose(rho, mesh.rho, rtol=1e-12, atol=0.0):
            raise ConfigError("stored Lagrange denominators do not match the nodes")
    return mesh


def loop_to_json(X: LoopElement) -> Dict[str, List[List[float]]]:
    return {str(j): c.tolist() for j, c in sorted(X.coeffs.items(), reverse=True)}


def loop_from_json(payload: Mapping[str, Any], n: Optional[int] = None) -> LoopElement:
    try:
        coeffs = {int(j): matrix_from_json(rows) for j, rows in payload.items()}
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid loop element JSON: {str(e)}") from e
    try:
        return LoopElement(coeffs, n)
    except DimensionMismatchError as e:
        raise ConfigError(f"invalid loop element JSON: {str(e)}") from e


def config_header(config: ExperimentConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), sort_keys=True)


def write_json(path: PathLike, payload: Dict[str, Any], config: Optional[ExperimentConfig] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = dict(payload)
    if config is not None:
        body["config"] = config.model_dump(mode="json")
    path.write_text(json.dumps(body, indent=2, sort_keys=True), encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path


def write_csv(
    path: PathLike,
    rows: Union[pd.DataFrame, Iterable[Dict[str, Any]]],
    config: Optional[ExperimentConfig] = None,
    columns: Optional[List[str]] = None,
) -> Path:
    """Write rows as CSV, preceded by a ``# config:`` provenance line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=columns)
    with path.open("w", encoding="utf-8", newline="") as fh:
        if config is not None:
            fh.write(f"# config: {config_header(config)}\n")
        df.to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {len(df)} rows to {path}")
    return path


def read_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", float_precision="round_trip")


def load_config(path: PathLike) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    return ExperimentConfig.model_validate_json(text)

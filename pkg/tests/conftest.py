import json

import numpy as np
import pytest

from models import ExperimentConfig, MeshKind
from tools.calogero_tools import build_mesh, build_quasirep


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def mesh2():
    return build_mesh(MeshKind.EXPLICIT, nodes=[0.0, 1.0])


@pytest.fixture
def mesh3():
    return build_mesh(MeshKind.EXPLICIT, nodes=[-1.0, 0.0, 1.0])


@pytest.fixture
def rep2(mesh2):
    return build_quasirep(mesh2)


@pytest.fixture
def rep3(mesh3):
    return build_quasirep(mesh3)


@pytest.fixture
def cheb4_rep():
    return build_quasirep(build_mesh(MeshKind.CHEBYSHEV, n=4))


@pytest.fixture
def write_config(tmp_path):
    """Write a JSON config and return its path; output goes under tmp_path/out."""

    def _write(payload=None, name="config.json"):
        body = {"output_dir": str(tmp_path / "out"), **(payload or {})}
        path = tmp_path / name
        path.write_text(json.dumps(body), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def lab_state(tmp_path):
    def _state(command, payload=None):
        config = ExperimentConfig.model_validate({"output_dir": str(tmp_path / "out"), **(payload or {})})
        return {
            "command": command,
            "config": config,
            "out_dir": tmp_path / "out",
            "messages": [],
            "status": "started",
            "outputs": {},
            "summary": {},
            "response": {},
        }

    return _state

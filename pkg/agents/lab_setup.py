# ./agents/lab_setup.py
from typing import List, Optional, Tuple

import numpy as np

from models import ExperimentConfig, MeshKind, MeshSpec
from tools.calogero_tools import Mesh, QuasiRep, build_mesh, build_quasirep, sample_function
from tools.profile_tools import Profile, parse_profile


def mesh_from_spec(spec: MeshSpec, n: Optional[int] = None) -> Mesh:
    return build_mesh(spec.kind, n=n or spec.n, interval=spec.interval, nodes=spec.nodes)


def sweep_meshes(config: ExperimentConfig) -> List[Mesh]:
    """The configured mesh followed by the n_sweep meshes of the same family."""
    meshes = [mesh_from_spec(config.mesh)]
    if config.mesh.kind != MeshKind.EXPLICIT:
        for n in config.n_sweep:
            if n != meshes[0].n and all(m.n != n for m in meshes):
                meshes.append(mesh_from_spec(config.mesh, n))
    return meshes


def initial_profiles(config: ExperimentConfig) -> Tuple[Profile, Profile]:
    return parse_profile(config.u0), parse_profile(config.v0)


def initial_samples(config: ExperimentConfig, mesh: Mesh) -> Tuple[np.ndarray, np.ndarray]:
    u0, v0 = initial_profiles(config)
    return sample_function(mesh, u0).values, sample_function(mesh, v0).values


def configured_rep(config: ExperimentConfig) -> QuasiRep:
    return build_quasirep(mesh_from_spec(config.mesh))

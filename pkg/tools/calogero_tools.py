# ./tools/calogero_tools.py
import logging
import os
from dataclasses import dataclass
from functools import reduce
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv

from models import MeshKind, ProductOrdering
from tools.errors import (
    BadIntervalError,
    ConfigError,
    DimensionMismatchError,
    DuplicateNodesError,
    NotDiagonalError,
    SizeCapExceededError,
)
from tools.linalg_tools import as_square, as_square_pair, commutator, freeze, is_diagonal

load_dotenv()

logger = logging.getLogger(__name__)

KRON_MAX_ROWS = int(os.getenv("LAX_MARKOV_KRON_MAX_ROWS", "4096"))
NODE_GAP_FACTOR = 1e-10


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    rho: np.ndarray

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def span(self) -> float:
        return float(self.nodes[-1] - self.nodes[0])


@dataclass(frozen=True, eq=False)
class QuasiRep:
    """Calogero matrices X = diag(nodes), Z and the ones covector e."""

    mesh: Mesh
    X: np.ndarray
    Z: np.ndarray
    ones: np.ndarray

    @property
    def n(self) -> int:
        return self.mesh.n

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.n)


@dataclass(frozen=True, eq=False)
class SampleVector:
    values: np.ndarray
    mesh: Mesh

    def __post_init__(self):
        if self.values.shape != (self.mesh.n,):
            raise DimensionMismatchError(f"samples of shape {self.values.shape} for a mesh of {self.mesh.n} nodes")


def lagrange_denominators(nodes: np.ndarray) -> np.ndarray:
    """rho_j = prod_{i != j} (x_j - x_i)."""
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return np.prod(diff, axis=1)


def _chebyshev_nodes(n: int, a: float, b: float) -> np.ndarray:
    # Chebyshev-Gauss points, ascending
    k = np.arange(n)
    t = -np.cos((2 * k + 1) * np.pi / (2 * n))
    return 0.5 * (a + b) + 0.5 * (b - a) * t


def build_mesh(
    kind: MeshKind = MeshKind.CHEBYSHEV,
    n: Optional[int] = None,
    interval: Tuple[float, float] = (-1.0, 1.0),
    nodes: Optional[Sequence[float]] = None,
) -> Mesh:
    """
    Build an interpolation mesh.

    Uniform nodes include both endpoints and become badly conditioned as N
    grows; Chebyshev-Gauss nodes are the default.

    Args:
        kind: node family
        n: number of nodes (ignored for an explicit node list)
        interval: [a, b] for the generated families
        nodes: explicit node list

    Returns:
        Mesh with ascending nodes and their Lagrange denominators
    """
    kind = MeshKind(kind)
    if kind == MeshKind.EXPLICIT:
        if nodes is None:
            raise ConfigError("an explicit mesh needs a node list")
        x = np.sort(np.asarray(nodes, dtype=float))
    else:
        a, b = float(interval[0]), float(interval[1])
        if not a < b:
            raise BadIntervalError(f"interval [{a}, {b}] is empty")
        if n is None:
            raise ConfigError("a generated mesh needs a node count")
        if n < 2:
            raise ConfigError(f"a mesh needs at least 2 nodes, got {n}")
        x = np.linspace(a, b, n) if kind == MeshKind.UNIFORM else _chebyshev_nodes(n, a, b)

    if x.ndim != 1 or len(x) < 2:
        raise ConfigError(f"a mesh needs at least 2 nodes, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ConfigError("mesh nodes must be finite")
    span = x[-1] - x[0]
    gap = np.min(np.diff(x))
    if span <= 0 or gap < NODE_GAP_FACTOR * span:
        raise DuplicateNodesError(f"minimum node gap {gap:.3e} below {NODE_GAP_FACTOR:g} * span")

    mesh = Mesh(nodes=freeze(x), rho=freeze(lagrange_denominators(x)))
    logger.debug(f"Built {kind.value} mesh with {mesh.n} nodes, span {mesh.span:.6g}")
    return mesh


def build_quasirep(mesh: Mesh) -> QuasiRep:
    x = mesh.nodes
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, np.inf)
    Z = 1.0 / diff
    np.fill_diagonal(Z, Z.sum(axis=1))
    return QuasiRep(mesh=mesh, X=freeze(np.diag(x)), Z=freeze(Z), ones=freeze(np.ones(mesh.n)))


def mesh_condition(mesh: Mesh) -> float:
    """Condition factor max|rho| / min|rho| used to scale exactness tolerances."""
    a = np.abs(mesh.rho)
    return float(a.max() / a.min())


def sample_function(mesh: Mesh, f: Callable[[np.ndarray], np.ndarray]) -> SampleVector:
    values = np.broadcast_to(np.asarray(f(mesh.nodes), dtype=float), mesh.nodes.shape)
    return SampleVector(values=freeze(values), mesh=mesh)


def interpolate(samples: SampleVector, x: float) -> float:
    nodes = samples.mesh.nodes
    hit = np.flatnonzero(nodes == x)
    if hit.size:
        return float(samples.values[hit[0]])
    d = x - nodes
    # e_j(x) = prod_{i != j}(x - x_i) = prod_i(x - x_i) / (x - x_j)
    basis = np.prod(d) / d
    return float(np.dot(to_coefficients(samples), basis))


def to_coefficients(samples: SampleVector) -> np.ndarray:
    return samples.values / samples.mesh.rho


def from_coefficients(coeffs, mesh: Mesh) -> SampleVector:
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (mesh.n,):
        raise DimensionMismatchError(f"{c.size} coefficients for a mesh of {mesh.n} nodes")
    return SampleVector(values=freeze(c * mesh.rho), mesh=mesh)


def derivative_coeffs(samples: SampleVector, rep: QuasiRep) -> np.ndarray:
    if samples.mesh is not rep.mesh and not np.array_equal(samples.mesh.nodes, rep.mesh.nodes):
        raise DimensionMismatchError("samples and quasi-representation live on different meshes")
    return rep.Z @ to_coefficients(samples)


def nodal_derivative_matrix(rep: QuasiRep) -> np.ndarray:
    """D = diag(rho) Z diag(rho)^-1, acting on node samples."""
    rho = rep.mesh.rho
    return rho[:, None] * rep.Z / rho[None, :]


def ad_power(Z, Phi, n: int) -> np.ndarray:
    """n-fold nested commutator [Z, [Z, ..., [Z, Phi]]]."""
    Z, out = as_square_pair(Z, Phi)
    if n < 0:
        raise ValueError(f"nesting depth must be nonnegative, got {n}")
    for _ in range(n):
        out = commutator(Z, out)
    return out


def kron_power(A, m: int, max_rows: Optional[int] = None) -> np.ndarray:
    A = as_square(A)
    if m < 1:
        raise ValueError(f"Kronecker power needs m >= 1, got {m}")
    cap = KRON_MAX_ROWS if max_rows is None else max_rows
    rows = A.shape[0] ** m
    if rows > cap:
        raise SizeCapExceededError(f"kron_power would build {rows} rows, cap is {cap}")
    return reduce(np.kron, [A] * m)


def naive_discretize_riemann(
    rep: QuasiRep,
    U,
    V,
    ordering: ProductOrdering = ProductOrdering.LEFT,
    require_diagonal_state: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Substitute D_x -> ad_Z, u -> U, v -> V into u_t = -2 v_x, v_t = u v_x - v u_x.

    The left ordering maps u v_x to U [Z, V]; the symmetric ordering averages
    the left and right products. Time integration evaluates the field off the
    diagonal submanifold and passes ``require_diagonal_state=False``.
    """
    if require_diagonal_state:
        U, V = require_diagonal(U, "U"), require_diagonal(V, "V")
    U, V = as_square_pair(U, V)
    if U.shape[0] != rep.n:
        raise DimensionMismatchError(f"state size {U.shape[0]} does not match mesh size {rep.n}")
    ZU = commutator(rep.Z, U)
    ZV = commutator(rep.Z, V)
    dU = -2.0 * ZV
    if ProductOrdering(ordering) == ProductOrdering.SYMMETRIC:
        dV = 0.5 * (U @ ZV + ZV @ U) - 0.5 * (V @ ZU + ZU @ V)
    else:
        dV = U @ ZV - V @ ZU
    return dU, dV


def require_diagonal(A, name: str) -> np.ndarray:
    A = as_square(A, name)
    if not is_diagonal(A):
        raise NotDiagonalError(f"{name} must be diagonal")
    return A

import numpy as np

from tools.errors import DimensionMismatchError


def as_square(A, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {A.shape}")
    return A


def as_square_pair(A, B):
    A = as_square(A, "first matrix")
    B = as_square(B, "second matrix")
    if A.shape != B.shape:
        raise DimensionMismatchError(f"shapes differ: {A.shape} vs {B.shape}")
    return A, B


def commutator(A, B) -> np.ndarray:
    A, B = as_square_pair(A, B)
    return A @ B - B @ A


def frobenius(A) -> float:
    return float(np.linalg.norm(A))


def is_diagonal(A) -> bool:
    A = np.asarray(A)
    return not np.any(A - np.diag(np.diag(A)))


def freeze(a) -> np.ndarray:
    """Return a read-only float copy of ``a``."""
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out

# ./tools/markov_tools.py
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from models import BracketVariant
from tools.linalg_tools import as_square, as_square_pair, commutator, frobenius

logger = logging.getLogger(__name__)

MEMBERSHIP_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class MarkovDecomposition:
    m_part: np.ndarray
    e_part: np.ndarray


class GradientField:
    """
    Gradient of a smooth functional on gl(N) with respect to the trace form.

    A field flagged as Casimir is checked at every evaluation: a nonzero
    [grad, alpha] is logged as a warning and recorded in ``last_defect``.
    """

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], casimir: bool = False, name: str = "gradient"):
        self.func = func
        self.casimir = casimir
        self.name = name
        self.last_defect: Optional[float] = None

    def __call__(self, alpha) -> np.ndarray:
        alpha = as_square(alpha, "alpha")
        grad = as_square(self.func(alpha), self.name)
        as_square_pair(alpha, grad)
        if self.casimir:
            defect = casimir_condition_defect(alpha, grad)
            self.last_defect = defect
            if defect > 1e-9 * max(1.0, frobenius(alpha) * frobenius(grad)):
                logger.warning(f"Casimir-flagged field '{self.name}' has defect {defect:.3e}")
        return grad


def split(A) -> MarkovDecomposition:
    A = as_square(A)
    e_part = np.diag(A.sum(axis=0))
    return MarkovDecomposition(m_part=A - e_part, e_part=e_part)


def project_m(A) -> np.ndarray:
    return split(A).m_part


def project_e(A) -> np.ndarray:
    return split(A).e_part


def r_map(A) -> np.ndarray:
    parts = split(A)
    return 0.5 * (parts.m_part - parts.e_part)


def r_bracket(A, B) -> np.ndarray:
    A, B = as_square_pair(A, B)
    return commutator(r_map(A), B) + commutator(A, r_map(B))


def trace_form(A, B) -> float:
    A, B = as_square_pair(A, B)
    # tr(AB) without forming the product
    return float(np.sum(A * B.T))


def finite_difference_gradient(
    functional: Callable[[np.ndarray], float],
    step: Optional[float] = None,
    name: str = "fd_gradient",
) -> GradientField:
    """
    Central-difference gradient of a scalar functional.

    Since d/de gamma(alpha + e E_ji) = tr(grad E_ji) = grad_ij, entry (i, j)
    of the gradient is the derivative along the elementary matrix E_ji.
    """

    def grad(alpha: np.ndarray) -> np.ndarray:
        n = alpha.shape[0]
        h = step if step is not None else 1e-5 * (1.0 + frobenius(alpha))
        out = np.empty_like(alpha)
        for i in range(n):
            for j in range(n):
                e = np.zeros_like(alpha)
                e[j, i] = h
                out[i, j] = (functional(alpha + e) - functional(alpha - e)) / (2 * h)
        return out

    return GradientField(grad, name=name)


def lie_poisson_bracket(
    alpha,
    gf: GradientField,
    gg: GradientField,
    variant: BracketVariant = BracketVariant.CLASSICAL,
) -> float:
    alpha = as_square(alpha, "alpha")
    a, b = as_square_pair(gf(alpha), gg(alpha))
    as_square_pair(alpha, a)
    if BracketVariant(variant) == BracketVariant.DEFORMED:
        a, b = project_m(a), project_m(b)
    return trace_form(alpha, commutator(a, b))


def r_lie_poisson_bracket(alpha, gf: GradientField, gg: GradientField) -> float:
    """R-bracket form tr(alpha [grad f, grad g]_R) of the deformed bracket."""
    alpha = as_square(alpha, "alpha")
    a, b = as_square_pair(gf(alpha), gg(alpha))
    as_square_pair(alpha, a)
    return trace_form(alpha, r_bracket(a, b))


def markov_orbit_field(alpha, grad_h: GradientField) -> np.ndarray:
    alpha = as_square(alpha, "alpha")
    grad = as_square(grad_h(alpha), "gradient")
    field = commutator(project_m(grad), alpha)
    np.fill_diagonal(field, 0.0)
    return field


def _tolerance(A: np.ndarray) -> float:
    return MEMBERSHIP_RTOL * max(frobenius(A), np.finfo(float).tiny)


def is_in_e_perp(Y) -> bool:
    Y = as_square(Y)
    return bool(np.linalg.norm(np.diag(Y)) <= _tolerance(Y))


def is_in_m_perp(X) -> bool:
    X = as_square(X)
    # rows constant: X = q (x) e
    return bool(frobenius(X - X[:, :1]) <= _tolerance(X))


def casimir_condition_defect(alpha, grad) -> float:
    alpha, grad = as_square_pair(alpha, grad)
    return frobenius(commutator(grad, alpha))

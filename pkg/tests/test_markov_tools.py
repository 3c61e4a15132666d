import logging

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from models import BracketVariant
from tools.errors import DimensionMismatchError
from tools.linalg_tools import commutator, frobenius
from tools.markov_tools import (
    GradientField,
    casimir_condition_defect,
    finite_difference_gradient,
    is_in_e_perp,
    is_in_m_perp,
    lie_poisson_bracket,
    markov_orbit_field,
    project_e,
    project_m,
    r_bracket,
    r_lie_poisson_bracket,
    r_map,
    split,
    trace_form,
)

SIZE = 3
matrices = arrays(np.float64, (SIZE, SIZE), elements=st.floats(min_value=-10.0, max_value=10.0))


def _linear(A):
    return GradientField(lambda alpha: A, name="linear")


def test_split_example():
    parts = split([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(parts.e_part, np.diag([4.0, 6.0]))
    np.testing.assert_array_equal(parts.m_part, [[-3.0, 2.0], [3.0, -2.0]])
    np.testing.assert_array_equal(r_map([[1.0, 2.0], [3.0, 4.0]]), [[-3.5, 1.0], [1.5, -4.0]])


def test_split_rejects_non_square():
    with pytest.raises(DimensionMismatchError):
        split(np.ones((2, 3)))


@seed(1)
@given(A=matrices)
def test_projections_are_complementary_and_idempotent(A):
    np.testing.assert_allclose(project_m(A) + project_e(A), A, atol=1e-12)
    np.testing.assert_allclose(project_m(project_m(A)), project_m(A), atol=1e-12)
    np.testing.assert_allclose(project_e(project_e(A)), project_e(A), atol=1e-12)
    np.testing.assert_allclose(project_m(A).sum(axis=0), 0.0, atol=1e-12)


@seed(2)
@given(A=matrices, B=matrices)
def test_m_is_a_subalgebra(A, B):
    C = commutator(project_m(A), project_m(B))
    assert np.max(np.abs(C.sum(axis=0))) <= 1e-12 * max(1.0, frobenius(A) * frobenius(B))


@seed(3)
@given(A=matrices, B=matrices)
def test_r_bracket_on_m_is_the_commutator(A, B):
    a, b = project_m(A), project_m(B)
    np.testing.assert_allclose(r_bracket(a, b), commutator(a, b), atol=1e-10 * max(1.0, frobenius(a) * frobenius(b)))


def test_r_bracket_jacobi(rng):
    for _ in range(20):
        A, B, C = (rng.integers(-5, 5, endpoint=True, size=(4, 4)).astype(float) for _ in range(3))
        jac = r_bracket(A, r_bracket(B, C)) + r_bracket(B, r_bracket(C, A)) + r_bracket(C, r_bracket(A, B))
        scale = max(1.0, frobenius(A) * frobenius(B) * frobenius(C))
        assert frobenius(jac) <= 1e-12 * scale


def test_trace_form_examples():
    assert trace_form(np.eye(3), np.eye(3)) == 3.0
    assert trace_form([[0.0, 1.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]) == 1.0


def test_finite_difference_gradient_of_quadratic(rng):
    alpha = rng.standard_normal((3, 3))
    grad = finite_difference_gradient(lambda a: 0.5 * np.trace(a @ a))
    np.testing.assert_allclose(grad(alpha), alpha, atol=1e-7)
    A = rng.standard_normal((3, 3))
    linear = finite_difference_gradient(lambda a: trace_form(A, a))
    np.testing.assert_allclose(linear(alpha), A, atol=1e-8)


def test_classical_bracket_of_casimir_vanishes(rng):
    alpha = rng.standard_normal((3, 3))
    casimir = GradientField(lambda a: a, casimir=True, name="tr_sq")
    other = _linear(rng.standard_normal((3, 3)))
    assert abs(lie_poisson_bracket(alpha, casimir, other)) <= 1e-12 * frobenius(alpha) ** 2 * 10
    assert casimir.last_defect == pytest.approx(0.0, abs=1e-12)


def test_classical_bracket_of_linear_functionals(rng):
    alpha, A, B = (rng.standard_normal((3, 3)) for _ in range(3))
    value = lie_poisson_bracket(alpha, _linear(A), _linear(B))
    assert value == pytest.approx(np.trace(alpha @ (A @ B - B @ A)))


@seed(4)
@given(alpha=matrices, A=matrices, B=matrices)
@settings(max_examples=50)
def test_deformed_bracket_forms_agree(alpha, A, B):
    deformed = lie_poisson_bracket(alpha, _linear(A), _linear(B), variant=BracketVariant.DEFORMED)
    r_form = r_lie_poisson_bracket(alpha, _linear(A), _linear(B))
    scale = max(1.0, frobenius(alpha) * frobenius(A) * frobenius(B))
    assert abs(deformed - r_form) <= 1e-12 * scale


def test_bracket_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        lie_poisson_bracket(np.eye(3), _linear(np.eye(2)), _linear(np.eye(2)))


def test_markov_orbit_field():
    alpha = np.array([[0.0, 1.0], [1.0, 0.0]])
    field = markov_orbit_field(alpha, GradientField(lambda a: a))
    np.testing.assert_allclose(field, 0.0, atol=1e-15)


def test_markov_orbit_field_has_zero_diagonal(rng):
    alpha = rng.standard_normal((4, 4))
    B = rng.standard_normal((4, 4))
    field = markov_orbit_field(alpha, _linear(B))
    np.testing.assert_array_equal(np.diag(field), 0.0)
    off = ~np.eye(4, dtype=bool)
    expected = commutator(project_m(B), alpha)
    np.testing.assert_allclose(field[off], expected[off])


def test_annihilator_membership():
    assert is_in_e_perp([[0.0, 5.0], [7.0, 0.0]])
    assert not is_in_e_perp(np.eye(2))
    assert is_in_m_perp([[2.0, 2.0], [-1.0, -1.0]])
    assert not is_in_m_perp(np.eye(2))


@seed(5)
@given(A=matrices, B=matrices)
def test_annihilators_pair_to_zero(A, B):
    m_perp = np.outer(A[:, 0], np.ones(SIZE))
    e_perp = B - np.diag(np.diag(B))
    assert is_in_m_perp(m_perp)
    assert is_in_e_perp(e_perp)
    scale = max(1.0, frobenius(A) * frobenius(B))
    assert abs(trace_form(m_perp, project_m(B))) <= 1e-12 * scale * 10
    assert abs(trace_form(e_perp, project_e(A))) <= 1e-12 * scale


def test_casimir_condition_defect(rng):
    alpha = rng.standard_normal((4, 4))
    assert casimir_condition_defect(alpha, alpha @ alpha @ alpha) <= 1e-12 * frobenius(alpha) ** 4
    assert casimir_condition_defect(alpha, rng.standard_normal((4, 4))) > 1e-3


def test_casimir_flagged_field_warns(rng, caplog):
    field = GradientField(lambda a: np.triu(a), casimir=True, name="not_casimir")
    with caplog.at_level(logging.WARNING):
        field(rng.standard_normal((3, 3)))
    assert field.last_defect > 0
    assert "not_casimir" in caplog.text

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from plastopt.tensor import (DevTensor, SymTensor, contract, dev_basis, dev_project,
                             frobenius_norm, mandel_to_matrix, matrix_to_mandel, symmetrize)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def sym(M):
    return SymTensor.from_matrix(np.asarray(M, dtype=float))


def test_dev_of_identity_is_zero():
    assert np.allclose(dev_project(SymTensor.identity(2)).matrix(), 0.0)


def test_dev_example():
    assert np.allclose(dev_project(sym(np.diag([3.0, 1.0]))).matrix(), np.diag([1.0, -1.0]))


def test_dev_idempotent():
    Q = dev_project(sym([[1.0, 2.0], [2.0, 5.0]]))
    assert np.allclose(dev_project(Q).matrix(), Q.matrix())


@pytest.mark.parametrize("A,B,expected", [
    (np.eye(2), np.eye(2), 2.0),
    (np.diag([1.0, 4.0]), np.zeros((2, 2)), 0.0),
    (np.diag([1.0, -1.0]), np.diag([2.0, -2.0]), 4.0),
])
def test_contract(A, B, expected):
    assert contract(sym(A), sym(B)) == pytest.approx(expected)


def test_symmetrize_and_norm():
    G = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert np.allclose(symmetrize(G).matrix(), 0.0)
    S = np.array([[1.0, 2.0], [2.0, 3.0]])
    assert np.allclose(symmetrize(S).matrix(), S)
    assert frobenius_norm(sym(np.diag([3.0, 4.0]))) == pytest.approx(5.0)


def test_dev_tensor_reprojects_trace():
    D = DevTensor.from_matrix(np.array([[2.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(D.matrix(), [[1.0, 1.0], [1.0, -1.0]])


def test_dev_basis_orthonormal():
    for n in (2, 3):
        B = dev_basis(n)
        assert np.allclose(B.T @ B, np.eye(B.shape[1]))


@settings(max_examples=200, deadline=None)
@given(arrays(float, (2, 2), elements=finite), arrays(float, (2, 2), elements=finite))
def test_mandel_preserves_inner_product(A, B):
    A, B = A + A.T, B + B.T
    lhs = np.sum(A * B)
    assert matrix_to_mandel(A) @ matrix_to_mandel(B) == pytest.approx(lhs, rel=1e-9, abs=1e-6)
    assert np.allclose(mandel_to_matrix(matrix_to_mandel(A)), A)


@settings(max_examples=200, deadline=None)
@given(arrays(float, (3, 3), elements=finite))
def test_dev_projection_orthogonal(M):
    S = sym(M + M.T)
    D = dev_project(S)
    assert abs(np.trace(D.matrix())) <= 1e-9 * (1 + np.abs(M).max())
    # S - dev S is spherical, hence orthogonal to every deviator
    assert abs(contract(S - D, D)) <= 1e-8 * (1 + np.abs(M).max()) ** 2

import numpy as np
import pytest

from smide.lib.errors import InvalidParameterError, SingularMatrixError
from smide.lib.linalg import (
    check_spd,
    checked_inverse,
    is_invertible,
    p_induced_norm,
    p_induced_norms,
    p_norm,
    sqrt_pair,
)

P = np.array([[2.0, 0.5], [0.5, 1.0]])


def test_sqrt_pair_inverts():
    half, inv_half = sqrt_pair(P)
    np.testing.assert_allclose(half @ half, P, atol=1e-12)
    np.testing.assert_allclose(half @ inv_half, np.eye(2), atol=1e-12)


def test_identity_weight_gives_euclidean_norms():
    Q = np.array([[1.0, 2.0], [0.0, 1.0]])
    assert p_norm([3.0, 4.0], np.eye(2)) == pytest.approx(5.0)
    assert p_induced_norm(Q, np.eye(2)) == pytest.approx(np.linalg.norm(Q, 2))


def test_induced_norm_of_a_stack():
    stack = np.stack([np.eye(2), 2.0 * np.eye(2), np.zeros((2, 2))])
    np.testing.assert_allclose(p_induced_norms(stack, P), [1.0, 2.0, 0.0], atol=1e-12)
    scalars = np.array([[[-3.0]], [[0.5]]])
    np.testing.assert_allclose(p_induced_norms(scalars, [[4.0]]), [3.0, 0.5])


def test_spd_checks():
    with pytest.raises(InvalidParameterError):
        check_spd([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(InvalidParameterError):
        check_spd([[1.0, 0.0], [0.0, -1.0]])


def test_checked_inverse():
    np.testing.assert_allclose(checked_inverse([[-2.0]]), [[-0.5]])
    with pytest.raises(SingularMatrixError):
        checked_inverse([[1.0, 2.0], [2.0, 4.0]])


def test_invertibility_ignores_the_scale():
    assert is_invertible([[1e-21]])
    np.testing.assert_allclose(checked_inverse([[1e-21]]), [[1e21]])
    assert is_invertible(1e-15 * np.eye(2))
    assert not is_invertible([[0.0]])
    assert not is_invertible([[1e-21, 2e-21], [2e-21, 4e-21]])
    assert not is_invertible(np.ones((2, 3)))

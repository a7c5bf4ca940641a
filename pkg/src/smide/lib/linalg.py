"""Small dense linear-algebra helpers (weighted norms, checks)."""

from __future__ import annotations

import numpy as np
from scipy import linalg

from smide.lib.errors import InvalidParameterError, SingularMatrixError

RCOND_TOL = 1e-12


def as_matrix(value, name: str = 'matrix') -> np.ndarray:
    """Coerce nested lists or scalars to a 2-D float array."""
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise InvalidParameterError(f'{name} must be two-dimensional')
    return arr


def as_vector(value, name: str = 'vector') -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise InvalidParameterError(f'{name} must be one-dimensional')
    return arr


def spectral_norm(Q: np.ndarray) -> float:
    return float(np.linalg.norm(np.atleast_2d(Q), 2))


def check_spd(P: np.ndarray, name: str = 'P') -> np.ndarray:
    """Return the symmetric part of `P`, raising if it is not positive definite."""
    P = as_matrix(P, name)
    if P.shape[0] != P.shape[1]:
        raise InvalidParameterError(f'{name} must be square')
    if not np.allclose(P, P.T, atol=1e-12 * max(1.0, np.abs(P).max())):
        raise InvalidParameterError(f'{name} must be symmetric')
    P = 0.5 * (P + P.T)
    if np.linalg.eigvalsh(P).min() <= 0.0:
        raise InvalidParameterError(f'{name} must be positive definite')
    return P


def sqrt_pair(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """P^{1/2} and P^{-1/2} from one symmetric eigendecomposition."""
    w, V = linalg.eigh(check_spd(P))
    root = np.sqrt(w)
    return (V * root) @ V.T, (V / root) @ V.T


def p_norm(y: np.ndarray, P: np.ndarray) -> float:
    """Weighted Euclidean norm sqrt(y' P y)."""
    y = as_vector(y)
    return float(np.sqrt(max(y @ P @ y, 0.0)))


def p_induced_norms(Q: np.ndarray, P: np.ndarray) -> np.ndarray:
    """
    Induced ||Q||_P for one matrix or a stack of matrices.

    ||Q||_P is the largest singular value of P^{1/2} Q P^{-1/2}.

    Args:
        Q (np.ndarray): (m, m) matrix or (L, m, m) stack.
        P (np.ndarray): (m, m) SPD weight.

    Returns:
        np.ndarray: scalar array or (L,) array of norms.
    """
    half, inv_half = sqrt_pair(P)
    Q = np.asarray(Q, dtype=float)
    scaled = half @ Q @ inv_half
    if scaled.ndim == 2:
        return np.asarray(np.linalg.norm(scaled, 2))
    if scaled.shape[1] == 1 and scaled.shape[2] == 1:
        return np.abs(scaled[:, 0, 0])
    return np.linalg.norm(scaled, ord=2, axis=(1, 2))


def p_induced_norm(Q: np.ndarray, P: np.ndarray) -> float:
    return float(p_induced_norms(as_matrix(Q), P))


def checked_inverse(M: np.ndarray, name: str = 'matrix') -> np.ndarray:
    """Inverse of a square matrix, refusing a reciprocal condition number below RCOND_TOL."""
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise SingularMatrixError(f'{name} is not square: {M.shape}')
    if not is_invertible(M):
        raise SingularMatrixError(f'{name} is singular (cond={np.linalg.cond(M):.3e})')
    return np.linalg.inv(M)


def is_invertible(M: np.ndarray) -> bool:
    """Square, finite and cond(M) < 1 / RCOND_TOL; independent of the scale of M."""
    M = as_matrix(M)
    return M.shape[0] == M.shape[1] and bool(np.all(np.isfinite(M))) and np.linalg.cond(M) * RCOND_TOL < 1.0

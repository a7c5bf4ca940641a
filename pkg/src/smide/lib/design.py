"""
Sliding-mode controller design for the linear plant with distributed
input memory

    x' = A x + B (u + gamma) + p + int Phi(t, tau) B_tilde (u + gamma) dtau,
    y = C x,

with the unit-vector law u = -rho (CB)^-1 y / ||y||_P.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.linalg import pinv, solve_continuous_lyapunov

from smide.lib.errors import InfeasibleDesignError, InvalidParameterError, RankError
from smide.lib.fields import PiecewiseAffineField, SwitchingSurface, UnitVectorLaw
from smide.lib.kernels import memory_bound
from smide.lib.linalg import (
    as_matrix,
    as_vector,
    check_spd,
    checked_inverse,
    p_norm,
    spectral_norm,
)
from smide.lib.models import DesignResult, LinearIdePlant

logger = logging.getLogger(__name__)

LMI_TOL = 1e-10
DEFAULT_DELTA = 0.1


def extract_lambda(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    """
    Solve C A = Lambda C for Lambda by least squares.

    Raises:
        RankError: C is not of full row rank.
        InfeasibleDesignError: no Lambda reproduces C A.
    """
    A, C = as_matrix(A, 'A'), as_matrix(C, 'C')
    if np.linalg.matrix_rank(C) < C.shape[0]:
        raise RankError(f'C of shape {C.shape} is not of full row rank')
    CA = C @ A
    Lambda = CA @ pinv(C)
    residual = float(np.linalg.norm(CA - Lambda @ C))
    if residual > LMI_TOL * np.linalg.norm(CA) + 1e-14:
        raise InfeasibleDesignError(
            'C A is not of the form Lambda C',
            [f'least-squares residual ||CA - Lambda C|| = {residual:.3e}'],
        )
    return Lambda


def _lmi_violation(Lambda: np.ndarray, P: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(Lambda.T @ P + P @ Lambda).max())


def solve_lmi(Lambda: np.ndarray, P: np.ndarray | None = None) -> np.ndarray:
    """
    Find an SPD P with Lambda^T P + P Lambda <= 0.

    Tries P = I, then (m <= 2, Lambda Hurwitz) the Lyapunov solution with
    Q = I, then the user-supplied `P`.

    Raises:
        InfeasibleDesignError: none of the candidates verifies.
    """
    Lambda = as_matrix(Lambda, 'Lambda')
    m = Lambda.shape[0]
    identity = np.eye(m)
    if _lmi_violation(Lambda, identity) <= LMI_TOL:
        return identity
    if m <= 2 and np.all(np.linalg.eigvals(Lambda).real < 0.0):
        candidate = solve_continuous_lyapunov(Lambda.T, -identity)
        candidate = 0.5 * (candidate + candidate.T)
        if np.linalg.eigvalsh(candidate).min() > 0.0 and _lmi_violation(Lambda, candidate) <= LMI_TOL:
            return candidate
    diagnostics = [f'max eig(Lambda + Lambda^T) = {_lmi_violation(Lambda, identity):.3e}']
    if P is not None:
        P = check_spd(as_matrix(P, 'P'))
        violation = _lmi_violation(Lambda, P)
        if violation <= LMI_TOL:
            return P
        diagnostics.append(f'user P violates the LMI: max eig = {violation:.3e}')
    raise InfeasibleDesignError('no P with Lambda^T P + P Lambda <= 0 was found', diagnostics)


def design_gain(plant: LinearIdePlant, P: np.ndarray, M: float, delta: float) -> float:
    """
    rho = (sqrt(||P||) (||CB|| gamma_bar + ||C|| p_bar + M ||CB|| gamma_bar) + delta) / (1 - M)

    Raises:
        InvalidParameterError: delta <= 0.
        InfeasibleDesignError: M >= 1.
    """
    if not delta > 0.0:
        raise InvalidParameterError('reaching margin delta must be positive')
    if M >= 1.0:
        raise InfeasibleDesignError(f'memory bound M = {M:.6g} >= 1', [f'M = {M:.6g}'])
    norm_CB = spectral_norm(plant.CB)
    perturbation = norm_CB * plant.gamma_bar + spectral_norm(plant.C) * plant.p_bar + M * norm_CB * plant.gamma_bar
    return (np.sqrt(spectral_norm(P)) * perturbation + delta) / (1.0 - M)


def reaching_time_bound(x0, C: np.ndarray, P: np.ndarray, delta: float) -> float:
    """T_max = ||C x0||_P / delta."""
    if not delta > 0.0:
        raise InvalidParameterError('reaching margin delta must be positive')
    return p_norm(as_matrix(C) @ as_vector(x0), P) / delta


def projector(B: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Pi = I - B (CB)^-1 C, the projector onto {C x = 0} along range(B)."""
    B, C = as_matrix(B, 'B'), as_matrix(C, 'C')
    return np.eye(B.shape[0]) - B @ checked_inverse(C @ B, 'CB') @ C


def sliding_mode_matrix(A: np.ndarray, B: np.ndarray, C: np.ndarray) -> np.ndarray:
    """A - B (CB)^-1 C A: the memoryless sliding dynamics on {C x = 0}."""
    A, B, C = as_matrix(A, 'A'), as_matrix(B, 'B'), as_matrix(C, 'C')
    return A - B @ checked_inverse(C @ B, 'CB') @ C @ A


def smc_feedback(rho: float, CB: np.ndarray, P: np.ndarray, C: np.ndarray) -> UnitVectorLaw:
    """u = -rho (CB)^-1 y / ||y||_P on y = C x, with u = 0 at y = 0."""
    return UnitVectorLaw(rho=rho, CB=CB, P=P, C=C)


def bounded_delay_stability(A: np.ndarray, Lambda: np.ndarray, tol: float = 1e-8) -> tuple[bool, np.ndarray]:
    """
    Whether spec(A) minus spec(Lambda), as multisets, lies in the open left
    half-plane. Returns the flag and the remaining eigenvalues.
    """
    remaining = list(np.linalg.eigvals(as_matrix(A, 'A')))
    for mu in np.linalg.eigvals(as_matrix(Lambda, 'Lambda')):
        distances = [abs(ev - mu) for ev in remaining]
        if distances and min(distances) <= tol * max(1.0, abs(mu)):
            remaining.pop(int(np.argmin(distances)))
    remaining = np.array(remaining)
    return bool(np.all(remaining.real < 0.0)), remaining


def closed_loop_fields(plant: LinearIdePlant, law) -> tuple[PiecewiseAffineField, PiecewiseAffineField]:
    """
    The instantaneous field a = A x + B gamma + p, b = B and the memory
    integrand a = B_tilde gamma, b = B_tilde, both driven by `law`.
    """
    gamma, p = plant.gamma_signal(), plant.p_signal()
    A, B, B_tilde = plant.A, plant.B, plant.B_tilde
    surface = SwitchingSurface.linear(plant.C)
    f = PiecewiseAffineField(
        a=lambda t, x: A @ x + B @ gamma(t) + p(t),
        b=lambda t, x: B,
        feedback=law,
        surface=surface,
    )
    f_tilde = PiecewiseAffineField(
        a=lambda t, x: B_tilde @ gamma(t),
        b=lambda t, x: B_tilde,
        feedback=law,
        surface=surface,
    )
    return f, f_tilde


def design(
    plant: LinearIdePlant,
    h: float,
    horizon: float,
    t0: float = 0.0,
    delta: float = DEFAULT_DELTA,
    x0=None,
    P: np.ndarray | None = None,
    rho_override: float | None = None,
) -> DesignResult:
    """
    Run the whole design: Lambda, P, the memory bound M over the horizon,
    the gain and the reaching-time bound.

    An infeasible design is reported, not raised: `feasible` is False and
    `rho` is the override when one is given.

    Args:
        plant (LinearIdePlant): plant data and perturbation bounds.
        h (float): quadrature step for M.
        horizon (float): interval over which M is taken.
        t0 (float): initial time.
        delta (float): reaching margin.
        x0 (array, optional): initial state for T_max.
        P (np.ndarray, optional): user weight tried when the closed forms fail.
        rho_override (float, optional): gain used instead of the closed form.

    Returns:
        DesignResult: the design record.
    """
    diagnostics: list[str] = []
    try:
        Lambda = extract_lambda(plant.A, plant.C)
        P = solve_lmi(Lambda, P)
    except InfeasibleDesignError as e:
        logger.warning(f'design infeasible: {e}')
        return DesignResult(
            delta=delta,
            feasible=False,
            rho=rho_override,
            rho_source='override' if rho_override is not None else 'formula',
            diagnostics=[str(e)] + [d for d in e.diagnostics if d != str(e)],
        )

    R = plant.B_tilde @ checked_inverse(plant.CB, 'CB')
    M = memory_bound(plant.kernel, plant.C, R, P, t0, horizon, h)
    feasible = M < 1.0
    rho = None
    rho_source = 'formula'
    if feasible:
        rho = float(design_gain(plant, P, M, delta))
    else:
        diagnostics.append(f'memory bound M = {M:.6g} >= 1: the closed-form gain does not apply')
        logger.warning(diagnostics[-1])
    if rho_override is not None:
        if rho is not None and rho_override < rho:
            diagnostics.append(f'override rho = {rho_override:.6g} is below the closed-form {rho:.6g}')
        rho, rho_source = float(rho_override), 'override'

    T_max = None
    if x0 is not None:
        T_max = reaching_time_bound(x0, plant.C, P, delta)
    logger.debug(f'design: M={M:.6g}, rho={rho}, feasible={feasible}')
    return DesignResult(
        Lambda=Lambda,
        P=P,
        M=M,
        rho=rho,
        rho_source=rho_source,
        delta=delta,
        T_max=T_max,
        feasible=feasible,
        diagnostics=diagnostics,
    )

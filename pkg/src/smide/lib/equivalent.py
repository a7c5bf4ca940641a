"""
Equivalent control in the sliding phase.

On {C x = 0} the unknown w = u_eq + gamma solves the second-kind
Volterra equation

    w(s) = g(s) + int_{T}^{s} K(s, tau) w(tau) dtau,
    K = -(CB)^-1 C Phi B_tilde,   g = -(CB)^-1 (C p + g_tilde),

with g_tilde the memory of the reaching phase. It is solved on the
simulation grid either by the truncated Neumann series or directly by
forward substitution.
"""

from __future__ import annotations

import logging
from math import exp, lgamma, log
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import gammainc

from smide.lib.errors import InvalidParameterError, NotInSlidingError
from smide.lib.fields import UnitVectorLaw
from smide.lib.integrator import memory_integrals
from smide.lib.kernels import Kernel, ProjectedKernel
from smide.lib.linalg import checked_inverse, spectral_norm
from smide.lib.models import LinearIdePlant, Trajectory
from smide.lib.signals import Signal

logger = logging.getLogger(__name__)

Rule = Literal['rectangle', 'trapezoid']
MAX_TERMS = 400
NEUMANN_RTOL = 1e-10


class VolterraProblem(BaseModel):
    """
    Second-kind Volterra equation u = g + K u sampled on a uniform grid.

    Attributes:
        times: grid t*, t* + h, ..., t1.
        forcing: g on the grid, shape (L, m).
        kernel: m x m kernel K(s, tau).
        bound: M_K >= sup ||K|| on the sampled triangle (computed when omitted).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray
    forcing: np.ndarray
    kernel: Kernel
    h: float
    bound: float | None = None

    @model_validator(mode='after')
    def check_grid(self):
        object.__setattr__(self, 'times', np.asarray(self.times, dtype=float))
        forcing = np.asarray(self.forcing, dtype=float).reshape(len(self.times), -1)
        object.__setattr__(self, 'forcing', forcing)
        if forcing.shape[1] != self.kernel.dim:
            raise ValueError(f'forcing has {forcing.shape[1]} components, kernel is {self.kernel.dim} x {self.kernel.dim}')
        if not self.h > 0.0:
            raise ValueError('step h must be positive')
        if self.bound is None:
            object.__setattr__(self, 'bound', _sampled_sup(self.kernel, self.times, self.h))
        return self

    @classmethod
    def on_grid(cls, kernel: Kernel, forcing: Signal, t_star: float, t1: float, h: float) -> 'VolterraProblem':
        steps = int(np.floor((t1 - t_star) / h + 1e-9))
        times = t_star + h * np.arange(steps + 1)
        return cls(times=times, forcing=forcing.on_grid(times), kernel=kernel, h=h)

    @property
    def length(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def forcing_sup(self) -> float:
        return float(np.linalg.norm(self.forcing, axis=1).max()) if self.forcing.size else 0.0


def _sampled_sup(kernel: Kernel, times: np.ndarray, h: float) -> float:
    if kernel.stationary:
        table = kernel.lag_table(h, len(times))
        return float(np.linalg.norm(table, ord=2, axis=(1, 2)).max()) if len(table) else 0.0
    sup = 0.0
    for k, t in enumerate(times):
        sup = max(sup, float(np.linalg.norm(kernel.row(t, times[: k + 1]), ord=2, axis=(1, 2)).max()))
    return sup


def _weights(count: int, h: float, rule: Rule) -> np.ndarray:
    """Quadrature weights W[k, i] of int_{t*}^{t_k}."""
    W = h * np.tril(np.ones((count, count)), k=-1)
    if rule == 'trapezoid':
        W[1:, 0] = 0.5 * h
        W[np.arange(1, count), np.arange(1, count)] = 0.5 * h
    elif rule != 'rectangle':
        raise InvalidParameterError(f'unknown quadrature rule {rule!r}')
    return W


def operator_matrix(problem: VolterraProblem, rule: Rule = 'rectangle') -> np.ndarray:
    """The discretized operator K as an (L m) x (L m) block lower-triangular matrix."""
    times, h = problem.times, problem.h
    count, m = len(times), problem.kernel.dim
    W = _weights(count, h, rule)
    if problem.kernel.stationary:
        table = problem.kernel.lag_table(h, count)
        padded = np.zeros((count, m, m))
        padded[: len(table)] = table
        lag = np.subtract.outer(np.arange(count), np.arange(count))
        blocks = padded[np.clip(lag, 0, None)]
    else:
        blocks = np.zeros((count, count, m, m))
        for k, t in enumerate(times):
            blocks[k, : k + 1] = problem.kernel.row(t, times[: k + 1])
    blocks = blocks * W[:, :, None, None]
    return blocks.transpose(0, 2, 1, 3).reshape(count * m, count * m)


def _power_over_factorial(x: float, i: int) -> float:
    if x == 0.0:
        return 1.0 if i == 0 else 0.0
    return exp(i * log(x) - lgamma(i + 1))


def term_bound(problem: VolterraProblem, i: int) -> float:
    """(M_K (L + h))^i / i! sup ||g||, a bound on the i-th Neumann term."""
    return _power_over_factorial(problem.bound * (problem.length + problem.h), i) * problem.forcing_sup


def tail_bound(problem: VolterraProblem, n_terms: int) -> float:
    """sup ||g|| sum_{i > n} x^i / i! with x = M_K (L + h)."""
    x = problem.bound * (problem.length + problem.h)
    if x == 0.0:
        return 0.0
    return float(np.exp(x) * gammainc(n_terms + 1, x)) * problem.forcing_sup


def default_terms(problem: VolterraProblem, rtol: float = NEUMANN_RTOL) -> int:
    """Smallest n whose tail bound is below rtol sup ||g||."""
    target = rtol * problem.forcing_sup
    for n in range(1, MAX_TERMS + 1):
        if tail_bound(problem, n) <= target:
            return n
    logger.warning(f'Neumann tail bound above {rtol:g} after {MAX_TERMS} terms')
    return MAX_TERMS


class NeumannResult(BaseModel):
    """
    Truncated Neumann sum and its error bounds.

    `truncation_bound` is the first omitted term bound
    (M_K L)^{n+1} / (n+1)! sup ||g||; `tail_bound` bounds the whole omitted
    tail of the discretized series.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    n_terms: int
    term_sups: list[float] = Field(default_factory=list)
    truncation_bound: float
    tail_bound: float


def neumann_solve(problem: VolterraProblem, n_terms: int | None = None, rule: Rule = 'rectangle') -> NeumannResult:
    """
    sum_{i=0}^{n_terms} K^i g with K applied by quadrature on the grid.

    Args:
        problem (VolterraProblem): the sampled equation.
        n_terms (int, optional): highest power kept; the default is the
            smallest n with tail bound below 1e-10 sup ||g||.
        rule (str): 'rectangle' (strict left sum) or 'trapezoid'.

    Returns:
        NeumannResult: grid values of w = u_eq + gamma, shape (L, m), and the
            bounds; subtract gamma on the grid to recover u_eq.
    """
    if n_terms is None:
        n_terms = default_terms(problem)
    if n_terms < 1:
        raise InvalidParameterError('at least one Neumann term is required')
    operator = operator_matrix(problem, rule)
    count, m = problem.forcing.shape
    term = problem.forcing.reshape(-1)
    total = term.copy()
    sups = [problem.forcing_sup]
    for _ in range(n_terms):
        term = operator @ term
        total += term
        sups.append(float(np.linalg.norm(term.reshape(count, m), axis=1).max()))
    first_omitted = _power_over_factorial(problem.bound * problem.length, n_terms + 1) * problem.forcing_sup
    logger.debug(f'neumann_solve: {n_terms} terms, M_K={problem.bound:.4g}, L={problem.length:.4g}')
    return NeumannResult(
        values=total.reshape(count, m),
        n_terms=n_terms,
        term_sups=sups,
        truncation_bound=first_omitted,
        tail_bound=tail_bound(problem, n_terms),
    )


def direct_volterra_solve(problem: VolterraProblem, rule: Rule = 'rectangle') -> np.ndarray:
    """
    Forward substitution u_k = g_k + sum_{i<k} w_ki K(t_k, t_i) u_i; with the
    trapezoid rule the diagonal term makes each step a small m x m solve.

    Returns w = u_eq + gamma on the grid, shape (L, m), not u_eq itself.
    """
    if rule not in ('rectangle', 'trapezoid'):
        raise InvalidParameterError(f'unknown quadrature rule {rule!r}')
    times, h, kernel = problem.times, problem.h, problem.kernel
    count, m = problem.forcing.shape
    table = kernel.lag_table(h, count) if kernel.stationary else None
    u = np.zeros((count, m))
    u[0] = problem.forcing[0]
    for k in range(1, count):
        if table is not None:
            row = np.zeros((k + 1, m, m))
            j = min(k + 1, len(table))
            row[k - j + 1 :] = table[:j][::-1]
        else:
            row = kernel.row(times[k], times[: k + 1])
        weights = np.full(k, h)
        if rule == 'trapezoid':
            weights[0] = 0.5 * h
        rhs = problem.forcing[k] + np.einsum('i,iab,ib->a', weights, row[:k], u[:k])
        if rule == 'trapezoid':
            u[k] = np.linalg.solve(np.eye(m) - 0.5 * h * row[k], rhs)
        else:
            u[k] = rhs
    return u


def _outputs(traj: Trajectory, C: np.ndarray) -> np.ndarray:
    return traj.outputs if traj.outputs is not None else traj.states @ C.T


def detect_reaching_time(
    traj: Trajectory,
    C: np.ndarray,
    P: np.ndarray | None = None,
    window: int = 100,
    factor: float = 5.0,
) -> float | None:
    """
    First grid time after which ||y||_P stays below factor h ||C|| max ||x||
    for `window` consecutive samples; None when it never does.
    """
    y = _outputs(traj, C)
    P = np.eye(y.shape[1]) if P is None else P
    norms = np.sqrt(np.maximum(np.einsum('ki,ij,kj->k', y, P, y), 0.0))
    scale = float(np.linalg.norm(traj.states, axis=1).max())
    threshold = factor * traj.h * spectral_norm(C) * scale
    below = (norms < threshold).astype(int)
    if len(below) < window:
        return None
    runs = np.convolve(below, np.ones(window, dtype=int), mode='valid')
    hits = np.flatnonzero(runs == window)
    if not hits.size:
        return None
    return float(traj.times[hits[0]])


def _law_weight(law, m: int) -> np.ndarray:
    return law.P if isinstance(law, UnitVectorLaw) else np.eye(m)


def _applied_memory(plant: LinearIdePlant, traj: Trajectory, inputs: np.ndarray) -> np.ndarray:
    """h sum_{i<=k} C Phi(t_k, t_i) B_tilde (inputs_i + gamma_i) on the whole grid."""
    g = plant.gamma_signal().on_grid(traj.times)
    integrand = (inputs + g) @ plant.B_tilde.T
    return memory_integrals(plant.kernel, traj.times, integrand, traj.h) @ plant.C.T


def build_sliding_volterra(
    plant: LinearIdePlant,
    traj: Trajectory,
    law=None,
    T: float | None = None,
) -> VolterraProblem:
    """
    The sliding-phase Volterra equation for w = u_eq + gamma on [T, t1].

    Args:
        plant (LinearIdePlant): the simulated plant (its gamma and p signals).
        traj (Trajectory): closed-loop run with recorded inputs.
        law (FeedbackLaw, optional): supplies the output weight P.
        T (float, optional): reaching time; detected when omitted.

    Raises:
        NotInSlidingError: no reaching time is found, or y leaves the
            O(h) band after T.
    """
    if traj.inputs is None:
        raise InvalidParameterError('the trajectory carries no applied inputs')
    C = plant.C
    if T is None:
        T = detect_reaching_time(traj, C, _law_weight(law, plant.m))
        if T is None:
            raise NotInSlidingError('no reaching time found on the trajectory')
    start = traj.index_at(T)
    y = _outputs(traj, C)[start:]
    limit = 10.0 * traj.h * spectral_norm(C) * float(np.linalg.norm(traj.states, axis=1).max())
    if np.abs(y).max() > limit:
        raise NotInSlidingError(f'max |y| = {np.abs(y).max():.3e} after T = {T:.4g} exceeds {limit:.3e}')

    CB_inv = checked_inverse(plant.CB, 'CB')
    reaching_inputs = traj.inputs.copy()
    reaching_inputs[start:] = -plant.gamma_signal().on_grid(traj.times[start:])
    history = _applied_memory(plant, traj, reaching_inputs)[start:]
    times = traj.times[start:]
    p = plant.p_signal().on_grid(times)
    forcing = -(p @ C.T + history) @ CB_inv.T
    kernel = ProjectedKernel(inner=plant.kernel, left=-CB_inv @ C, right=plant.B_tilde)
    logger.debug(f'sliding Volterra problem on [{times[0]:.4g}, {times[-1]:.4g}] with {len(times)} nodes')
    return VolterraProblem(times=times, forcing=forcing, kernel=kernel, h=traj.h)


def sliding_residual(traj: Trajectory, plant: LinearIdePlant, u_eq: np.ndarray, T: float) -> np.ndarray:
    """
    CB (u_eq + gamma) + C p + h sum_{i<=k} C Phi B_tilde (u* + gamma) on [T, t1],
    where u* is the applied input before T and u_eq after. Shape (L, m).
    """
    start = traj.index_at(T)
    u_eq = np.asarray(u_eq, dtype=float).reshape(len(traj.times) - start, -1)
    combined = traj.inputs.copy()
    combined[start:] = u_eq
    times = traj.times[start:]
    g = plant.gamma_signal().on_grid(times)
    p = plant.p_signal().on_grid(times)
    memory = _applied_memory(plant, traj, combined)[start:]
    return (u_eq + g) @ plant.CB.T + p @ plant.C.T + memory

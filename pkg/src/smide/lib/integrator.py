"""
Explicit Euler for (possibly discontinuous) integro-differential equations

    x' = f(t, x) + int_{t0}^t Phi(t, tau) f_tilde(tau, x(tau)) dtau

with the memory integral approximated by the rectangle rule on the
simulation grid:

    x_{k+1} = x_k + h f(t_k, x_k) + h I_k,
    I_k = h sum_{i<=k} Phi(t_k, t_i) f_tilde(t_i, x_i).

Also provides the augmented-ODE cross-check for exponential-series
kernels and the post-processing used to estimate the equivalent control.
"""

from __future__ import annotations

import logging
from enum import Enum
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from smide.lib.errors import (
    InvalidParameterError,
    KernelKindError,
    NonFiniteStateError,
    StabilityError,
)
from smide.lib.fields import PiecewiseAffineField, resolve_input
from smide.lib.kernels import ExponentialSeriesKernel, Kernel
from smide.lib.linalg import as_matrix, as_vector
from smide.lib.models import HistoryMode, SimConfig, Trajectory
from smide.lib.signals import Signal

logger = logging.getLogger(__name__)

VectorField = PiecewiseAffineField | Callable


class MemorySum:
    """
    Running rectangle-rule memory integral. `push(k, v)` stores
    f_tilde_k = v and returns I_k.
    """

    def __init__(self, kernel: Kernel, h: float, times: np.ndarray, mode: HistoryMode = HistoryMode.FULL):
        self.kernel = kernel
        self.h = h
        self.times = times
        n = kernel.dim
        self.values = np.zeros((len(times), n))
        self.mode = HistoryMode(mode)
        self.table = None
        if self.mode is HistoryMode.RECURRENCE:
            if not isinstance(kernel, ExponentialSeriesKernel):
                raise KernelKindError('the recurrence history mode needs an exponential-series kernel')
            self.decay = np.exp(-h * np.asarray(kernel.rates, dtype=float))
            self.coefficients = kernel.coefficient_stack
            self.z = np.zeros((len(kernel.rates), n))
        elif kernel.stationary:
            self.table = kernel.lag_table(h, len(times))

    def push(self, k: int, value: np.ndarray) -> np.ndarray:
        self.values[k] = value
        if self.mode is HistoryMode.RECURRENCE:
            current = self.z + self.h * np.einsum('rab,b->ra', self.coefficients, value)
            self.z = self.decay[:, None] * current
            return current.sum(axis=0)
        if self.table is not None:
            j = min(k + 1, len(self.table))
            window = self.values[k - j + 1 : k + 1][::-1]
            return self.h * np.einsum('jab,jb->a', self.table[:j], window)
        row = self.kernel.row(self.times[k], self.times[: k + 1])
        return self.h * np.einsum('jab,jb->a', row, self.values[: k + 1])


def memory_integrals(
    kernel: Kernel,
    times: np.ndarray,
    values: np.ndarray,
    h: float,
    mode: HistoryMode = HistoryMode.FULL,
) -> np.ndarray:
    """I_k for every grid node given the whole integrand history, shape (N+1, n)."""
    values = np.asarray(values, dtype=float).reshape(len(times), -1)
    memory = MemorySum(kernel, h, times, mode)
    return np.array([memory.push(k, v) for k, v in enumerate(values)])


class _Evaluator:
    """Evaluates f and f_tilde at a grid node under the run's selection policies."""

    def __init__(self, f: VectorField, f_tilde: VectorField, cfg: SimConfig):
        self.f = f
        self.f_tilde = f_tilde
        self.cfg = cfg
        self.closed_loop = isinstance(f, PiecewiseAffineField)
        self.shares_input = (
            self.closed_loop
            and isinstance(f_tilde, PiecewiseAffineField)
            and cfg.memory_selection is None
            and f_tilde.feedback is f.feedback
        )

    def __call__(self, t: float, x: np.ndarray):
        u = u_memory = None
        if self.closed_loop:
            u = resolve_input(self.f, t, x, self.cfg.selection_policy)
            fx = self.f.value(t, x, u)
        else:
            fx = as_vector(self.f(t, x))
        if isinstance(self.f_tilde, PiecewiseAffineField):
            if self.shares_input:
                u_memory = u
            else:
                policy = self.cfg.memory_selection or self.cfg.selection_policy
                u_memory = resolve_input(self.f_tilde, t, x, policy)
            ftx = self.f_tilde.value(t, x, u_memory)
        else:
            ftx = as_vector(self.f_tilde(t, x))
        return fx, ftx, u, u_memory


def _finish(cfg: SimConfig, times, states, inputs, memory_inputs, C) -> Trajectory:
    aux = {}
    if cfg.memory_selection is not None and memory_inputs is not None:
        aux['memory_input'] = memory_inputs
    traj = Trajectory(times=times, states=states, inputs=inputs, aux=aux, h=cfg.h)
    return traj.with_outputs(C) if C is not None else traj


def euler_ide(
    f: VectorField,
    kernel: Kernel,
    f_tilde: VectorField,
    cfg: SimConfig,
    C: np.ndarray | None = None,
) -> Trajectory:
    """
    Integrate the IDE with the explicit Euler scheme and rectangle-rule memory.

    Args:
        f (PiecewiseAffineField | callable): instantaneous field.
        kernel (Kernel): memory kernel Phi.
        f_tilde (PiecewiseAffineField | callable): memory integrand.
        cfg (SimConfig): grid, initial state and selection policies.
        C (np.ndarray, optional): output matrix; fills the y channel.

    Returns:
        Trajectory: states, applied inputs (closed loop) and outputs.

    Raises:
        NonFiniteStateError: a state component became inf or nan.
    """
    times = cfg.times
    steps = cfg.steps
    x0 = np.asarray(cfg.x0, dtype=float)
    if kernel.dim != x0.size:
        raise InvalidParameterError(f'kernel dimension {kernel.dim} does not match state dimension {x0.size}')
    evaluate = _Evaluator(f, f_tilde, cfg)
    memory = MemorySum(kernel, cfg.h, times, cfg.history_mode)

    states = np.empty((steps + 1, x0.size))
    states[0] = x0
    inputs = memory_inputs = None
    logger.debug(f'euler_ide: {steps} steps, h={cfg.h}, history={cfg.history_mode.value}')

    for k in range(steps + 1):
        t, x = times[k], states[k]
        fx, ftx, u, u_memory = evaluate(t, x)
        if u is not None:
            if inputs is None:
                inputs = np.zeros((steps + 1, u.size))
            inputs[k] = u
        if u_memory is not None:
            if memory_inputs is None:
                memory_inputs = np.zeros((steps + 1, u_memory.size))
            memory_inputs[k] = u_memory
        if k == steps:
            break
        integral = memory.push(k, ftx)
        states[k + 1] = x + cfg.h * fx + cfg.h * integral
        if not np.all(np.isfinite(states[k + 1])):
            raise NonFiniteStateError(k + 1)

    return _finish(cfg, times, states, inputs, memory_inputs, C)


class AugmentScheme(str, Enum):
    EULER = 'euler'
    EXPONENTIAL = 'exponential'


def augment_exponential(
    kernel: ExponentialSeriesKernel,
    f: VectorField,
    f_tilde: VectorField,
    cfg: SimConfig,
    scheme: AugmentScheme = AugmentScheme.EULER,
    C: np.ndarray | None = None,
) -> Trajectory:
    """
    Integrate the equivalent augmented ODE

        x' = f + sum_i z_i,   z_i' = -mu_i z_i + c_i f_tilde,   z_i(t0) = 0

    and return the x-projection.

    With `scheme='euler'` every state takes a plain explicit Euler step
    (a discretization independent of euler_ide; requires mu_i h < 2). With
    `scheme='exponential'` each z_i decays exactly over a step and absorbs
    the current integrand with weight h, which reproduces the rectangle
    memory sum for stiff series.
    """
    if not isinstance(kernel, ExponentialSeriesKernel):
        raise KernelKindError('augment_exponential needs an exponential-series kernel')
    scheme = AugmentScheme(scheme)
    h = cfg.h
    rates = np.asarray(kernel.rates, dtype=float)
    coefficients = kernel.coefficient_stack
    if scheme is AugmentScheme.EULER and rates.size and rates.max() * h >= 2.0:
        raise StabilityError(f'explicit Euler on rate {rates.max():.4g} needs h < {2.0 / rates.max():.4g}')

    times = cfg.times
    steps = cfg.steps
    x0 = np.asarray(cfg.x0, dtype=float)
    evaluate = _Evaluator(f, f_tilde, cfg)
    z = np.zeros((rates.size, x0.size))
    decay = np.exp(-h * rates)[:, None]

    states = np.empty((steps + 1, x0.size))
    states[0] = x0
    inputs = memory_inputs = None
    for k in range(steps + 1):
        t, x = times[k], states[k]
        fx, ftx, u, u_memory = evaluate(t, x)
        if u is not None:
            if inputs is None:
                inputs = np.zeros((steps + 1, u.size))
            inputs[k] = u
        if u_memory is not None:
            if memory_inputs is None:
                memory_inputs = np.zeros((steps + 1, u_memory.size))
            memory_inputs[k] = u_memory
        if k == steps:
            break
        forcing = np.einsum('rab,b->ra', coefficients, ftx)
        if scheme is AugmentScheme.EULER:
            states[k + 1] = x + h * (fx + z.sum(axis=0))
            z = z + h * (-rates[:, None] * z + forcing)
        else:
            current = z + h * forcing
            states[k + 1] = x + h * fx + h * current.sum(axis=0)
            z = decay * current
        if not np.all(np.isfinite(states[k + 1])):
            raise NonFiniteStateError(k + 1)

    return _finish(cfg, times, states, inputs, memory_inputs, C)


def low_pass_filter(u: np.ndarray, eps: float, h: float) -> np.ndarray:
    """
    First-order filter eps u_eps' = -u_eps + u discretized by explicit Euler:
    u_eps[k+1] = u_eps[k] + (h/eps)(u[k] - u_eps[k]), u_eps[0] = 0.

    Raises:
        StabilityError: h/eps > 1.
    """
    if not eps > 0.0:
        raise InvalidParameterError('filter constant must be positive')
    ratio = h / eps
    if ratio > 1.0:
        raise StabilityError(f'filter needs h/eps <= 1, got {ratio:.4g}')
    u = np.asarray(u, dtype=float)
    return lfilter([0.0, ratio], [1.0, -(1.0 - ratio)], u, axis=0)


def sliding_indicator(
    traj: Trajectory,
    kernel: Kernel,
    CB: np.ndarray,
    B_tilde: np.ndarray,
    C: np.ndarray,
    gamma: Signal,
    u_eps: np.ndarray,
    mode: HistoryMode = HistoryMode.FULL,
) -> np.ndarray:
    """
    delta_k = CB (u_eps_k + gamma(t_k)) + h sum_{i<=k} C Phi(t_k, t_i) B_tilde (u_i + gamma(t_i)),
    with the same quadrature as euler_ide. Shape (N+1, m).
    """
    if traj.inputs is None:
        raise InvalidParameterError('the trajectory carries no applied inputs')
    CB, B_tilde, C = as_matrix(CB), as_matrix(B_tilde), as_matrix(C)
    g = gamma.on_grid(traj.times)
    integrand = (traj.inputs + g) @ B_tilde.T
    integrals = memory_integrals(kernel, traj.times, integrand, traj.h, mode)
    u_eps = np.asarray(u_eps, dtype=float).reshape(len(traj.times), -1)
    return (u_eps + g) @ CB.T + integrals @ C.T

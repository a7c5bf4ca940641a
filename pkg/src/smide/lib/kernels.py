"""
Memory kernels Phi(t, tau) of integro-differential equations and the
integral bound the controller design needs.

Stationary kernels (Phi(t, tau) = phi(t - tau)) expose vectorized lag
evaluation so rectangle-rule memory sums can be computed from a
precomputed lag table.
"""

from __future__ import annotations

import logging
from abc import abstractmethod
from typing import Annotated, Callable

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, model_validator

from smide.lib.errors import InvalidParameterError, KernelDomainError
from smide.lib.linalg import as_matrix, p_induced_norms

logger = logging.getLogger(__name__)

Matrix = Annotated[np.ndarray, BeforeValidator(as_matrix)]


class Kernel(BaseModel):
    """Base class of all kernels. Kernels are immutable."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @property
    def stationary(self) -> bool:
        return False

    def support(self) -> float:
        """Length of the lag interval where the kernel may be nonzero."""
        return np.inf

    def eval(self, t: float, tau: float) -> np.ndarray:
        """Phi(t, tau), an (n, n) matrix. Only defined for t >= tau."""
        if t < tau:
            raise KernelDomainError(f'kernel queried at t={t} < tau={tau}')
        return self._eval(float(t), float(tau))

    def _eval(self, t: float, tau: float) -> np.ndarray:
        return self.row(t, np.array([tau]))[0]

    def row(self, t: float, taus: np.ndarray) -> np.ndarray:
        """Phi(t, tau_i) for every tau_i <= t, shape (len(taus), n, n)."""
        taus = np.asarray(taus, dtype=float)
        if taus.size and taus.max() > t:
            raise KernelDomainError(f'kernel row at t={t} includes tau={taus.max()}')
        return self._row(float(t), taus)

    def _row(self, t: float, taus: np.ndarray) -> np.ndarray:
        return self.lag_values(t - taus)

    def lag_values(self, lags: np.ndarray) -> np.ndarray:
        """phi(s) for every lag s >= 0, shape (len(lags), n, n)."""
        raise NotImplementedError(f'{type(self).__name__} is not stationary')

    def lag_table(self, h: float, count: int) -> np.ndarray:
        """phi(j h) for j = 0..count-1; truncated by the kernel support."""
        if self.support() < np.inf:
            count = min(count, int(np.ceil(self.support() / h)) + 1)
        return self.lag_values(h * np.arange(count))

    def scaled(self, factor: float) -> 'ScaledKernel':
        return ScaledKernel(inner=self, factor=factor)


class ZeroKernel(Kernel):
    """Phi = 0: the IDE reduces to an ODE."""

    n: int = 1

    @property
    def dim(self) -> int:
        return self.n

    @property
    def stationary(self) -> bool:
        return True

    def support(self) -> float:
        return 0.0

    def lag_values(self, lags):
        return np.zeros((np.size(lags), self.n, self.n))


class ConstantKernel(Kernel):
    """Phi(t, tau) = matrix for every t >= tau."""

    matrix: Matrix

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def stationary(self) -> bool:
        return True

    def lag_values(self, lags):
        return np.broadcast_to(self.matrix, (np.size(lags), *self.matrix.shape)).copy()


class ConvolutionKernel(Kernel):
    """
    Phi(t, tau) = phi(t - tau) for a user map phi.

    Attributes:
        n: matrix dimension.
        phi: lag -> (n, n) matrix.
        vectorized: phi accepts an array of lags and returns (L, n, n).
    """

    n: int
    phi: Callable
    vectorized: bool = False

    @property
    def dim(self) -> int:
        return self.n

    @property
    def stationary(self) -> bool:
        return True

    def lag_values(self, lags):
        lags = np.asarray(lags, dtype=float)
        if self.vectorized:
            values = np.asarray(self.phi(lags), dtype=float)
        else:
            values = np.array([as_matrix(self.phi(s)) for s in lags]).reshape(-1, self.n, self.n)
        return values.reshape(lags.size, self.n, self.n)


class DenseKernel(Kernel):
    """
    General Phi(t, tau) given as a map (t, tau) -> (n, n) matrix.

    With `vectorized=True` the map receives a scalar t and an array of taus
    and returns an (L, n, n) stack.
    """

    n: int
    fn: Callable
    vectorized: bool = False

    @property
    def dim(self) -> int:
        return self.n

    def _row(self, t, taus):
        if self.vectorized:
            return np.asarray(self.fn(t, taus), dtype=float).reshape(taus.size, self.n, self.n)
        return np.array([as_matrix(self.fn(t, tau)) for tau in taus]).reshape(
            taus.size, self.n, self.n
        )


class ExponentialSeriesKernel(Kernel):
    """
    phi(s) = sum_i c_i exp(-mu_i s) with strictly positive rates mu_i.

    An empty series is the zero kernel of dimension `n`.
    """

    n: int
    rates: list[float] = []
    matrices: list[Matrix] = []

    @model_validator(mode='after')
    def check_terms(self):
        if len(self.rates) != len(self.matrices):
            raise ValueError('one matrix per decay rate is required')
        if any(rate <= 0.0 for rate in self.rates):
            raise ValueError('decay rates must be strictly positive')
        for c in self.matrices:
            if c.shape != (self.n, self.n):
                raise ValueError(f'series matrix of shape {c.shape}, expected {(self.n, self.n)}')
        return self

    @classmethod
    def from_terms(cls, terms, n: int | None = None) -> 'ExponentialSeriesKernel':
        """Build from (rate, matrix) pairs."""
        terms = [(float(rate), as_matrix(c)) for rate, c in terms]
        if n is None:
            if not terms:
                raise InvalidParameterError('dimension needed for an empty series')
            n = terms[0][1].shape[0]
        return cls(n=n, rates=[r for r, _ in terms], matrices=[c for _, c in terms])

    @property
    def dim(self) -> int:
        return self.n

    @property
    def stationary(self) -> bool:
        return True

    @property
    def coefficient_stack(self) -> np.ndarray:
        if not self.matrices:
            return np.zeros((0, self.n, self.n))
        return np.stack(self.matrices)

    def lag_values(self, lags):
        lags = np.asarray(lags, dtype=float)
        if not self.rates:
            return np.zeros((lags.size, self.n, self.n))
        decay = np.exp(-np.outer(lags, np.asarray(self.rates)))
        return np.einsum('lr,rab->lab', decay, self.coefficient_stack)


class TruncatedKernel(Kernel):
    """Inner kernel cut to exact zero for t - tau >= delay."""

    inner: Kernel
    delay: float

    @model_validator(mode='after')
    def check_delay(self):
        if not self.delay > 0.0:
            raise ValueError('delay bound must be positive')
        return self

    @property
    def dim(self) -> int:
        return self.inner.dim

    @property
    def stationary(self) -> bool:
        return self.inner.stationary

    def support(self) -> float:
        return min(self.delay, self.inner.support())

    def _row(self, t, taus):
        values = np.array(self.inner._row(t, taus), dtype=float)
        values[(t - taus) >= self.delay] = 0.0
        return values

    def lag_values(self, lags):
        lags = np.asarray(lags, dtype=float)
        values = np.array(self.inner.lag_values(lags), dtype=float)
        values[lags >= self.delay] = 0.0
        return values

    def lag_table(self, h, count):
        # lags as j*h so the cut lands on the same index the grid does
        count = min(count, int(np.ceil(self.delay / h)) + 1)
        return self.lag_values(h * np.arange(count))


class ScaledKernel(Kernel):
    inner: Kernel
    factor: float

    @property
    def dim(self) -> int:
        return self.inner.dim

    @property
    def stationary(self) -> bool:
        return self.inner.stationary

    def support(self) -> float:
        return self.inner.support()

    def _row(self, t, taus):
        return self.factor * self.inner._row(t, taus)

    def lag_values(self, lags):
        return self.factor * self.inner.lag_values(lags)


class ProjectedKernel(Kernel):
    """left @ Phi(t, tau) @ right, e.g. the m x m kernel -(CB)^-1 C Phi B_tilde."""

    inner: Kernel
    left: Matrix
    right: Matrix

    @model_validator(mode='after')
    def check_shapes(self):
        n = self.inner.dim
        if self.left.shape[1] != n or self.right.shape[0] != n:
            raise ValueError(f'projection shapes {self.left.shape}, {self.right.shape} do not fit n={n}')
        if self.left.shape[0] != self.right.shape[1]:
            raise ValueError('projected kernel must be square')
        return self

    @property
    def dim(self) -> int:
        return self.left.shape[0]

    @property
    def stationary(self) -> bool:
        return self.inner.stationary

    def support(self) -> float:
        return self.inner.support()

    def _row(self, t, taus):
        return self.left @ self.inner._row(t, taus) @ self.right

    def lag_values(self, lags):
        return self.left @ self.inner.lag_values(lags) @ self.right

    def lag_table(self, h, count):
        return self.left @ self.inner.lag_table(h, count) @ self.right


def memory_bound(
    kernel: Kernel,
    C: np.ndarray,
    R: np.ndarray,
    P: np.ndarray,
    t0: float,
    horizon: float,
    h: float,
) -> float:
    """
    Sup over grid times t_k of the rectangle-rule quadrature
    h * sum_{i<=k} ||C Phi(t_k, t_i) R||_P.

    Args:
        kernel (Kernel): memory kernel of dimension n.
        C (np.ndarray): (k, n) output matrix.
        R (np.ndarray): (n, m) input map, usually B_tilde (CB)^-1.
        P (np.ndarray): (m, m) SPD weight.
        t0 (float): initial time.
        horizon (float): length of the sampled interval.
        h (float): step.

    Returns:
        float: the bound M (0 for the zero kernel).
    """
    if not h > 0.0:
        raise InvalidParameterError('step h must be positive')
    C, R = as_matrix(C, 'C'), as_matrix(R, 'R')
    steps = int(np.floor(horizon / h + 1e-9))
    if kernel.stationary:
        table = kernel.lag_table(h, steps + 1)
        norms = p_induced_norms(C @ table @ R, P) if len(table) else np.zeros(0)
        # the running sum is nondecreasing, so its sup is the full sum
        bound = h * float(np.sum(norms))
    else:
        times = t0 + h * np.arange(steps + 1)
        bound = 0.0
        for k, t in enumerate(times):
            norms = p_induced_norms(C @ kernel.row(t, times[: k + 1]) @ R, P)
            bound = max(bound, h * float(np.sum(norms)))
    logger.debug(f'memory bound M={bound:.6g} over {steps} steps (h={h})')
    return bound

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, model_validator

from smide.lib.kernels import Kernel, Matrix, ZeroKernel
from smide.lib.linalg import is_invertible
from smide.lib.signals import ConstantSignal, Signal


class LinearIdePlant(BaseModel):
    """
    x' = A x + B (u + gamma) + p + int_{t0}^t Phi(t, tau) B_tilde (u + gamma) dtau,
    y = C x, with square CB.

    `gamma_bar` and `p_bar` are the bounds the design uses; `gamma` and `p`
    are the signals a simulation uses (defaults: zero).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    A: Matrix
    B: Matrix
    B_tilde: Matrix
    C: Matrix
    kernel: Kernel
    gamma_bar: float = 0.0
    p_bar: float = 0.0
    gamma: Signal | None = None
    p: Signal | None = None

    @model_validator(mode='after')
    def check_dimensions(self):
        n = self.A.shape[0]
        m = self.B.shape[1]
        if self.A.shape != (n, n):
            raise ValueError('A must be square')
        if self.B.shape[0] != n or self.B_tilde.shape != self.B.shape:
            raise ValueError('B and B_tilde must both be n x m')
        if self.C.shape != (m, n):
            raise ValueError(f'C must be {m} x {n}')
        if self.kernel.dim != n:
            raise ValueError(f'kernel dimension {self.kernel.dim} does not match n={n}')
        if self.gamma_bar < 0.0 or self.p_bar < 0.0:
            raise ValueError('perturbation bounds must be nonnegative')
        if not is_invertible(self.C @ self.B):
            raise ValueError('CB must be nonsingular')
        return self

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def CB(self) -> np.ndarray:
        return self.C @ self.B

    def gamma_signal(self) -> Signal:
        return self.gamma if self.gamma is not None else ConstantSignal(value=[0.0] * self.m)

    def p_signal(self) -> Signal:
        return self.p if self.p is not None else ConstantSignal(value=[0.0] * self.n)

    def without_memory(self) -> 'LinearIdePlant':
        """The same plant with Phi = 0 (the ODE comparison)."""
        return self.model_copy(update={'kernel': ZeroKernel(n=self.n)})


class DesignResult(BaseModel):
    """
    Outcome of the sliding-mode design. `rho` is None when the design is
    infeasible and no override was given; `rho_source` records whether
    the gain came from the closed form or a user override.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    Lambda: np.ndarray | None = None
    P: np.ndarray | None = None
    M: float | None = None
    rho: float | None = None
    rho_source: str = 'formula'
    delta: float
    T_max: float | None = None
    feasible: bool
    diagnostics: list[str] = Field(default_factory=list)

    @field_serializer('Lambda', 'P')
    def matrix_to_list(self, value):
        return None if value is None else np.asarray(value).tolist()

    def summary(self) -> str:
        lines = [f'feasible: {self.feasible}']
        for name in ('M', 'rho', 'delta', 'T_max'):
            value = getattr(self, name)
            lines.append(f'{name}: {"n/a" if value is None else f"{value:.6g}"}')
        lines.append(f'rho source: {self.rho_source}')
        lines.extend(f'note: {d}' for d in self.diagnostics)
        return '\n'.join(lines)

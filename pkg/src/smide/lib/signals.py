"""
Closed-form time signals used as perturbations (gamma), mismatched
forcing (p) and gain schedules. Every signal evaluates at a scalar time
or on a whole grid and reports a sup bound.
"""

from __future__ import annotations

from abc import abstractmethod
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _as_list(value) -> list[float]:
    if isinstance(value, (int, float)):
        return [float(value)]
    return [float(v) for v in value]


class Signal(BaseModel):
    """Base class: a vector-valued function of time."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @abstractmethod
    def on_grid(self, times: np.ndarray) -> np.ndarray:
        """Values on a time grid, shape (len(times), dim)."""

    def __call__(self, t: float) -> np.ndarray:
        return self.on_grid(np.array([float(t)]))[0]

    @abstractmethod
    def sup_bound(self) -> float:
        """An upper bound of the Euclidean norm over all times."""


class ConstantSignal(Signal):
    kind: Literal['constant'] = 'constant'
    value: list[float] = Field(default_factory=lambda: [0.0])

    @field_validator('value', mode='before')
    @classmethod
    def coerce_list(cls, v):
        return _as_list(v)

    @property
    def dim(self) -> int:
        return len(self.value)

    def on_grid(self, times):
        times = np.asarray(times, dtype=float)
        return np.broadcast_to(np.asarray(self.value), (times.size, self.dim)).copy()

    def sup_bound(self) -> float:
        return float(np.linalg.norm(self.value))


class _Harmonic(Signal):
    amplitude: list[float] = Field(default_factory=lambda: [1.0])
    omega: float = 1.0
    phase: float = 0.0

    @field_validator('amplitude', mode='before')
    @classmethod
    def coerce_list(cls, v):
        return _as_list(v)

    @property
    def dim(self) -> int:
        return len(self.amplitude)

    @abstractmethod
    def _wave(self, arg: np.ndarray) -> np.ndarray: ...

    def on_grid(self, times):
        times = np.asarray(times, dtype=float)
        wave = self._wave(self.omega * times + self.phase)
        return wave[:, None] * np.asarray(self.amplitude)[None, :]

    def sup_bound(self) -> float:
        return float(np.linalg.norm(self.amplitude))


class CosineSignal(_Harmonic):
    """amplitude * cos(omega t + phase); the 0.5 cos 2t perturbation."""

    kind: Literal['cosine'] = 'cosine'

    def _wave(self, arg):
        return np.cos(arg)


class SineSignal(_Harmonic):
    kind: Literal['sine'] = 'sine'

    def _wave(self, arg):
        return np.sin(arg)


class TableSignal(Signal):
    """Piecewise-constant lookup: the value of the last breakpoint <= t."""

    kind: Literal['table'] = 'table'
    times: list[float]
    values: list[list[float]]

    @field_validator('values', mode='before')
    @classmethod
    def coerce_rows(cls, v):
        return [_as_list(row) for row in v]

    @model_validator(mode='after')
    def check_shape(self):
        if not self.times or len(self.times) != len(self.values):
            raise ValueError('table needs one value row per breakpoint')
        if any(b <= a for a, b in zip(self.times, self.times[1:], strict=False)):
            raise ValueError('table breakpoints must be increasing')
        if len({len(row) for row in self.values}) != 1:
            raise ValueError('table rows must share one dimension')
        return self

    @property
    def dim(self) -> int:
        return len(self.values[0])

    def on_grid(self, times):
        times = np.asarray(times, dtype=float)
        index = np.searchsorted(np.asarray(self.times), times, side='right') - 1
        index = np.clip(index, 0, len(self.times) - 1)
        return np.asarray(self.values)[index]

    def sup_bound(self) -> float:
        return float(np.linalg.norm(self.values, axis=1).max())


class ExponentialSumSignal(Signal):
    """sum_i w_i exp(-mu_i (t - origin)); the modal forcing p of the heat loop."""

    kind: Literal['exponential_sum'] = 'exponential_sum'
    rates: list[float]
    weights: list[float]
    origin: float = 0.0

    @model_validator(mode='after')
    def check_lengths(self):
        if len(self.rates) != len(self.weights):
            raise ValueError('rates and weights must have the same length')
        if any(r < 0 for r in self.rates):
            raise ValueError('rates must be nonnegative')
        return self

    @property
    def dim(self) -> int:
        return 1

    def on_grid(self, times):
        lag = np.asarray(times, dtype=float) - self.origin
        if not self.rates:
            return np.zeros((lag.size, 1))
        decay = np.exp(-np.outer(lag, np.asarray(self.rates)))
        return (decay @ np.asarray(self.weights))[:, None]

    def sup_bound(self) -> float:
        return float(np.abs(self.weights).sum())


class SumSignal(Signal):
    kind: Literal['sum'] = 'sum'
    terms: list['SignalSpec']

    @model_validator(mode='after')
    def check_dims(self):
        if not self.terms:
            raise ValueError('a sum needs at least one term')
        if len({term.dim for term in self.terms}) != 1:
            raise ValueError('summed signals must share one dimension')
        return self

    @property
    def dim(self) -> int:
        return self.terms[0].dim

    def on_grid(self, times):
        return sum(term.on_grid(times) for term in self.terms)

    def sup_bound(self) -> float:
        return float(sum(term.sup_bound() for term in self.terms))


SignalSpec = Annotated[
    Union[
        ConstantSignal,
        CosineSignal,
        SineSignal,
        TableSignal,
        ExponentialSumSignal,
        SumSignal,
    ],
    Field(discriminator='kind'),
]
SumSignal.model_rebuild()


def zero(dim: int = 1) -> ConstantSignal:
    return ConstantSignal(value=[0.0] * dim)


def grid_sup(signal: Signal, times: np.ndarray) -> float:
    """Largest Euclidean norm of the signal over the grid."""
    values = signal.on_grid(times)
    return float(np.linalg.norm(values, axis=1).max()) if values.size else 0.0

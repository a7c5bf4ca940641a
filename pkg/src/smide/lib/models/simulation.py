from __future__ import annotations

from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from smide.lib.fields import PointwiseSelection, SelectionPolicy

MAX_STEPS = 50_000_000


class HistoryMode(str, Enum):
    FULL = 'full'
    RECURRENCE = 'recurrence'


class SimConfig(BaseModel):
    """
    Time grid and policies of one explicit-Euler run.

    `memory_selection`, when set, picks the input used inside the memory
    integrand independently of `selection_policy` (second-kind coupling);
    otherwise the memory integrand sees the same input as the
    instantaneous field.
    """

    model_config = ConfigDict(frozen=True, extra='forbid')

    t0: float = 0.0
    horizon: float
    h: float
    x0: list[float]
    selection_policy: SelectionPolicy = Field(default_factory=PointwiseSelection)
    memory_selection: SelectionPolicy | None = None
    history_mode: HistoryMode = HistoryMode.FULL

    @field_validator('x0', mode='before')
    @classmethod
    def coerce_x0(cls, v):
        return [float(c) for c in np.atleast_1d(v)]

    @model_validator(mode='after')
    def check_grid(self):
        if not self.h > 0.0:
            raise ValueError('step h must be positive')
        if not self.horizon > 0.0:
            raise ValueError('horizon must be positive')
        if self.steps > MAX_STEPS:
            raise ValueError(f'{self.steps} steps exceed the supported {MAX_STEPS}')
        return self

    @property
    def steps(self) -> int:
        """floor(horizon / h), guarded against representation error."""
        return int(np.floor(self.horizon / self.h + 1e-9))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.steps + 1)

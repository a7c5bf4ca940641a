from __future__ import annotations

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from smide.lib.linalg import as_matrix


def _columns(values: np.ndarray | None) -> np.ndarray | None:
    if values is None:
        return None
    values = np.asarray(values, dtype=float)
    return values[:, None] if values.ndim == 1 else values


class Trajectory(BaseModel):
    """
    Simulation result on the uniform grid t0 + k h.

    Attributes:
        times: (N+1,) grid.
        states: (N+1, n) states, states[0] = x0.
        inputs: (N+1, m) applied inputs, if the field was closed-loop.
        outputs: (N+1, k) outputs y = C x, if requested.
        aux: named (N+1,) or (N+1, d) channels (filtered input, indicator, ...).
        h: step.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray | None = None
    outputs: np.ndarray | None = None
    aux: dict[str, np.ndarray] = {}
    h: float

    @model_validator(mode='after')
    def check_lengths(self):
        size = len(self.times)
        channels = [self.states, self.inputs, self.outputs, *self.aux.values()]
        for channel in channels:
            if channel is not None and len(channel) != size:
                raise ValueError('all trajectory channels must share the grid length')
        return self

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    def with_outputs(self, C) -> 'Trajectory':
        return self.model_copy(update={'outputs': self.states @ as_matrix(C).T})

    def with_aux(self, **channels: np.ndarray) -> 'Trajectory':
        aux = dict(self.aux)
        for name, values in channels.items():
            values = np.asarray(values, dtype=float)
            if len(values) != len(self.times):
                raise ValueError(f'aux channel {name!r} has the wrong length')
            aux[name] = values
        return self.model_copy(update={'aux': aux})

    def index_at(self, t: float) -> int:
        """Index of the first grid node with time >= t (clipped to the grid)."""
        k = int(np.ceil((t - self.t0) / self.h - 1e-9))
        return min(max(k, 0), self.steps)

    def to_frame(self) -> pd.DataFrame:
        """Columns t, x_1.., y_1.., u_1.., then aux channels."""
        data = {'t': self.times}
        for prefix, values in (('x', self.states), ('y', self.outputs), ('u', self.inputs)):
            values = _columns(values)
            if values is not None:
                for j in range(values.shape[1]):
                    data[f'{prefix}_{j + 1}'] = values[:, j]
        for name, values in self.aux.items():
            values = _columns(values)
            if values.shape[1] == 1:
                data[name] = values[:, 0]
            else:
                for j in range(values.shape[1]):
                    data[f'{name}_{j + 1}'] = values[:, j]
        return pd.DataFrame(data)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> 'Trajectory':
        times = frame['t'].to_numpy(dtype=float)

        def block(prefix: str) -> np.ndarray | None:
            cols = sorted(
                (c for c in frame.columns if c.startswith(f'{prefix}_') and c[2:].isdigit()),
                key=lambda c: int(c[2:]),
            )
            return frame[cols].to_numpy(dtype=float) if cols else None

        known = {'t'} | {c for c in frame.columns if c[:2] in ('x_', 'y_', 'u_') and c[2:].isdigit()}
        aux = {c: frame[c].to_numpy(dtype=float) for c in frame.columns if c not in known}
        h = float(times[1] - times[0]) if len(times) > 1 else 0.0
        return cls(times=times, states=block('x'), outputs=block('y'), inputs=block('u'), aux=aux, h=h)

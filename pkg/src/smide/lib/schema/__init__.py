"""
Config-file schema. A config is TOML with one table per concern
([simulation], [kernel], [plant], [design], [signals.gamma], ...);
every table is validated by a pydantic model that rejects unknown keys.
"""

from __future__ import annotations

import tomllib
from pathlib import Path
from typing import Literal, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from smide.lib.errors import ConfigError
from smide.lib.kernels import (
    ConstantKernel,
    ExponentialSeriesKernel,
    Kernel,
    TruncatedKernel,
    ZeroKernel,
)
from smide.lib.models import LinearIdePlant, SimConfig
from smide.lib.signals import SignalSpec

Params = TypeVar('Params', bound=BaseModel)


class Section(BaseModel):
    model_config = ConfigDict(extra='forbid')


class SimulationSection(Section):
    t0: float = 0.0
    h: float
    horizon: float
    x0: list[float]

    def sim_config(self, **policies) -> SimConfig:
        return SimConfig(t0=self.t0, h=self.h, horizon=self.horizon, x0=self.x0, **policies)


class KernelSection(Section):
    """
    kind = 'zero' | 'constant' (phi = matrix) | 'exponential' (rates, matrices),
    optionally cut to zero beyond `delay` and multiplied by `scale`.
    """

    kind: Literal['zero', 'constant', 'exponential'] = 'zero'
    matrix: list[list[float]] | None = None
    rates: list[float] = Field(default_factory=list)
    matrices: list[list[list[float]]] = Field(default_factory=list)
    delay: float | None = None
    scale: float = 1.0

    def build(self, n: int) -> Kernel:
        if self.kind == 'zero':
            return ZeroKernel(n=n)
        if self.kind == 'constant':
            if self.matrix is None:
                raise ConfigError('a constant kernel needs `matrix`')
            kernel: Kernel = ConstantKernel(matrix=self.matrix)
        else:
            kernel = ExponentialSeriesKernel(n=n, rates=self.rates, matrices=self.matrices)
        if self.delay is not None:
            kernel = TruncatedKernel(inner=kernel, delay=self.delay)
        if self.scale != 1.0:
            kernel = kernel.scaled(self.scale)
        return kernel


class PlantSection(Section):
    """Plant matrices; B_tilde defaults to B, the bounds to the signals' sup bounds."""

    A: list[list[float]]
    B: list[list[float]]
    B_tilde: list[list[float]] | None = None
    C: list[list[float]]
    gamma_bar: float | None = None
    p_bar: float | None = None


class DesignSection(Section):
    delta: float = 0.1
    rho: float | None = None
    P: list[list[float]] | None = None


class SignalsSection(Section):
    gamma: SignalSpec | None = None
    p: SignalSpec | None = None


class PlantConfig(Section):
    """A declared plant for `smide design --config`."""

    plant: PlantSection
    kernel: KernelSection = Field(default_factory=KernelSection)
    signals: SignalsSection = Field(default_factory=SignalsSection)
    design: DesignSection = Field(default_factory=DesignSection)
    simulation: SimulationSection

    def build_plant(self) -> LinearIdePlant:
        return build_plant(self.plant, self.kernel, self.signals)


def build_plant(plant: PlantSection, kernel: KernelSection, signals: SignalsSection) -> LinearIdePlant:
    gamma, p = signals.gamma, signals.p
    gamma_bar = plant.gamma_bar if plant.gamma_bar is not None else (gamma.sup_bound() if gamma else 0.0)
    p_bar = plant.p_bar if plant.p_bar is not None else (p.sup_bound() if p else 0.0)
    try:
        return LinearIdePlant(
            A=plant.A,
            B=plant.B,
            B_tilde=plant.B_tilde if plant.B_tilde is not None else plant.B,
            C=plant.C,
            kernel=kernel.build(len(plant.A)),
            gamma_bar=gamma_bar,
            p_bar=p_bar,
            gamma=gamma,
            p=p,
        )
    except ValidationError as e:
        raise ConfigError(f'invalid plant: {e}') from e


def read_toml(path: Path) -> dict:
    path = Path(path)
    try:
        with path.open('rb') as f:
            return tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f'config file {path} does not exist') from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f'{path} is not valid TOML: {e}') from e


def load_config(path: Path, model: type[Params], data: dict | None = None) -> Params:
    """Validate a TOML file (or its already-read `data`) against `model`."""
    if data is None:
        data = read_toml(path)
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f'{path}: {e}') from e


def parse_override(text: str) -> tuple[list[str], object]:
    """Split 'section.key=value'; the value is read as a TOML value, else kept as a string."""
    if '=' not in text:
        raise ConfigError(f'override {text!r} is not of the form section.key=value')
    key, raw = (part.strip() for part in text.split('=', 1))
    if not key:
        raise ConfigError(f'override {text!r} names no key')
    try:
        value = tomllib.loads(f'value = {raw}')['value']
    except tomllib.TOMLDecodeError:
        value = raw
    return key.split('.'), value


def apply_overrides(params: Params, overrides: list[str]) -> Params:
    """
    Re-validate `params` with single-value overrides applied.

    Raises:
        ConfigError: an override names a missing key or gives an invalid value.
    """
    if not overrides:
        return params
    data = params.model_dump()
    for text in overrides:
        path, value = parse_override(text)
        node = data
        for part in path[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f'unknown config key {".".join(path)!r}')
            node = node[part]
        if not isinstance(node, dict) or path[-1] not in node:
            raise ConfigError(f'unknown config key {".".join(path)!r}')
        node[path[-1]] = value
    try:
        return type(params).model_validate(data)
    except ValidationError as e:
        raise ConfigError(f'invalid override: {e}') from e

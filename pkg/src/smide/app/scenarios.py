"""
Registry of the worked examples as runnable scenarios.

A scenario owns a pydantic parameter model (every field can be overridden
with `section.key=value`), a simulation that returns named trajectories
('trajectory' is always the main run) and an evaluation that turns
trajectories back into named pass/fail checks. The evaluation reads only
parameters and trajectories, so `check_directory` can repeat it on the
CSVs a previous run stored.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Annotated, Any, Callable, Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from tqdm import tqdm

from smide.lib import io
from smide.lib.design import (
    bounded_delay_stability,
    closed_loop_fields,
    design,
    projector,
    sliding_mode_matrix,
    smc_feedback,
)
from smide.lib.equivalent import (
    Rule,
    build_sliding_volterra,
    detect_reaching_time,
    direct_volterra_solve,
    neumann_solve,
    sliding_residual,
)
from smide.lib.errors import (
    ConditionViolatedError,
    ConfigError,
    InfeasibleDesignError,
    NotInSlidingError,
    SmideError,
    UnknownScenarioError,
)
from smide.lib.fields import (
    EquivalentSelection,
    InputSelection,
    PiecewiseAffineField,
    RelayLaw,
    SlidingKind,
    SwitchingSurface,
    SwitchKind,
    first_kind_in_second_kind,
    sliding_status,
    switching_status,
    utkin_sets,
)
from smide.lib.heat import (
    REPORTED_CONSTANTS,
    REPORTED_RTOL,
    HeatConfig,
    check_shift_condition,
    compare_with_reported,
    decay_margin,
    heat_constants,
    heat_equivalent_control,
    heat_gain,
    heat_io_gain,
    heat_io_kernel,
    heat_modes,
    heat_plant,
    heat_relay,
    l2_bound,
    profile,
    reconstruction_frame,
    reduction_error_bound,
    replay_reduced,
    simulate_heat,
)
from smide.lib.integrator import euler_ide, low_pass_filter, sliding_indicator
from smide.lib.kernels import ConstantKernel, DenseKernel, ZeroKernel
from smide.lib.linalg import spectral_norm
from smide.lib.models import (
    Check,
    CheckReport,
    DesignResult,
    HistoryMode,
    LinearIdePlant,
    SimConfig,
    Trajectory,
)
from smide.lib.schema import (
    DesignSection,
    KernelSection,
    PlantConfig,
    PlantSection,
    Section,
    SignalsSection,
    SimulationSection,
    apply_overrides,
    build_plant,
    load_config,
    read_toml,
)
from smide.lib.signals import CosineSignal, SineSignal, zero

logger = logging.getLogger(__name__)

EMITS = ('trajectory', 'design', 'indicator', 'reconstruction')
RUN_CONFIG = 'run_config.json'

Trajectories = dict[str, Trajectory]
Evaluation = tuple[list[Check], list[str]]


class Scenario(BaseModel):
    """
    A runnable example with machine-checkable expected outcomes.

    Attributes:
        name: registry key.
        description: one line for `smide list`.
        provenance: where the system and its expected behavior come from.
        params_model: parameter model; its defaults are the reference run.
        simulate: params -> named trajectories.
        evaluate: (params, trajectories) -> (checks, notes).
        design: optional params -> DesignResult, used by `smide design --plant`.
        frames: optional (params, trajectories) -> extra plot-ready tables.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    description: str
    provenance: str
    params_model: type[BaseModel]
    simulate: Callable[[Any], Trajectories]
    evaluate: Callable[[Any, Trajectories], Evaluation]
    design: Callable[[Any], DesignResult] | None = None
    frames: Callable[[Any, Trajectories], dict[str, pd.DataFrame]] | None = None

    def params(self, overrides=()) -> BaseModel:
        return apply_overrides(self.params_model(), list(overrides))


class ScenarioRun(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    scenario: str
    params: BaseModel
    trajectories: dict[str, Trajectory]
    report: CheckReport
    design: DesignResult | None = None
    directory: Path | None = None


# helpers


def _zero_memory(n: int) -> Callable:
    zeros = np.zeros(n)
    return lambda t, x: zeros


def _first_index(mask) -> int | None:
    hits = np.flatnonzero(mask)
    return int(hits[0]) if hits.size else None


def _sup(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.abs(values).max()) if values.size else 0.0


def _aux(traj: Trajectory, name: str) -> np.ndarray | None:
    """An aux channel as an (N+1, d) array, also when stored as name_1, name_2, ..."""
    if name in traj.aux:
        return np.asarray(traj.aux[name], dtype=float).reshape(len(traj.times), -1)
    prefix = f'{name}_'
    columns = sorted(
        (key for key in traj.aux if key.startswith(prefix) and key[len(prefix) :].isdigit()),
        key=lambda key: int(key[len(prefix) :]),
    )
    if not columns:
        return None
    return np.column_stack([traj.aux[key] for key in columns])


def _padded(values, start: int, size: int) -> np.ndarray:
    """Values known from index `start` on, NaN before."""
    values = np.asarray(values, dtype=float).reshape(size - start, -1)
    out = np.full((size, values.shape[1]), np.nan)
    out[start:] = values
    return out


def _p_norms(values: np.ndarray, P: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(np.einsum('ki,ij,kj->k', values, P, values), 0.0))


def _relay_field(A, B, C, gain) -> PiecewiseAffineField:
    """x' = A x + B u, u = -(CB)^-1 C A x + gain sign(C x)."""
    A, B, C = (np.asarray(M, dtype=float) for M in (A, B, C))
    K = np.linalg.solve(C @ B, C @ A)
    law = RelayLaw(gain=gain, surface=SwitchingSurface.linear(C), nominal=lambda t, x: -K @ x)
    return PiecewiseAffineField(a=lambda t, x: A @ x, b=lambda t, x: B, feedback=law)


class ControlSection(Section):
    rho: float = Field(default=1.0, gt=0.0)


class LinearPlantSection(Section):
    A: list[list[float]]
    B: list[list[float]]
    C: list[list[float]]


# relay-scalar: x' = u + gamma, u = -rho sign(x)


class RelayScalarParams(Section):
    simulation: SimulationSection = Field(
        default_factory=lambda: SimulationSection(h=1e-3, horizon=3.0, x0=[1.0])
    )
    control: ControlSection = Field(default_factory=ControlSection)
    signals: SignalsSection = Field(
        default_factory=lambda: SignalsSection(gamma=SineSignal(amplitude=[0.5], omega=3.0))
    )


def _scalar_relay_field(params: RelayScalarParams) -> PiecewiseAffineField:
    gamma = params.signals.gamma or zero(1)
    law = RelayLaw(gain=[[-params.control.rho]], surface=SwitchingSurface.linear([[1.0]]))
    one = np.eye(1)
    return PiecewiseAffineField(a=lambda t, x: gamma(t), b=lambda t, x: one, feedback=law)


def simulate_relay_scalar(params: RelayScalarParams) -> Trajectories:
    field = _scalar_relay_field(params)
    cfg = params.simulation.sim_config()
    return {'trajectory': euler_ide(field, ZeroKernel(n=1), _zero_memory(1), cfg, C=[[1.0]])}


def evaluate_relay_scalar(params: RelayScalarParams, trajs: Trajectories) -> Evaluation:
    traj = trajs['trajectory']
    h = traj.h
    x = np.abs(traj.states[:, 0])
    rho = params.control.rho
    gamma_bar = params.signals.gamma.sup_bound() if params.signals.gamma else 0.0
    checks = [Check.holds('gain dominates the perturbation', rho > gamma_bar, f'rho={rho:g}, sup|gamma|={gamma_bar:g}')]
    if rho <= gamma_bar:
        return checks, []

    # one step moves x by at most (rho + sup|gamma|) h
    entry = (rho + gamma_bar) * h
    k = _first_index(x <= entry)
    checks.append(Check.holds('state reaches the surface', k is not None))
    if k is None:
        return checks, []
    T = float(traj.times[k] - traj.t0)
    rate = rho - gamma_bar
    checks.append(Check.at_most('reaching time', T, x[0] / rate + h, '|x0| / (rho - sup|gamma|)'))
    slopes = np.diff(x[: k + 1]) / h
    worst = float(slopes.max()) if slopes.size else -rate
    checks.append(Check.at_most('d|x|/dt before reaching', worst, -rate + 1e-9))
    checks.append(Check.at_most('|x| after reaching', x[k:].max(), 1.01 * entry, 'O(h) band'))
    return checks, [f'reaching time {T:.4f}']


# relay-linear-ex2: u = -(CB)^-1 C A x - rho (CB)^-1 sign(C x)

EX2_A = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [2.0, -1.0, 1.0]]
EX2_B = [[0.0], [0.0], [1.0]]
EX2_C = [[2.0, 3.0, 1.0]]


class SlidingSection(Section):
    window: float = Field(default=1.0, gt=0.0)


class RelayLinearParams(Section):
    simulation: SimulationSection = Field(
        default_factory=lambda: SimulationSection(h=1e-3, horizon=3.0, x0=[1.0, 0.0, 0.0])
    )
    plant: LinearPlantSection = Field(
        default_factory=lambda: LinearPlantSection(A=EX2_A, B=EX2_B, C=EX2_C)
    )
    control: ControlSection = Field(default_factory=lambda: ControlSection(rho=2.0))
    sliding: SlidingSection = Field(default_factory=SlidingSection)


def _ex2_field(params: RelayLinearParams) -> PiecewiseAffineField:
    plant = params.plant
    CB = np.asarray(plant.C) @ np.asarray(plant.B)
    return _relay_field(plant.A, plant.B, plant.C, -params.control.rho * np.linalg.inv(CB))


def _ex2_reaching_index(traj: Trajectory, rho: float) -> int | None:
    # sigma moves on the lattice sigma_0 - k rho h
    return _first_index(np.abs(traj.outputs).max(axis=1) < 0.5 * rho * traj.h)


def simulate_relay_linear(params: RelayLinearParams) -> Trajectories:
    plant = params.plant
    n = len(plant.A)
    field = _ex2_field(params)
    traj = euler_ide(field, ZeroKernel(n=n), _zero_memory(n), params.simulation.sim_config(), C=plant.C)
    trajs = {'trajectory': traj}
    k = _ex2_reaching_index(traj, params.control.rho)
    if k is None:
        logger.warning('relay-linear-ex2: the sliding variable never reached zero, no sliding reference')
        return trajs
    A_s = sliding_mode_matrix(plant.A, plant.B, plant.C)
    cfg = SimConfig(t0=traj.times[k], h=traj.h, horizon=params.sliding.window, x0=traj.states[k])
    trajs['sliding_reference'] = euler_ide(lambda t, x: A_s @ x, ZeroKernel(n=n), _zero_memory(n), cfg)
    return trajs


def evaluate_relay_linear(params: RelayLinearParams, trajs: Trajectories) -> Evaluation:
    traj = trajs['trajectory']
    plant = params.plant
    rho, h = params.control.rho, traj.h
    notes = []
    sigma0 = np.asarray(plant.C) @ traj.states[0]
    expected = float(np.abs(sigma0).max()) / rho
    k = _ex2_reaching_index(traj, rho)
    checks = [Check.holds('sliding variable reaches zero', k is not None)]
    if k is None:
        return checks, notes
    T = float(traj.times[k] - traj.t0)
    checks.append(Check.at_most('|T - |C x0| / rho|', abs(T - expected), 2.0 * h, f'T = {T:.4f}'))
    checks.append(Check.at_most('|C x| after reaching', _sup(traj.outputs[k:]), rho * h * (1.0 + 1e-9)))

    field = _ex2_field(params)
    x_T = projector(plant.B, plant.C) @ traj.states[k]
    status = sliding_status(field, traj.times[k], x_T)
    checks.append(
        Check.holds('sliding at the projected reaching point', status.kind is SlidingKind.SLIDING, f'margin {status.margin:.3g}')
    )
    if status.f0 is not None:
        A_s = sliding_mode_matrix(plant.A, plant.B, plant.C)
        error = float(np.linalg.norm(status.f0 - A_s @ x_T))
        checks.append(Check.at_most('|f0 - (A - B(CB)^-1 CA) x|', error, 1e-9 * (1.0 + np.linalg.norm(x_T))))

    reference = trajs.get('sliding_reference')
    if reference is None:
        notes.append('no sliding reference stored; sliding dynamics not compared')
        return checks, notes
    start = traj.index_at(reference.t0)
    count = min(len(reference.times), len(traj.times) - start)
    error = _sup(traj.states[start : start + count] - reference.states[:count])
    checks.append(Check.at_most('sup |x - x_sliding| after reaching', error, 100.0 * h))
    return checks, notes


# switching-ex3: m = 2 relay with rotated gain, switching off the origin

EX3_A = [[0.0, 1.0, 0.0], [-1.0, 0.0, 1.0], [0.0, 1.0, -1.0]]
EX3_B = [[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]
EX3_C = [[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]
ROTATION = [[-1.0, 2.0], [-2.0, -1.0]]
BAND_STEPS = 36.0


class SwitchingParams(Section):
    simulation: SimulationSection = Field(
        default_factory=lambda: SimulationSection(h=1e-3, horizon=2.0, x0=[1.0, 0.5, -0.3])
    )
    plant: LinearPlantSection = Field(
        default_factory=lambda: LinearPlantSection(A=EX3_A, B=EX3_B, C=EX3_C)
    )
    control: ControlSection = Field(default_factory=ControlSection)
    rotation: list[list[float]] = Field(default_factory=lambda: [row[:] for row in ROTATION])


def _ex3_field(params: SwitchingParams) -> PiecewiseAffineField:
    plant = params.plant
    CB = np.asarray(plant.C) @ np.asarray(plant.B)
    gain = params.control.rho * np.linalg.solve(CB, np.asarray(params.rotation))
    return _relay_field(plant.A, plant.B, plant.C, gain)


def simulate_switching(params: SwitchingParams) -> Trajectories:
    n = len(params.plant.A)
    field = _ex3_field(params)
    cfg = params.simulation.sim_config()
    return {'trajectory': euler_ide(field, ZeroKernel(n=n), _zero_memory(n), cfg, C=params.plant.C)}


def evaluate_switching(params: SwitchingParams, trajs: Trajectories) -> Evaluation:
    traj = trajs['trajectory']
    rho, h = params.control.rho, traj.h
    field = _ex3_field(params)
    C = np.asarray(params.plant.C)
    sigma = traj.outputs
    V = np.abs(sigma).sum(axis=1)
    # ||sigma||_1 decreases at 2 rho while no component switches
    bound = float(V[0]) / (2.0 * rho)
    band = BAND_STEPS * rho * h

    x_switch = np.linalg.pinv(C) @ np.array([0.0, 1.0])
    kind, plus, minus = switching_status(field, traj.t0, x_switch, component=0)
    checks = [
        Check.holds('crossing where sigma_1 = 0, sigma_2 != 0', kind is SwitchKind.CROSSING, f'normal velocities {plus:.3g}, {minus:.3g}')
    ]
    origin = sliding_status(field, traj.t0, np.zeros(C.shape[1]))
    checks.append(Check.holds('sliding at the origin', origin.kind is SlidingKind.SLIDING, f'margin {origin.margin:.3g}'))

    unchanged = np.all(np.sign(sigma[1:]) == np.sign(sigma[:-1]), axis=1) & np.all(sigma[:-1] != 0.0, axis=1)
    if unchanged.any():
        rates = np.diff(V)[unchanged] / h
        checks.append(Check.at_most('d||sigma||_1/dt between switchings', rates.max(), -2.0 * rho + 1e-6))

    k = _first_index(V <= band)
    checks.append(Check.holds('sigma reaches the origin band', k is not None))
    if k is None:
        return checks, []
    T = float(traj.times[k] - traj.t0)
    checks.append(Check.at_most('reaching time', T, bound + 0.05, f'||sigma_0||_1 / (2 rho) = {bound:.4f}'))
    after = traj.index_at(traj.t0 + bound + 0.1)
    if after < traj.steps:
        checks.append(Check.at_most('||sigma||_1 after reaching', V[after:].max(), band))
    return checks, [f'reaching time {T:.4f}']


# nonunique-ex5: x1' = u, x2' = int sin(t + tau) u dtau, u = -sign(x1)


class SelectionSection(Section):
    q: list[Annotated[float, Field(ge=-1.0, le=1.0)]] = Field(default_factory=lambda: [1.0, -1.0])
    tolerance: float = Field(default=1e-3, gt=0.0)


class NonuniqueParams(Section):
    simulation: SimulationSection = Field(
        default_factory=lambda: SimulationSection(h=2.5e-4, horizon=2.5, x0=[0.0, 0.0])
    )
    selections: SelectionSection = Field(default_factory=SelectionSection)


def _ex5_kernel(t, taus):
    taus = np.asarray(taus, dtype=float)
    values = np.zeros((taus.size, 2, 2))
    values[:, 1, 0] = np.sin(t + taus)
    return values


def _ex5_field() -> PiecewiseAffineField:
    law = RelayLaw(gain=[[-1.0]], surface=SwitchingSurface.linear([[1.0, 0.0]]))
    zeros, first = np.zeros(2), np.array([[1.0], [0.0]])
    return PiecewiseAffineField(a=lambda t, x: zeros, b=lambda t, x: first, feedback=law)


def ex5_closed_form(times, q: float) -> np.ndarray:
    """x2(t) = q int_0^t int_0^s sin(s + tau) dtau ds = q (sin t - sin 2t / 2)."""
    times = np.asarray(times, dtype=float)
    return q * (np.sin(times) - 0.5 * np.sin(2.0 * times))


def simulate_nonunique(params: NonuniqueParams) -> Trajectories:
    field = _ex5_field()
    kernel = DenseKernel(n=2, fn=_ex5_kernel, vectorized=True)
    sim = params.simulation
    trajs = {'trajectory': euler_ide(field, kernel, field, sim.sim_config(selection_policy=EquivalentSelection()))}
    for i, q in enumerate(params.selections.q, start=1):
        cfg = sim.sim_config(memory_selection=InputSelection(values=[q], set_kind='first'))
        trajs[f'selection_{i}'] = euler_ide(field, kernel, field, cfg)
    return trajs


def evaluate_nonunique(params: NonuniqueParams, trajs: Trajectories) -> Evaluation:
    first = trajs['trajectory']
    sim = params.simulation
    tol = params.selections.tolerance
    checks = [Check.at_most('first-kind run stays at the origin', _sup(first.states), 1e-12)]
    notes = []
    closed_form = sim.t0 == 0.0 and not any(sim.x0)
    if not closed_form:
        notes.append('closed form needs t0 = 0 and x0 = 0; comparison skipped')

    curves = []
    for i, q in enumerate(params.selections.q, start=1):
        traj = trajs.get(f'selection_{i}')
        if traj is None:
            notes.append(f'selection q={q:g} not stored')
            continue
        checks.append(Check.at_most(f'selection q={q:g}: x1 stays zero', _sup(traj.states[:, 0]), 1e-12))
        if closed_form:
            error = _sup(traj.states[:, 1] - ex5_closed_form(traj.times, q))
            checks.append(Check.at_most(f'selection q={q:g}: x2 vs closed form', error, tol))
        curves.append((q, traj))

    if len(curves) >= 2:
        (qa, a), (qb, b) = curves[:2]
        measured = _sup(a.states[:, 1] - b.states[:, 1])
        checks.append(Check.holds('selections give distinct solutions', measured > tol, f'sup difference {measured:.4g}'))
        if closed_form:
            expected = abs(qa - qb) * _sup(ex5_closed_form(a.times, 1.0))
            checks.append(
                Check.at_most('sup difference of x2 vs closed form', abs(measured - expected), tol, f'expected {expected:.4g}')
            )
    return checks, notes


# two-kind-ex7: x1' = u1, x2' = int u2, u1 = u2 = -sign(x1)


class TwoKindParams(Section):
    simulation: SimulationSection = Field(
        default_factory=lambda: SimulationSection(h=1e-3, horizon=2.0, x0=[0.0, 0.0])
    )
    q: float = Field(default=1.0, ge=-1.0, le=1.0)


def _ex7_fields() -> tuple[PiecewiseAffineField, PiecewiseAffineField]:
    law = RelayLaw(gain=[[-1.0], [-1.0]], surface=SwitchingSurface.linear([[1.0, 0.0]]))
    zeros = np.zeros(2)
    instant, memory = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    f = PiecewiseAffineField(a=lambda t, x: zeros, b=lambda t, x: instant, feedback=law)
    f_tilde = PiecewiseAffineField(a=lambda t, x: zeros, b=lambda t, x: memory, feedback=law)
    return f, f_tilde


def simulate_two_kind(params: TwoKindParams) -> Trajectories:
    f, f_tilde = _ex7_fields()
    kernel = ConstantKernel(matrix=np.eye(2))
    sim = params.simulation
    second = sim.sim_config(memory_selection=InputSelection(values=[0.0, params.q], set_kind='second'))
    return {
        'trajectory': euler_ide(f, kernel, f_tilde, sim.sim_config()),
        'second_kind': euler_ide(f, kernel, f_tilde, second),
    }


def evaluate_two_kind(params: TwoKindParams, trajs: Trajectories) -> Evaluation:
    first = trajs['trajectory']
    q = params.q
    f, _ = _ex7_fields()
    origin = np.zeros(2)
    first_set, second_set = utkin_sets(f, first.t0, origin)
    checks = [
        Check.at_most('first-kind run stays at the origin', _sup(first.states), 1e-12),
        Check.holds(f'(0, {q:g}) lies in the second-kind box', second_set.contains_input([0.0, q])),
        Check.holds('first-kind set inside the second-kind box', first_kind_in_second_kind(f, first.t0, origin)),
    ]
    notes = []
    if q != 0.0:
        checks.append(Check.holds(f'(0, {q:g}) lies outside the first-kind set', not first_set.contains_input([0.0, q])))
    else:
        notes.append('q = 0 is a first-kind input; the two kinds coincide for this selection')
    second = trajs.get('second_kind')
    if second is None:
        notes.append('second-kind run not stored')
        return checks, notes
    h = second.h
    t = second.times - second.t0
    checks.append(Check.at_most('second-kind run: x1 stays zero', _sup(second.states[:, 0]), 1e-12))
    horizon = float(t[-1])
    checks.append(
        Check.at_most('second-kind run: x2 vs q t^2 / 2', _sup(second.states[:, 1] - 0.5 * q * t**2), abs(q) * h * max(horizon, 1.0))
    )
    return checks, notes


# delay-ide-4.1: distributed input memory over a unit window

DELAY_A = [[-2.0, 4.0, 2.0], [0.0, -3.0, 1.0], [-1.0, 2.0, 1.0]]
DELAY_B = [[0.0], [0.0], [1.0]]
DELAY_C = [[1.0, 0.0, -2.0]]
EYE3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]


class ReachingSection(Section):
    """Expected reaching behavior: `window` bounds T, |y| <= band h after T + settle."""

    window: list[float] | None = None
    band: float = 20.0
    settle: float = 0.05


class IndicatorSection(Section):
    enabled: bool = True
    eps: float = Field(default=0.01, gt=0.0)
    h: float = Field(default=1e-4, gt=0.0)
    horizon: float = Field(default=1.5, gt=0.0)
    after: float = 0.6
    threshold: float = 0.1


class EquivalentSection(Section):
    enabled: bool = True
    rule: Rule = 'rectangle'


class DelayParams(Section):
    simulation: SimulationSection = Field(
        default_factory=lambda: SimulationSection(h=1e-3, horizon=3.0, x0=[1.0, 1.0, -1.1])
    )
    plant: PlantSection = Field(default_factory=lambda: PlantSection(A=DELAY_A, B=DELAY_B, C=DELAY_C))
    kernel: KernelSection = Field(default_factory=lambda: KernelSection(kind='constant', matrix=EYE3, delay=1.0))
    signals: SignalsSection = Field(
        default_factory=lambda: SignalsSection(gamma=CosineSignal(amplitude=[0.5], omega=2.0))
    )
    design: DesignSection = Field(default_factory=lambda: DesignSection(delta=0.1, rho=4.0))
    reaching: ReachingSection = Field(default_factory=lambda: ReachingSection(window=[0.45, 0.65]))
    indicator: IndicatorSection = Field(default_factory=IndicatorSection)
    equivalent: EquivalentSection = Field(default_factory=EquivalentSection)
    compare_memoryless: bool = True

    def build_plant(self) -> LinearIdePlant:
        return build_plant(self.plant, self.kernel, self.signals)


class FeasibleDelayParams(DelayParams):
    """The same plant with the memory halved, so M < 1 and the closed-form gain applies."""

    kernel: KernelSection = Field(
        default_factory=lambda: KernelSection(kind='constant', matrix=EYE3, delay=1.0, scale=0.5)
    )
    design: DesignSection = Field(default_factory=lambda: DesignSection(delta=0.1))
    reaching: ReachingSection = Field(default_factory=ReachingSection)
    indicator: IndicatorSection = Field(default_factory=lambda: IndicatorSection(enabled=False))
    compare_memoryless: bool = False


def design_delay(params: DelayParams, plant: LinearIdePlant | None = None) -> DesignResult:
    plant = plant or params.build_plant()
    sim, section = params.simulation, params.design
    return design(
        plant,
        sim.h,
        sim.horizon,
        t0=sim.t0,
        delta=section.delta,
        x0=sim.x0,
        P=None if section.P is None else np.asarray(section.P, dtype=float),
        rho_override=section.rho,
    )


def _delay_law(result: DesignResult, plant: LinearIdePlant):
    if result.rho is None or result.P is None:
        raise InfeasibleDesignError('the design is infeasible and no rho override was given', result.diagnostics)
    return smc_feedback(result.rho, plant.CB, result.P, plant.C)


def _attach_equivalent_control(plant: LinearIdePlant, law, traj: Trajectory, rule: Rule) -> Trajectory:
    """Add u_eq (Neumann), u_eq_direct and the sliding residual as aux channels (NaN before T)."""
    T = detect_reaching_time(traj, plant.C, law.P)
    if T is None:
        logger.warning('no reaching time detected; equivalent control skipped')
        return traj
    try:
        problem = build_sliding_volterra(plant, traj, law, T)
    except NotInSlidingError as e:
        logger.warning(f'equivalent control skipped: {e}')
        return traj
    neumann = neumann_solve(problem, rule=rule)
    direct = direct_volterra_solve(problem, rule)
    gamma = plant.gamma_signal().on_grid(problem.times)
    u_eq = neumann.values - gamma
    residual = sliding_residual(traj, plant, u_eq, T)
    logger.info(f'equivalent control from T={T:.4f}: {neumann.n_terms} Neumann terms, tail bound {neumann.tail_bound:.3g}')
    start, size = traj.index_at(T), len(traj.times)
    return traj.with_aux(
        u_eq=_padded(u_eq, start, size),
        u_eq_direct=_padded(direct - gamma, start, size),
        sliding_residual=_padded(residual, start, size),
    )


def _indicator_run(params: DelayParams, plant: LinearIdePlant, f, f_tilde) -> Trajectory:
    ind, sim = params.indicator, params.simulation
    cfg = SimConfig(t0=sim.t0, h=ind.h, horizon=ind.horizon, x0=sim.x0)
    fine = euler_ide(f, plant.kernel, f_tilde, cfg, plant.C)
    u_eps = low_pass_filter(fine.inputs, ind.eps, ind.h)
    delta = sliding_indicator(fine, plant.kernel, plant.CB, plant.B_tilde, plant.C, plant.gamma_signal(), u_eps)
    return fine.with_aux(u_eps=u_eps, indicator=delta)


def simulate_delay(params: DelayParams) -> Trajectories:
    plant = params.build_plant()
    law = _delay_law(design_delay(params, plant), plant)
    f, f_tilde = closed_loop_fields(plant, law)
    cfg = params.simulation.sim_config()
    traj = euler_ide(f, plant.kernel, f_tilde, cfg, plant.C)
    if params.equivalent.enabled:
        traj = _attach_equivalent_control(plant, law, traj, params.equivalent.rule)
    trajs = {'trajectory': traj}
    if params.compare_memoryless:
        memoryless = plant.without_memory()
        f0, f0_tilde = closed_loop_fields(memoryless, law)
        trajs['memoryless'] = euler_ide(f0, memoryless.kernel, f0_tilde, cfg, plant.C)
    if params.indicator.enabled:
        trajs['indicator'] = _indicator_run(params, plant, f, f_tilde)
    return trajs


def evaluate_delay(params: DelayParams, trajs: Trajectories) -> Evaluation:
    traj = trajs['trajectory']
    plant = params.build_plant()
    result = design_delay(params, plant)
    notes = list(result.diagnostics)
    h, C = traj.h, plant.C
    P = result.P if result.P is not None else np.eye(plant.m)

    checks = []
    if result.Lambda is not None and np.isfinite(plant.kernel.support()):
        stable, remaining = bounded_delay_stability(plant.A, result.Lambda)
        checks.append(
            Check.holds('remaining spectrum in the open left half-plane', stable, np.array2string(remaining, precision=4))
        )

    T = detect_reaching_time(traj, C, P)
    checks.append(Check.holds('output reaches the surface', T is not None))
    if T is None:
        return checks, notes
    if params.reaching.window is not None:
        lo, hi = params.reaching.window
        checks.append(Check.holds('reaching time in the expected window', lo <= T <= hi, f'T = {T:.4f}, window [{lo:g}, {hi:g}]'))
    if result.T_max is not None:
        checks.append(Check.at_most('reaching time vs design bound', T - traj.t0, result.T_max))
    settle = traj.index_at(T + params.reaching.settle)
    checks.append(Check.at_most('|y| after reaching', _sup(traj.outputs[settle:]), params.reaching.band * h))

    y_norm = _p_norms(traj.outputs, P)
    if result.feasible and result.rho_source == 'formula':
        far = y_norm[:-1] > 20.0 * h
        if far.any():
            slopes = np.diff(y_norm)[far] / h
            checks.append(Check.at_most('d||y||_P/dt outside the band', slopes.max(), -result.delta + 10.0 * h))
    if result.rho is not None and traj.inputs is not None:
        bound = _delay_law(result, plant).bound()
        checks.append(Check.at_most('||u||_P', _p_norms(traj.inputs, P).max(), bound * (1.0 + 1e-9)))

    u_eq = _aux(traj, 'u_eq')
    if u_eq is not None:
        valid = ~np.isnan(u_eq[:, 0])
        direct, residual = _aux(traj, 'u_eq_direct'), _aux(traj, 'sliding_residual')
        checks.append(Check.at_most('Neumann vs direct Volterra solution', _sup(u_eq[valid] - direct[valid]), 10.0 * h + 1e-8))
        w = u_eq[valid] + plant.gamma_signal().on_grid(traj.times[valid])
        scale = 10.0 * h * spectral_norm(plant.CB) * max(1.0, _sup(w))
        checks.append(Check.at_most('sliding identity residual', _sup(residual[valid]), scale))
    elif params.equivalent.enabled:
        notes.append('no equivalent control stored')

    indicator = trajs.get('indicator')
    if indicator is not None:
        values = _aux(indicator, 'indicator')
        start = indicator.index_at(params.indicator.after)
        checks.append(
            Check.at_most(f'|indicator| for t >= {params.indicator.after:g}', _sup(values[start:]), params.indicator.threshold)
        )
    elif params.indicator.enabled:
        notes.append('indicator run not stored')

    memoryless = trajs.get('memoryless')
    if memoryless is not None:
        T_ode = detect_reaching_time(memoryless, C, P)
        checks.append(Check.holds('memoryless comparison reaches the surface', T_ode is not None))
        notes.append(f'reaching time with memory {T:.4f}, without memory {"n/a" if T_ode is None else f"{T_ode:.4f}"}')
        notes.append(
            f'final ||x|| with memory {np.linalg.norm(traj.states[-1]):.4g}, without memory {np.linalg.norm(memoryless.states[-1]):.4g}'
        )
    return checks, notes


# heat-paper, heat-paper-plateau and heat-ide-reduced


class HeatRunSection(Section):
    h: float = Field(default=1e-3, gt=0.0)
    horizon: float = Field(default=1.0, gt=0.0)
    rho: float = Field(default=1.0, gt=0.0)
    delta: float = Field(default=0.01, gt=0.0)
    band: float = 20.0


class HeatPaperRunSection(HeatRunSection):
    scheme: Literal['euler', 'exponential'] = 'exponential'


class ReconstructionSection(Section):
    points: int = Field(default=51, ge=2)
    every: int = Field(default=10, ge=1)


class HeatParams(Section):
    """`reported`: whether distance to the reported constants is a note or a check."""

    heat: HeatConfig = Field(default_factory=HeatConfig)
    run: HeatPaperRunSection = Field(default_factory=HeatPaperRunSection)
    reconstruction: ReconstructionSection = Field(default_factory=ReconstructionSection)
    reported: Literal['note', 'check'] = 'note'


class HeatPlateauParams(HeatParams):
    heat: HeatConfig = Field(default_factory=lambda: HeatConfig(beta=profile('plateau_bump')))
    reported: Literal['note', 'check'] = 'check'


class HeatReducedParams(Section):
    """`slack` absorbs rounding on top of the derived discretization bound."""

    heat: HeatConfig = Field(default_factory=HeatConfig)
    run: HeatRunSection = Field(default_factory=HeatRunSection)
    slack: float = Field(default=1e-6, ge=0.0)


def design_heat(params: HeatParams | HeatReducedParams) -> DesignResult:
    """The generic design on the reduced IDE, annotated with the distributed gain bound."""
    cfg, run = params.heat, params.run
    plant = heat_plant(cfg, run.horizon, run.h)
    result = design(plant, run.h, run.horizon, delta=run.delta, x0=[heat_io_kernel(cfg).y0])
    try:
        gain = heat_gain(heat_constants(cfg), cfg.gamma.sup_bound(), run.delta, cfg.nu)
        result.diagnostics.append(f'distributed design needs rho > {gain:.4g}')
    except ConditionViolatedError as e:
        result.diagnostics.append(str(e))
    if result.M is not None and result.M < 1.0:
        q = heat_io_gain(float(plant.CB[0, 0]), result.M, plant.p_bar, plant.gamma_bar, run.delta)
        result.diagnostics.append(f'output relay gain q = {q:.4g}')
    return result


def simulate_heat_paper(params: HeatParams) -> Trajectories:
    cfg, run = params.heat, params.run
    modes = heat_modes(cfg)
    law = heat_relay(cfg, run.rho, modes)
    traj = simulate_heat(cfg, law, run.h, run.horizon, scheme=run.scheme)
    return {'trajectory': traj.with_aux(u_eq=heat_equivalent_control(cfg, traj, modes))}


def heat_frames(params: HeatParams, trajs: Trajectories) -> dict[str, pd.DataFrame]:
    z = np.linspace(0.0, 1.0, params.reconstruction.points)
    return {'reconstruction': reconstruction_frame(trajs['trajectory'], z, params.reconstruction.every)}


def evaluate_heat_paper(params: HeatParams, trajs: Trajectories) -> Evaluation:
    cfg, run = params.heat, params.run
    traj = trajs['trajectory']
    h = traj.h
    constants = heat_constants(cfg)
    checks, notes = [], []
    if params.reported == 'check':
        for name, reference in REPORTED_CONSTANTS.items():
            value = getattr(constants, name)
            checks.append(
                Check.at_most(f'{name} relative to {reference:g}', abs(value - reference) / reference, REPORTED_RTOL, f'{name} = {value:.4f}')
            )
    else:
        notes.extend(f'flagged: {message}' for message in compare_with_reported(constants))
    notes.append(f'CB = {constants.CB:.4g}, ||beta|| = {constants.norm_beta:.4g}, ||xi\'\' + lambda xi|| = {constants.norm_xi_shift:.4g}')
    shift = check_shift_condition(cfg, constants)
    checks.append(Check.holds('shift condition', shift.holds, f'margin {shift.margin:.4g}'))
    try:
        gain = heat_gain(constants, cfg.gamma.sup_bound(), run.delta, cfg.nu)
        notes.append(f'distributed design needs rho > {gain:.4g}; the run uses rho = {run.rho:g}')
    except ConditionViolatedError as e:
        notes.append(f'no distributed gain bound: {e}')
    checks.append(Check.at_most('sliding-phase decay margin', decay_margin(constants, cfg.nu), 0.0))

    modes = heat_modes(cfg)
    T = detect_reaching_time(traj, modes.xi[None, :])
    checks.append(Check.holds('output reaches zero', T is not None))
    if T is None:
        return checks, notes
    notes.append(f'reaching time {T:.4f}')
    start = traj.index_at(T)
    checks.append(Check.at_most('|y| after reaching', _sup(traj.outputs[start:]), run.band * h))

    norm = _aux(traj, 'l2_norm')[:, 0]
    lo = traj.index_at(T + 0.05)
    hi = traj.index_at(min(T + 0.5, traj.times[-1]))
    if hi - lo >= 10:
        slope = np.polyfit(traj.times[lo : hi + 1], np.log(norm[lo : hi + 1]), 1)[0]
        checks.append(Check.at_most('slope of log ||x|| after reaching', slope, -0.5 * cfg.nu))
    else:
        checks.append(Check.holds('horizon covers the sliding phase', False, f'T = {T:.4f}'))
    q = run.rho / abs(constants.CB)
    checks.append(Check.at_most('final ||x||', norm[-1], l2_bound(constants, q, cfg.gamma.sup_bound(), cfg.nu)))
    return checks, notes


def simulate_heat_reduced(params: HeatReducedParams) -> Trajectories:
    cfg, run = params.heat, params.run
    plant = heat_plant(cfg, run.horizon, run.h)
    law = RelayLaw(gain=[[-run.rho / float(plant.CB[0, 0])]], surface=SwitchingSurface.linear([[1.0]]))
    f, f_tilde = closed_loop_fields(plant, law)
    cfg_ide = SimConfig(h=run.h, horizon=run.horizon, x0=[heat_io_kernel(cfg).y0], history_mode=HistoryMode.RECURRENCE)
    # exact for inputs held over a step
    modal = simulate_heat(cfg, heat_relay(cfg, run.rho), run.h, run.horizon, scheme='exponential')
    return {
        'trajectory': euler_ide(f, plant.kernel, f_tilde, cfg_ide, plant.C),
        'modal': modal,
        'replay': replay_reduced(cfg, modal),
    }


def evaluate_heat_reduced(params: HeatReducedParams, trajs: Trajectories) -> Evaluation:
    cfg = params.heat
    reduced = trajs['trajectory']
    T = detect_reaching_time(reduced, np.eye(1))
    checks = [Check.holds('reduced output reaches zero', T is not None)]
    modal, replay = trajs.get('modal'), trajs.get('replay')
    if modal is None or replay is None:
        return checks, ['modal run or its replay not stored']
    held = modal.inputs[:, 0] + cfg.gamma.on_grid(modal.times)[:, 0]
    bound = reduction_error_bound(cfg, modal.h, modal.steps, _sup(held))
    error = _sup(replay.outputs[:, 0] - modal.outputs[:, 0])
    checks.append(Check.at_most('reduced IDE vs modal output under one input', error, params.slack + bound))

    T_modal = detect_reaching_time(modal, heat_modes(cfg).xi[None, :])
    times = ', '.join('n/a' if t is None else f'{t:.4f}' for t in (T, T_modal))
    notes = [
        f'discretization bound {bound:.3g} for N = {cfg.n_modes}, h = {modal.h:g}',
        f'closed loops: reaching times (reduced, modal) {times}, sup |y gap| {_sup(reduced.outputs - modal.outputs):.3g}',
    ]
    return checks, notes


# registry

SCENARIOS: dict[str, Scenario] = {
    scenario.name: scenario
    for scenario in (
        Scenario(
            name='relay-scalar',
            description='scalar relay x\' = u + 0.5 sin 3t, u = -sign x',
            provenance='first-order relay loop with a matched sinusoidal perturbation',
            params_model=RelayScalarParams,
            simulate=simulate_relay_scalar,
            evaluate=evaluate_relay_scalar,
        ),
        Scenario(
            name='relay-linear-ex2',
            description='linear plant with nominal-plus-relay control and its sliding dynamics',
            provenance='relay u = -(CB)^-1 CA x + L sign(Cx) on a linear ODE',
            params_model=RelayLinearParams,
            simulate=simulate_relay_linear,
            evaluate=evaluate_relay_linear,
        ),
        Scenario(
            name='switching-ex3',
            description='two-channel relay with rotated gain: crossing off the origin, sliding at it',
            provenance='multi-input relay L = rho (CB)^-1 [[-1, 2], [-2, -1]] with sliding set {0}',
            params_model=SwitchingParams,
            simulate=simulate_switching,
            evaluate=evaluate_switching,
        ),
        Scenario(
            name='nonunique-ex5',
            description='relay in the memory only: first-kind solution vs Filippov selections',
            provenance='x1\' = u, x2\' = int sin(t + tau) u dtau, u = -sign(x1)',
            params_model=NonuniqueParams,
            simulate=simulate_nonunique,
            evaluate=evaluate_nonunique,
        ),
        Scenario(
            name='two-kind-ex7',
            description='two relays of one sign: first-kind vs second-kind solution sets',
            provenance='x1\' = u1, x2\' = int u2, u1 = u2 = -sign(x1)',
            params_model=TwoKindParams,
            simulate=simulate_two_kind,
            evaluate=evaluate_two_kind,
        ),
        Scenario(
            name='delay-ide-4.1',
            description='unit-vector SMC of a plant with distributed input memory (rho = 4)',
            provenance='three-state plant, Phi = I on lags [0, 1), gamma = 0.5 cos 2t',
            params_model=DelayParams,
            simulate=simulate_delay,
            evaluate=evaluate_delay,
            design=design_delay,
        ),
        Scenario(
            name='delay-ide-4.1-feasible',
            description='the distributed-memory plant with halved memory and closed-form gain',
            provenance='three-state plant, Phi = 0.5 I on lags [0, 1), design gain from the formula',
            params_model=FeasibleDelayParams,
            simulate=simulate_delay,
            evaluate=evaluate_delay,
            design=design_delay,
        ),
        Scenario(
            name='heat-paper',
            description='relay control of the heat equation through 60 modes',
            provenance='x_t = x_zz + beta (u + gamma), beta = exp(1 / ((0.3 - z)(0.6 - z))) as written, y = <xi, x>, rho = 1, gamma = 0.5',
            params_model=HeatParams,
            simulate=simulate_heat_paper,
            evaluate=evaluate_heat_paper,
            design=design_heat,
            frames=heat_frames,
        ),
        Scenario(
            name='heat-paper-plateau',
            description='the heat loop with a flattened bump beta that reproduces the reported constants',
            provenance='beta = exp(3e-4 / ((0.3 - z)(0.6 - z))) on (0.3, 0.6); other data as heat-paper',
            params_model=HeatPlateauParams,
            simulate=simulate_heat_paper,
            evaluate=evaluate_heat_paper,
            design=design_heat,
            frames=heat_frames,
        ),
        Scenario(
            name='heat-ide-reduced',
            description='the heat loop simulated as a scalar IDE for y',
            provenance='y\' = -nu lambda y + p + CB (u + gamma) + int Phi (u + gamma)',
            params_model=HeatReducedParams,
            simulate=simulate_heat_reduced,
            evaluate=evaluate_heat_reduced,
            design=design_heat,
        ),
    )
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise UnknownScenarioError(f'unknown scenario {name!r}; known: {", ".join(SCENARIOS)}') from None


def scenario_names() -> list[str]:
    return list(SCENARIOS)


def _check_emit(emit) -> tuple[str, ...]:
    emit = tuple(emit)
    unknown = sorted(set(emit) - set(EMITS))
    if unknown:
        raise ConfigError(f'unknown emit flags {unknown}; choose from {list(EMITS)}')
    return emit


def _write_run(
    scenario: Scenario,
    params: BaseModel,
    overrides: list[str],
    trajs: Trajectories,
    result: DesignResult | None,
    report: CheckReport,
    directory: Path,
    emit: tuple[str, ...],
) -> Path:
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f'cannot create output directory {directory}: {e}') from e
    stored = []
    for key, traj in trajs.items():
        flag = 'indicator' if key == 'indicator' else 'trajectory'
        if flag in emit:
            io.write_trajectory(traj, directory / f'{key}.csv')
            stored.append(key)
    if result is not None and 'design' in emit:
        io.write_model(result, directory / 'design.json')
        (directory / 'design.txt').write_text(result.summary() + '\n')
    if scenario.frames is not None and 'reconstruction' in emit:
        for key, frame in scenario.frames(params, trajs).items():
            io.write_frame(frame, directory / f'{key}.csv')
    io.write_report(report, directory)
    record = {
        'scenario': scenario.name,
        'overrides': overrides,
        'params': params.model_dump(mode='json'),
        'trajectories': stored,
    }
    io.write_json(record, directory / RUN_CONFIG)
    return directory


def run_scenario(
    name: str,
    overrides=(),
    output_dir: Path | None = None,
    emit=EMITS,
    params: BaseModel | None = None,
) -> ScenarioRun:
    """
    Run a registered scenario and evaluate its checks.

    Args:
        name (str): registry key.
        overrides (list[str]): `section.key=value` parameter overrides.
        output_dir (Path, optional): directory for CSVs, design record and report.
        emit (tuple[str]): subset of EMITS to write.
        params (BaseModel, optional): parameters replacing the defaults
            (as read by `load_scenario_config`); overrides apply on top.

    Returns:
        ScenarioRun: trajectories, report and (if any) the design record.

    Raises:
        UnknownScenarioError: `name` is not registered.
        ConfigError: an override or emit flag is invalid.
    """
    scenario = get_scenario(name)
    emit = _check_emit(emit)
    overrides = list(overrides)
    if params is None:
        params = scenario.params(overrides)
    else:
        params = apply_overrides(scenario.params_model.model_validate(params.model_dump()), overrides)
    logger.info(f'running scenario {name}')
    trajs = scenario.simulate(params)
    result = scenario.design(params) if scenario.design is not None else None
    checks, notes = scenario.evaluate(params, trajs)
    report = CheckReport(scenario=name, provenance=scenario.provenance, checks=checks, notes=notes)
    logger.info(f'scenario {name}: {"PASS" if report.passed else "FAIL"} ({len(report.failures())} failed checks)')
    directory = None
    if output_dir is not None:
        directory = _write_run(scenario, params, overrides, trajs, result, report, Path(output_dir), emit)
    return ScenarioRun(scenario=name, params=params, trajectories=trajs, report=report, design=result, directory=directory)


def check_directory(directory: Path) -> CheckReport:
    """
    Re-evaluate the checks of a stored run from its run_config.json and CSVs.

    Raises:
        ConfigError: the directory does not hold a complete run.
    """
    directory = Path(directory)
    config_path = directory / RUN_CONFIG
    if not config_path.exists():
        raise ConfigError(f'{directory} holds no {RUN_CONFIG}; point `check` at a `smide run` output directory')
    record = io.read_json(config_path)
    scenario = get_scenario(record['scenario'])
    try:
        params = scenario.params_model.model_validate(record['params'])
    except ValidationError as e:
        raise ConfigError(f'{config_path}: {e}') from e
    trajs = {}
    for key in record.get('trajectories', []):
        path = directory / f'{key}.csv'
        if not path.exists():
            raise ConfigError(f'missing trajectory file {path}')
        trajs[key] = io.read_trajectory(path)
    if 'trajectory' not in trajs:
        raise ConfigError(f'{directory} stores no main trajectory; re-run with --emit trajectory')
    checks, notes = scenario.evaluate(params, trajs)
    return CheckReport(scenario=scenario.name, provenance=scenario.provenance, checks=checks, notes=notes)


def design_scenario(name: str, overrides=()) -> DesignResult:
    scenario = get_scenario(name)
    if scenario.design is None:
        designable = [s.name for s in SCENARIOS.values() if s.design is not None]
        raise ConfigError(f'scenario {name!r} declares no plant to design; choose from {designable}')
    return scenario.design(scenario.params(overrides))


def design_plant_config(config: PlantConfig) -> DesignResult:
    """The design of a plant declared in a config file."""
    sim, section = config.simulation, config.design
    return design(
        config.build_plant(),
        sim.h,
        sim.horizon,
        t0=sim.t0,
        delta=section.delta,
        x0=sim.x0,
        P=None if section.P is None else np.asarray(section.P, dtype=float),
        rho_override=section.rho,
    )


def load_scenario_config(path: Path) -> tuple[str, BaseModel]:
    """
    A TOML run file: a top-level `scenario = "<name>"` plus any parameter
    tables of that scenario, which replace the defaults table by table.
    """
    data = read_toml(path)
    name = data.pop('scenario', None)
    if not isinstance(name, str):
        raise ConfigError(f'{path} must name its scenario with a top-level `scenario = "..."`')
    scenario = get_scenario(name)
    defaults = scenario.params_model().model_dump()
    defaults.update(data)
    return name, load_config(path, scenario.params_model, defaults)


def _run_to_directory(name: str, overrides: list[str], directory: Path, emit: tuple[str, ...]) -> CheckReport:
    try:
        return run_scenario(name, overrides, directory, emit).report
    except ConfigError:
        raise
    except SmideError as e:
        logger.error(f'scenario {name} aborted: {e}')
        return CheckReport(scenario=name, checks=[Check.holds('scenario completed', False, str(e))])


def run_many(names, output_root: Path, overrides=(), emit=EMITS, jobs: int = 1) -> dict[str, CheckReport]:
    """
    Run several scenarios, each into output_root/<name>, optionally in a
    process pool. A scenario that raises is reported as failed.
    """
    names = list(names)
    for name in names:
        get_scenario(name)
    emit = _check_emit(emit)
    output_root = Path(output_root)
    overrides = list(overrides)
    reports: dict[str, CheckReport] = {}
    if jobs <= 1:
        for name in tqdm(names, desc='Scenarios', unit='scenario'):
            reports[name] = _run_to_directory(name, overrides, output_root / name, emit)
        return reports
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = {
            pool.submit(_run_to_directory, name, overrides, output_root / name, emit): name for name in names
        }
        for future in tqdm(as_completed(futures), total=len(futures), desc='Scenarios', unit='scenario'):
            reports[futures[future]] = future.result()
    return {name: reports[name] for name in names}

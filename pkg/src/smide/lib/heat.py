"""
The controlled heat equation

    x_t = nu x_zz + beta(z) (u + gamma),   x(t, 0) = x(t, 1) = 0,
    y = int_0^1 xi(z) x(t, z) dz,

reduced by the Dirichlet eigenbasis phi_i = sqrt(2) sin(pi i z),
lambda_i = pi^2 i^2, to N modal ODEs and to a scalar IDE for y.
"""

from __future__ import annotations

import logging
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import trapezoid
from scipy.signal import lfilter

from smide.lib.errors import (
    ConditionViolatedError,
    DegenerateOutputError,
    InvalidParameterError,
    NonFiniteStateError,
    StabilityError,
)
from smide.lib.fields import FeedbackLaw, RelayLaw, SwitchingSurface
from smide.lib.integrator import euler_ide
from smide.lib.kernels import ExponentialSeriesKernel
from smide.lib.models import HistoryMode, LinearIdePlant, SimConfig, Trajectory
from smide.lib.signals import ConstantSignal, ExponentialSumSignal, SignalSpec, TableSignal, grid_sup

logger = logging.getLogger(__name__)

PI2 = np.pi**2
ENDPOINT_TOL = 1e-12
REPORTED_CONSTANTS = {'CB': 0.33, 'norm_beta': 0.55, 'norm_xi_shift': 0.8}
REPORTED_RTOL = 0.05


class Profile(BaseModel):
    """
    A spatial profile on [0, 1].

    kinds:
        bump: scale * exp(sharpness / ((lo - z)(hi - z))) on (lo, hi), 0 elsewhere.
        sine_parabola: scale * (sin(pi z) + z (1 - z)).
        parabola: scale * z (1 - z).
        mode: scale * phi_index(z).
    """

    model_config = ConfigDict(frozen=True, extra='forbid')

    kind: Literal['bump', 'sine_parabola', 'parabola', 'mode']
    scale: float = 1.0
    sharpness: float = 1.0
    lo: float = 0.3
    hi: float = 0.6
    index: int = Field(default=1, ge=1)

    @model_validator(mode='after')
    def check_support(self):
        if self.kind == 'bump' and not (0.0 <= self.lo < self.hi <= 1.0 and self.sharpness > 0.0):
            raise ValueError('bump needs 0 <= lo < hi <= 1 and a positive sharpness')
        return self

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.kind == 'bump':
            values = np.zeros_like(z)
            inside = (z > self.lo) & (z < self.hi)
            zi = z[inside]
            # the product is negative inside, so the exponent is too; underflow clamps to 0
            with np.errstate(under='ignore'):
                values[inside] = np.exp(self.sharpness / ((self.lo - zi) * (self.hi - zi)))
            return self.scale * values
        if self.kind == 'sine_parabola':
            return self.scale * (np.sin(np.pi * z) + z * (1.0 - z))
        if self.kind == 'parabola':
            return self.scale * z * (1.0 - z)
        return self.scale * mode_shape(self.index, z)

    def second_derivative(self, z) -> np.ndarray | None:
        """Closed-form second derivative, or None when not available."""
        z = np.asarray(z, dtype=float)
        if self.kind == 'sine_parabola':
            return self.scale * (-PI2 * np.sin(np.pi * z) - 2.0)
        if self.kind == 'parabola':
            return np.full_like(z, -2.0 * self.scale)
        if self.kind == 'mode':
            return -PI2 * self.index**2 * self(z)
        return None


PROFILES: dict[str, Profile] = {
    # exp(1 / ((0.3 - z)(0.6 - z))) as written; it peaks near 5e-20
    'bump': Profile(kind='bump', sharpness=1.0),
    # same support, flattened exponent; lands near the reported constants
    'plateau_bump': Profile(kind='bump', sharpness=3e-4),
    'sine_parabola': Profile(kind='sine_parabola'),
    'parabola': Profile(kind='parabola', scale=10.0),
}


def profile(name: str) -> Profile:
    """Registered profile by name; `mode<i>` gives the i-th eigenfunction."""
    if name.startswith('mode') and name[4:].isdigit():
        return Profile(kind='mode', index=int(name[4:]))
    try:
        return PROFILES[name]
    except KeyError:
        raise InvalidParameterError(f'unknown profile {name!r}; known: {sorted(PROFILES)} and mode<i>') from None


def mode_shape(i, z) -> np.ndarray:
    return np.sqrt(2.0) * np.sin(np.pi * np.asarray(i)[..., None] * np.asarray(z, dtype=float))


def eigenvalues(N: int) -> np.ndarray:
    return PI2 * np.arange(1, N + 1) ** 2


class HeatConfig(BaseModel):
    """
    Heat control problem data. `shift` is the design shift lambda
    (default pi^2); `resolution` the number of trapezoid cells on [0, 1].
    """

    model_config = ConfigDict(frozen=True, extra='forbid')

    nu: float = 1.0
    beta: Profile = PROFILES['bump']
    xi: Profile = PROFILES['sine_parabola']
    x0: Profile = PROFILES['parabola']
    n_modes: int = 60
    shift: float = PI2
    resolution: int = 2000
    gamma: SignalSpec = Field(default_factory=lambda: ConstantSignal(value=[0.5]))

    @model_validator(mode='after')
    def check_problem(self):
        if not self.nu > 0.0:
            raise ValueError('conductivity nu must be positive')
        if self.n_modes < 1:
            raise ValueError('at least one mode is required')
        if self.resolution < 10 * self.n_modes:
            raise ValueError(f'resolution {self.resolution} cannot resolve {self.n_modes} modes (need >= {10 * self.n_modes})')
        if self.shift < 0.0:
            raise ValueError('design shift must be nonnegative')
        for name in ('xi', 'x0'):
            ends = getattr(self, name)(np.array([0.0, 1.0]))
            if np.abs(ends).max() > ENDPOINT_TOL:
                raise ValueError(f'{name} must vanish at z = 0 and z = 1')
        return self

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.resolution + 1)

    @property
    def eigenvalues(self) -> np.ndarray:
        return eigenvalues(self.n_modes)


def modal_project(f, N: int, resolution: int = 2000) -> np.ndarray:
    """c_i = int_0^1 f(z) phi_i(z) dz, i = 1..N, by the composite trapezoid rule."""
    z = np.linspace(0.0, 1.0, resolution + 1)
    values = np.asarray(f(z), dtype=float)
    return trapezoid(mode_shape(np.arange(1, N + 1), z) * values, z, axis=1)


class HeatConstants(BaseModel):
    CB: float
    norm_beta: float
    norm_xi_shift: float
    shift_source: Literal['analytic', 'spectral'] = 'analytic'


def heat_constants(cfg: HeatConfig) -> HeatConstants:
    """
    CB = <xi, beta>, ||beta|| and ||xi'' + lambda xi|| in L^2(0, 1).

    The shifted norm uses the closed-form xi'' when the profile has one,
    otherwise Parseval over the N modal coefficients.

    Raises:
        DegenerateOutputError: |CB| <= 1e-10 ||xi|| ||beta||, i.e. |CB| < 1e-10
            for unit-norm profiles, independent of their scale.
    """
    z = cfg.grid
    beta, xi = cfg.beta(z), cfg.xi(z)
    CB = float(trapezoid(xi * beta, z))
    norm_beta = float(np.sqrt(trapezoid(beta**2, z)))
    norm_xi = float(np.sqrt(trapezoid(xi**2, z)))
    if abs(CB) <= 1e-10 * norm_xi * norm_beta:
        raise DegenerateOutputError(f'CB = {CB:.3e} vanishes: the output does not see the input')
    second = cfg.xi.second_derivative(z)
    if second is not None:
        norm_shift = float(np.sqrt(trapezoid((second + cfg.shift * xi) ** 2, z)))
        source = 'analytic'
    else:
        coefficients = modal_project(cfg.xi, cfg.n_modes, cfg.resolution)
        norm_shift = float(np.linalg.norm((cfg.shift - cfg.eigenvalues) * coefficients))
        source = 'spectral'
    return HeatConstants(CB=CB, norm_beta=norm_beta, norm_xi_shift=norm_shift, shift_source=source)


def compare_with_reported(constants: HeatConstants, rtol: float = REPORTED_RTOL) -> list[str]:
    """
    Messages for every constant further than `rtol` from its reference
    value. A disagreement is a finding to record, the profile stays as given.
    """
    warnings = []
    for name, reference in REPORTED_CONSTANTS.items():
        value = getattr(constants, name)
        error = abs(value - reference) / reference
        if error > rtol:
            warnings.append(f'{name} = {value:.4g} is {100 * error:.1f}% away from the reference {reference}')
    for message in warnings:
        logger.warning(message)
    return warnings


class ShiftCondition(BaseModel):
    holds: bool
    margin: float
    lhs: float
    rhs: float


def check_shift_condition(cfg: HeatConfig, constants: HeatConstants | None = None) -> ShiftCondition:
    """||xi'' + lambda xi|| ||beta|| < pi^2 |CB|, with margin rhs - lhs."""
    constants = constants or heat_constants(cfg)
    lhs = constants.norm_xi_shift * constants.norm_beta
    rhs = PI2 * abs(constants.CB)
    return ShiftCondition(holds=lhs < rhs, margin=rhs - lhs, lhs=lhs, rhs=rhs)


class HeatModes(BaseModel):
    """Modal coefficients of beta, xi and x0, and d_i = <xi'' + lambda xi, phi_i>."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    lambdas: np.ndarray
    b: np.ndarray
    xi: np.ndarray
    x0: np.ndarray
    shifted: np.ndarray


def heat_modes(cfg: HeatConfig) -> HeatModes:
    N, res = cfg.n_modes, cfg.resolution
    lambdas = cfg.eigenvalues
    xi = modal_project(cfg.xi, N, res)
    return HeatModes(
        lambdas=lambdas,
        b=modal_project(cfg.beta, N, res),
        xi=xi,
        x0=modal_project(cfg.x0, N, res),
        # <xi'', phi_i> = -lambda_i xi_i since xi vanishes at both ends
        shifted=(cfg.shift - lambdas) * xi,
    )


class HeatIO(BaseModel):
    """
    The reduced scalar IDE
        y' = drift y + p(t) + CB (u + gamma) + int Phi(t - tau) (u + gamma) dtau.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kernel: ExponentialSeriesKernel
    p: ExponentialSumSignal
    drift: float
    CB: float
    y0: float


def heat_io_kernel(cfg: HeatConfig, t0: float = 0.0) -> HeatIO:
    """Series terms mu_i = nu lambda_i, c_i = nu b_i d_i and the free response p."""
    modes = heat_modes(cfg)
    rates = (cfg.nu * modes.lambdas).tolist()
    kernel = ExponentialSeriesKernel(
        n=1,
        rates=rates,
        matrices=[[[cfg.nu * b * d]] for b, d in zip(modes.b, modes.shifted, strict=True)],
    )
    p = ExponentialSumSignal(rates=rates, weights=(cfg.nu * modes.x0 * modes.shifted).tolist(), origin=t0)
    return HeatIO(
        kernel=kernel,
        p=p,
        drift=-cfg.nu * cfg.shift,
        CB=float(modes.b @ modes.xi),
        y0=float(modes.xi @ modes.x0),
    )


def heat_plant(cfg: HeatConfig, horizon: float, h: float, t0: float = 0.0) -> LinearIdePlant:
    """The reduced IDE as a scalar LinearIdePlant (A = -nu lambda, B = CB, B_tilde = C = 1)."""
    io = heat_io_kernel(cfg, t0)
    times = t0 + h * np.arange(int(np.floor(horizon / h + 1e-9)) + 1)
    return LinearIdePlant(
        A=[[io.drift]],
        B=[[io.CB]],
        B_tilde=[[1.0]],
        C=[[1.0]],
        kernel=io.kernel,
        gamma_bar=cfg.gamma.sup_bound(),
        p_bar=grid_sup(io.p, times),
        gamma=cfg.gamma,
        p=io.p,
    )


def replay_reduced(cfg: HeatConfig, modal: Trajectory) -> Trajectory:
    """
    The reduced IDE under euler_ide, driven open loop by the input u + gamma
    a modal run applied, so both outputs answer to one input sequence.
    """
    if modal.inputs is None:
        raise InvalidParameterError('the modal run carries no applied inputs')
    io = heat_io_kernel(cfg, modal.t0)
    held = TableSignal(times=modal.times.tolist(), values=modal.inputs + cfg.gamma.on_grid(modal.times))
    sim = SimConfig(
        t0=modal.t0,
        h=modal.h,
        horizon=modal.steps * modal.h,
        x0=[io.y0],
        history_mode=HistoryMode.RECURRENCE,
    )
    return euler_ide(
        lambda t, y: io.drift * y + io.p(t) + io.CB * held(t),
        io.kernel,
        lambda t, y: held(t),
        sim,
        C=[[1.0]],
    )


def reduction_error_bound(cfg: HeatConfig, h: float, steps: int, w_sup: float) -> float:
    """
    Bound on max_k |y_k - y(t_k)| between the reduced IDE under explicit
    Euler with rectangle-rule memory and the exact output of the N-mode
    model, for any input held over each step with |u + gamma| <= w_sup.

    With a_i = nu lambda_i and d_i = <xi'' + lambda xi, phi_i> the step
    defect collects the Euler error of every mode (weights |xi_i|) and the
    rectangle-rule error of every memory term (weights h nu |d_i|). The
    defects accumulate through y_{k+1} = (1 - h nu lambda) y_k + ...

    The exponential modal scheme is exact for held inputs, so this also
    bounds the reduced-vs-modal output gap under a common input.
    """
    if steps <= 0:
        return 0.0
    modes = heat_modes(cfg)
    rates = cfg.nu * modes.lambdas
    lost = -np.expm1(-h * rates)
    held = lost / rates
    euler = h * rates - lost
    forced = np.abs(modes.b) * w_sup
    # |x_i(t_k)| <= e^{-a_i t_k} |x_i(0)| + (1 - e^{-a_i t_k}) |b_i| w_sup / a_i
    elapsed = np.outer(h * np.arange(steps), rates)
    state = np.exp(-elapsed) * np.abs(modes.x0) - np.expm1(-elapsed) * forced / rates
    # sum_m |h e^{-a h m} - held e^{-a h (m - 1)}| over the history, plus the current h
    memory = h + np.abs(h * (1.0 - lost) - held) / lost
    defects = (
        state @ (np.abs(modes.xi) * euler)
        + np.sum(np.abs(modes.xi) * np.abs(held - h) * forced)
        + h * cfg.nu * np.sum(np.abs(modes.shifted) * memory * forced)
    )
    contraction = abs(1.0 - h * cfg.nu * cfg.shift)
    return float(lfilter([1.0], [1.0, -contraction], defects).max())


def heat_gain(constants: HeatConstants, gamma_bar: float, delta: float, nu: float = 1.0) -> float:
    """
    rho > |CB| (pi^2 gamma_bar |CB| + (nu delta pi^2 + gamma_bar ||beta||) S)
          / (pi^2 |CB| - ||beta|| S),   S = ||xi'' + lambda xi||,
    returned with a 1e-9 relative bump.

    Raises:
        ConditionViolatedError: the denominator is not positive.
    """
    CB, beta, S = abs(constants.CB), constants.norm_beta, constants.norm_xi_shift
    denominator = PI2 * CB - beta * S
    if denominator <= 0.0:
        raise ConditionViolatedError(f'pi^2 |CB| - ||beta|| S = {denominator:.4g} <= 0')
    numerator = CB * (PI2 * gamma_bar * CB + (nu * delta * PI2 + gamma_bar * beta) * S)
    return numerator / denominator * (1.0 + 1e-9)


def heat_io_gain(CB: float, M: float, p_bar: float, gamma_bar: float, delta: float) -> float:
    """q = -(|CB| gamma_bar + p_bar + M gamma_bar + delta) / ((1 - M) CB)."""
    if M >= 1.0:
        raise ConditionViolatedError(f'memory bound M = {M:.4g} >= 1')
    return -(abs(CB) * gamma_bar + p_bar + M * gamma_bar + delta) / ((1.0 - M) * CB)


def l2_bound(constants: HeatConstants, q: float, gamma_sup: float, nu: float = 1.0) -> float:
    """Ultimate bound (|q| + ||gamma||_inf) ||beta|| / (nu pi^2) on ||x||_L2."""
    return (abs(q) + gamma_sup) * constants.norm_beta / (nu * PI2)


def decay_margin(constants: HeatConstants, nu: float = 1.0) -> float:
    """2 nu (S ||beta|| / |CB| - pi^2); negative means exponential decay of ||x||^2."""
    return 2.0 * nu * (constants.norm_xi_shift * constants.norm_beta / abs(constants.CB) - PI2)


def heat_equivalent_control(cfg: HeatConfig, traj: Trajectory, modes: HeatModes | None = None) -> np.ndarray:
    """u_eq(t) = -gamma(t) - nu <xi'', x(t)> / CB from the modal states."""
    modes = modes or heat_modes(cfg)
    CB = float(modes.b @ modes.xi)
    xi_second = -modes.lambdas * modes.xi
    gamma = cfg.gamma.on_grid(traj.times)[:, 0]
    return -gamma - cfg.nu * (traj.states @ xi_second) / CB


def heat_relay(cfg: HeatConfig, rho: float, modes: HeatModes | None = None) -> RelayLaw:
    """u = q sign(y) with q = -rho / CB on the modal output y = <xi, x>."""
    modes = modes or heat_modes(cfg)
    CB = float(modes.b @ modes.xi)
    return RelayLaw(gain=[[-rho / CB]], surface=SwitchingSurface.linear([modes.xi]))


def simulate_heat(
    cfg: HeatConfig,
    law: FeedbackLaw,
    h: float,
    horizon: float,
    t0: float = 0.0,
    scheme: Literal['euler', 'exponential'] = 'euler',
) -> Trajectory:
    """
    Integrate x_i' = -nu lambda_i x_i + b_i (u + gamma) for i = 1..N.

    With scheme='euler' each mode takes an explicit Euler step (needs
    h nu lambda_N < 2). With scheme='exponential' each mode is propagated
    exactly over a step with the input held constant.

    Returns:
        Trajectory: modal states, input u, output y and an `l2_norm` channel.

    Raises:
        StabilityError: explicit Euler with h nu lambda_N >= 2.
    """
    modes = heat_modes(cfg)
    rates = cfg.nu * modes.lambdas
    if scheme == 'euler':
        if h * rates[-1] >= 2.0:
            raise StabilityError(f'explicit Euler on {cfg.n_modes} modes needs h < {2.0 / rates[-1]:.3g}')
        decay = 1.0 - h * rates
        gain = h * modes.b
    elif scheme == 'exponential':
        decay = np.exp(-h * rates)
        gain = -np.expm1(-h * rates) / rates * modes.b
    else:
        raise InvalidParameterError(f'unknown modal scheme {scheme!r}')

    steps = int(np.floor(horizon / h + 1e-9))
    times = t0 + h * np.arange(steps + 1)
    gamma = cfg.gamma.on_grid(times)[:, 0]
    states = np.empty((steps + 1, cfg.n_modes))
    inputs = np.zeros((steps + 1, 1))
    states[0] = modes.x0
    for k in range(steps + 1):
        inputs[k] = law.pointwise(times[k], states[k])
        if k == steps:
            break
        states[k + 1] = decay * states[k] + gain * (inputs[k, 0] + gamma[k])
        if not np.all(np.isfinite(states[k + 1])):
            raise NonFiniteStateError(k + 1)
    logger.debug(f'simulate_heat: {cfg.n_modes} modes, {steps} steps, scheme={scheme}')
    traj = Trajectory(times=times, states=states, inputs=inputs, outputs=(states @ modes.xi)[:, None], h=h)
    return traj.with_aux(l2_norm=np.linalg.norm(states, axis=1))


def reconstruct(traj: Trajectory, z) -> np.ndarray:
    """x(t_k, z_j) = sum_i x_i(t_k) phi_i(z_j), shape (len(times), len(z))."""
    N = traj.states.shape[1]
    return traj.states @ mode_shape(np.arange(1, N + 1), z)


def reconstruction_frame(traj: Trajectory, z, every: int = 1) -> pd.DataFrame:
    """Long-format (t, z, x) table for surface plots, keeping every `every`-th time."""
    z = np.asarray(z, dtype=float)
    times = traj.times[::every]
    surface = reconstruct(traj, z)[::every]
    return pd.DataFrame(
        {
            't': np.repeat(times, z.size),
            'z': np.tile(z, times.size),
            'x': surface.reshape(-1),
        }
    )

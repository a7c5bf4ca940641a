import numpy as np
import pytest
from pydantic import ValidationError

from smide.lib.design import closed_loop_fields
from smide.lib.errors import ConditionViolatedError, DegenerateOutputError, InvalidParameterError, StabilityError
from smide.lib.fields import RelayLaw, SwitchingSurface
from smide.lib.heat import (
    PI2,
    HeatConfig,
    HeatConstants,
    Profile,
    check_shift_condition,
    compare_with_reported,
    decay_margin,
    heat_constants,
    heat_gain,
    heat_io_gain,
    heat_io_kernel,
    heat_modes,
    heat_plant,
    heat_relay,
    modal_project,
    profile,
    reconstruction_frame,
    reduction_error_bound,
    replay_reduced,
    simulate_heat,
)
from smide.lib.integrator import euler_ide
from smide.lib.models import HistoryMode, SimConfig
from smide.lib.signals import ConstantSignal

DEFAULT = HeatConfig()
PLATEAU = HeatConfig(beta=profile('plateau_bump'))


@pytest.fixture(scope='module')
def constants():
    return heat_constants(PLATEAU)


def test_constants_close_to_the_reference_values(constants):
    assert compare_with_reported(constants) == []
    assert constants.shift_source == 'analytic'
    # xi'' + pi^2 xi = pi^2 z (1 - z) - 2
    assert constants.norm_xi_shift == pytest.approx(np.sqrt(PI2**2 / 30.0 - 2.0 * PI2 / 3.0 + 4.0), rel=1e-6)


def test_shift_condition_and_decay(constants):
    shift = check_shift_condition(PLATEAU, constants)
    assert shift.holds
    assert shift.margin == pytest.approx(shift.rhs - shift.lhs)
    assert decay_margin(constants) < 0.0


def test_spectral_shift_norm_for_profiles_without_a_closed_form():
    cfg = HeatConfig(xi=Profile(kind='bump', lo=0.2, hi=0.8), n_modes=40)
    assert heat_constants(cfg).shift_source == 'spectral'


def test_parabola_first_coefficient():
    coefficients = modal_project(DEFAULT.x0, 3)
    # 10 z (1 - z) has c_1 = 40 sqrt(2) / pi^3 and no even modes
    assert coefficients[0] == pytest.approx(40.0 * np.sqrt(2.0) / np.pi**3, rel=1e-6)
    assert abs(coefficients[1]) < 1e-8


def test_profiles():
    assert profile('mode3').index == 3
    with pytest.raises(InvalidParameterError):
        profile('triangle')
    with pytest.raises(ValidationError):
        Profile(kind='bump', lo=0.6, hi=0.3)
    plateau = profile('plateau_bump')
    assert plateau(np.array([0.45]))[0] == pytest.approx(np.exp(-3e-4 / 0.0225))
    assert plateau(np.array([0.2, 0.3, 0.7]))[0] == 0.0


def test_config_validation():
    with pytest.raises(ValidationError):
        HeatConfig(nu=0.0)
    with pytest.raises(ValidationError):
        HeatConfig(n_modes=300)
    with pytest.raises(ValidationError):
        HeatConfig(shift=-1.0)


def test_gain_formulas(constants):
    rho = heat_gain(constants, 0.5, 0.1)
    assert rho > 0.5 * abs(constants.CB)
    with pytest.raises(ConditionViolatedError):
        heat_gain(HeatConstants(CB=0.1, norm_beta=1.0, norm_xi_shift=1.0), 0.5, 0.1)
    assert heat_io_gain(-2.0, 0.5, 0.0, 0.5, 0.1) == pytest.approx((2.0 * 0.5 + 0.25 + 0.1) / (0.5 * 2.0))
    with pytest.raises(ConditionViolatedError):
        heat_io_gain(1.0, 1.0, 0.0, 0.5, 0.1)


def test_io_kernel_terms():
    io = heat_io_kernel(DEFAULT)
    modes = heat_modes(DEFAULT)
    assert len(io.kernel.rates) == DEFAULT.n_modes
    assert io.CB == pytest.approx(float(modes.b @ modes.xi))
    assert io.y0 == pytest.approx(float(modes.xi @ modes.x0))
    assert io.drift == pytest.approx(-PI2)
    # the first mode is unshifted by the default lambda = pi^2
    assert io.kernel.matrices[0][0][0] == pytest.approx(0.0, abs=1e-12)


def test_explicit_euler_stability_limit():
    with pytest.raises(StabilityError):
        simulate_heat(DEFAULT, heat_relay(DEFAULT, 1.0), 1e-3, 0.1)
    with pytest.raises(InvalidParameterError):
        simulate_heat(DEFAULT, heat_relay(DEFAULT, 1.0), 1e-3, 0.1, scheme='implicit')


def test_exponential_scheme_free_response():
    cfg = HeatConfig(n_modes=5, gamma=ConstantSignal(value=[0.0]))
    traj = simulate_heat(cfg, heat_relay(cfg, 0.0), 1e-3, 0.2, scheme='exponential')
    modes = heat_modes(cfg)
    np.testing.assert_allclose(traj.states[-1], modes.x0 * np.exp(-0.2 * modes.lambdas), rtol=1e-9, atol=1e-14)
    np.testing.assert_allclose(traj.aux['l2_norm'], np.linalg.norm(traj.states, axis=1))


def test_one_mode_reduction_matches_the_modal_run():
    cfg = HeatConfig(n_modes=1)
    h, horizon, rho = 1e-3, 1.0, 1.0
    modal = simulate_heat(cfg, heat_relay(cfg, rho), h, horizon, scheme='euler')

    plant = heat_plant(cfg, horizon, h)
    law = RelayLaw(gain=[[-rho / float(plant.CB[0, 0])]], surface=SwitchingSurface.linear([[1.0]]))
    f, f_tilde = closed_loop_fields(plant, law)
    sim = SimConfig(h=h, horizon=horizon, x0=[heat_io_kernel(cfg).y0], history_mode=HistoryMode.RECURRENCE)
    reduced = euler_ide(f, plant.kernel, f_tilde, sim, plant.C)

    y_modal, y_reduced = modal.outputs[:, 0], reduced.outputs[:, 0]
    # identical recursions until the relay starts switching
    first = int(np.flatnonzero(np.abs(y_modal) < 1e-2)[0])
    assert first > 0
    np.testing.assert_allclose(y_reduced[:first], y_modal[:first], rtol=1e-9)


def test_reduced_replay_stays_within_the_discretization_bound():
    cfg = HeatConfig()
    h, horizon = 1e-3, 1.0
    modal = simulate_heat(cfg, heat_relay(cfg, 1.0), h, horizon, scheme='exponential')
    replay = replay_reduced(cfg, modal)
    assert replay.steps == modal.steps

    w_sup = float(np.abs(modal.inputs[:, 0] + cfg.gamma.on_grid(modal.times)[:, 0]).max())
    bound = reduction_error_bound(cfg, h, modal.steps, w_sup)
    assert 0.0 < bound < 1e-2
    assert np.abs(replay.outputs[:, 0] - modal.outputs[:, 0]).max() <= 1e-6 + bound


def test_reduction_error_bound_shrinks_with_the_step():
    cfg = HeatConfig(beta=profile('plateau_bump'), n_modes=10)
    assert reduction_error_bound(cfg, 1e-3, 0, 1.0) == 0.0
    coarse = reduction_error_bound(cfg, 2e-3, 250, 1.0)
    fine = reduction_error_bound(cfg, 1e-3, 500, 1.0)
    assert fine < coarse


def test_replay_needs_applied_inputs():
    cfg = HeatConfig(n_modes=3)
    modal = simulate_heat(cfg, heat_relay(cfg, 1.0), 1e-3, 0.01, scheme='exponential')
    with pytest.raises(InvalidParameterError):
        replay_reduced(cfg, modal.model_copy(update={'inputs': None}))


def test_literal_bump_misses_the_reference_constants():
    constants = heat_constants(DEFAULT)
    messages = compare_with_reported(constants)
    assert sorted(message.split(' ')[0] for message in messages) == ['CB', 'norm_beta']
    assert 0.0 < constants.CB < 1e-15
    # the ratio ||beta|| / CB is scale free, so the design condition still holds
    assert check_shift_condition(DEFAULT, constants).holds


def test_tiny_input_gain_still_builds_a_plant():
    plant = heat_plant(DEFAULT, 0.1, 1e-3)
    assert 0.0 < float(plant.CB[0, 0]) < 1e-15


@pytest.mark.parametrize('i', [1, 2, 3, 4, 5, 6, 7])
def test_parabola_projection(i):
    coefficient = modal_project(Profile(kind='parabola', scale=1.0), 7)[i - 1]
    if i % 2:
        assert coefficient == pytest.approx(4.0 * np.sqrt(2.0) / (np.pi**3 * i**3), rel=1e-6)
    else:
        assert abs(coefficient) < 1e-10


def test_gain_reduces_to_gamma_cb_when_xi_is_the_first_mode():
    constants = heat_constants(HeatConfig(xi=profile('mode1'), beta=profile('plateau_bump')))
    assert constants.norm_xi_shift == 0.0
    assert heat_gain(constants, 0.5, 0.1) == pytest.approx(0.5 * abs(constants.CB) * (1.0 + 1e-9), rel=1e-12)


def test_orthogonal_profiles_are_degenerate():
    with pytest.raises(DegenerateOutputError):
        heat_constants(HeatConfig(beta=profile('mode2'), xi=profile('mode1')))


def test_first_mode_output_has_no_memory():
    io = heat_io_kernel(HeatConfig(xi=profile('mode1'), beta=profile('plateau_bump')))
    assert np.abs(np.asarray(io.kernel.matrices)).max() <= 1e-9
    assert np.abs(np.asarray(io.p.weights)).max() <= 1e-9
    assert np.abs(io.p.on_grid(np.linspace(0.0, 1.0, 11))).max() <= 1e-9


@pytest.mark.parametrize('scheme', ['euler', 'exponential'])
def test_free_modal_energy_never_increases(scheme):
    cfg = HeatConfig(n_modes=10, gamma=ConstantSignal(value=[0.0]))
    traj = simulate_heat(cfg, heat_relay(cfg, 0.0), 1e-3, 0.5, scheme=scheme)
    assert np.all(np.diff(np.abs(traj.states), axis=0) <= 0.0)
    assert np.all(np.diff(traj.aux['l2_norm']) <= 0.0)


def test_reconstruction_frame():
    cfg = HeatConfig(n_modes=5)
    traj = simulate_heat(cfg, heat_relay(cfg, 1.0), 1e-3, 0.05, scheme='exponential')
    z = np.linspace(0.0, 1.0, 11)
    frame = reconstruction_frame(traj, z, every=10)
    assert list(frame.columns) == ['t', 'z', 'x']
    assert len(frame) == 6 * 11
    assert np.abs(frame.loc[frame.z == 0.0, 'x']).max() < 1e-12

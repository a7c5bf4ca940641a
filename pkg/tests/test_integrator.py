import numpy as np
import pytest

from smide.lib.errors import (
    InvalidParameterError,
    KernelKindError,
    NonFiniteStateError,
    StabilityError,
)
from smide.lib.integrator import (
    AugmentScheme,
    augment_exponential,
    euler_ide,
    low_pass_filter,
    memory_integrals,
    sliding_indicator,
)
from smide.lib.kernels import ConstantKernel, ExponentialSeriesKernel, ZeroKernel
from smide.lib.models import HistoryMode, SimConfig
from smide.lib.signals import ConstantSignal


def decay(t, x):
    return -x


def unit(t, x):
    return np.ones_like(x)


# x' = -x + int exp(-(t - tau)) x(tau) dtau, x(0) = 1 has x(t) = (1 + exp(-2t)) / 2.
EXP_KERNEL = ExponentialSeriesKernel(n=1, rates=[1.0], matrices=[[[1.0]]])


def exact(t):
    return 0.5 * (1.0 + np.exp(-2.0 * t))


def identity(t, x):
    return x


def test_zero_kernel_is_explicit_euler():
    cfg = SimConfig(h=0.01, horizon=1.0, x0=[1.0])
    traj = euler_ide(decay, ZeroKernel(n=1), decay, cfg)
    np.testing.assert_allclose(traj.states[:, 0], (1.0 - 0.01) ** np.arange(101), rtol=1e-12)
    assert traj.inputs is None


def test_constant_kernel_rectangle_memory():
    h = 0.01
    cfg = SimConfig(h=h, horizon=1.0, x0=[0.0])
    traj = euler_ide(lambda t, x: np.zeros(1), ConstantKernel(matrix=[[1.0]]), unit, cfg)
    k = np.arange(101)
    # x_k = h^2 k (k + 1) / 2
    np.testing.assert_allclose(traj.states[:, 0], h**2 * k * (k + 1) / 2, atol=1e-12)


def test_recurrence_mode_matches_full_history():
    full = SimConfig(h=0.01, horizon=2.0, x0=[1.0])
    recurrence = full.model_copy(update={'history_mode': HistoryMode.RECURRENCE})
    a = euler_ide(decay, EXP_KERNEL, identity, full)
    b = euler_ide(decay, EXP_KERNEL, identity, recurrence)
    np.testing.assert_allclose(a.states, b.states, rtol=1e-12, atol=1e-14)


def test_recurrence_mode_needs_exponential_series():
    cfg = SimConfig(h=0.01, horizon=1.0, x0=[1.0], history_mode=HistoryMode.RECURRENCE)
    with pytest.raises(KernelKindError):
        euler_ide(decay, ConstantKernel(matrix=[[1.0]]), identity, cfg)


def test_exponential_augment_reproduces_rectangle_memory():
    cfg = SimConfig(h=0.01, horizon=2.0, x0=[1.0])
    ide = euler_ide(decay, EXP_KERNEL, identity, cfg)
    augmented = augment_exponential(EXP_KERNEL, decay, identity, cfg, scheme=AugmentScheme.EXPONENTIAL)
    np.testing.assert_allclose(ide.states, augmented.states, rtol=1e-12, atol=1e-14)


def test_euler_and_augment_converge_at_first_order():
    steps = [0.02, 0.01, 0.005]
    ide_errors, augment_errors, gaps = [], [], []
    for h in steps:
        cfg = SimConfig(h=h, horizon=1.0, x0=[1.0])
        ide = euler_ide(decay, EXP_KERNEL, identity, cfg)
        augmented = augment_exponential(EXP_KERNEL, decay, identity, cfg)
        ide_errors.append(abs(ide.states[-1, 0] - exact(1.0)))
        augment_errors.append(abs(augmented.states[-1, 0] - exact(1.0)))
        gaps.append(np.abs(ide.states - augmented.states).max())
    for errors in (ide_errors, augment_errors):
        ratios = np.array(errors[:-1]) / np.array(errors[1:])
        assert np.all((ratios >= 1.7) & (ratios <= 2.3))
    assert gaps[0] > gaps[1] > gaps[2]


def test_augment_euler_scheme_stability_limit():
    stiff = ExponentialSeriesKernel(n=1, rates=[500.0], matrices=[[[1.0]]])
    cfg = SimConfig(h=0.01, horizon=1.0, x0=[1.0])
    with pytest.raises(StabilityError):
        augment_exponential(stiff, decay, identity, cfg)


def test_non_finite_state_reports_the_step():
    cfg = SimConfig(h=0.1, horizon=1.0, x0=[1.0])
    with pytest.raises(NonFiniteStateError) as info:
        euler_ide(lambda t, x: np.array([np.inf]), ZeroKernel(n=1), decay, cfg)
    assert info.value.step == 1


def test_kernel_dimension_must_match_state():
    cfg = SimConfig(h=0.1, horizon=1.0, x0=[1.0, 0.0])
    with pytest.raises(InvalidParameterError):
        euler_ide(decay, ZeroKernel(n=1), decay, cfg)


def test_memory_integrals_matches_running_sum():
    times = 0.1 * np.arange(11)
    values = np.ones(11)
    integrals = memory_integrals(ConstantKernel(matrix=[[2.0]]), times, values, 0.1)
    np.testing.assert_allclose(integrals[:, 0], 0.2 * np.arange(1, 12))


def test_low_pass_filter_step_response():
    h, eps = 1e-3, 0.01
    filtered = low_pass_filter(np.ones((50, 1)), eps, h)
    np.testing.assert_allclose(filtered[:, 0], 1.0 - (1.0 - h / eps) ** np.arange(50), atol=1e-12)
    with pytest.raises(StabilityError):
        low_pass_filter(np.ones(5), 1e-4, 1e-3)


def test_sliding_indicator_of_a_memoryless_loop():
    cfg = SimConfig(h=0.01, horizon=0.5, x0=[1.0])
    traj = euler_ide(decay, ZeroKernel(n=1), decay, cfg)
    traj = traj.model_copy(update={'inputs': np.full((51, 1), 2.0)})
    one = np.eye(1)
    gamma = ConstantSignal(value=[-0.5])
    # without memory the indicator is CB (u_eps + gamma)
    delta = sliding_indicator(traj, ZeroKernel(n=1), one, one, one, gamma, np.full(51, 0.5))
    np.testing.assert_allclose(delta, np.zeros((51, 1)), atol=1e-15)


def test_low_pass_filter_damps_chatter():
    h, eps = 1e-3, 1e-2
    alternating = (-1.0) ** np.arange(1000)[:, None]
    filtered = low_pass_filter(alternating, eps, h)
    ratio = h / eps
    # steady alternation of amplitude r / (2 - r)
    assert np.abs(filtered[200:]).max() <= 0.06
    assert np.abs(filtered[-1, 0]) == pytest.approx(ratio / (2.0 - ratio), rel=1e-6)

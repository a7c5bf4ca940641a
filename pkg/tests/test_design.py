import numpy as np
import pytest

from smide.lib.design import (
    bounded_delay_stability,
    closed_loop_fields,
    design,
    design_gain,
    extract_lambda,
    projector,
    reaching_time_bound,
    sliding_mode_matrix,
    smc_feedback,
    solve_lmi,
)
from smide.lib.errors import InfeasibleDesignError, InvalidParameterError, RankError
from smide.lib.kernels import ZeroKernel
from smide.lib.models import LinearIdePlant

from tests.conftest import DELAY_A, DELAY_B, DELAY_C, DELAY_X0


def test_lambda_of_the_delay_plant_vanishes():
    np.testing.assert_allclose(extract_lambda(DELAY_A, DELAY_C), [[0.0]], atol=1e-12)
    np.testing.assert_array_equal(solve_lmi(np.zeros((1, 1))), np.eye(1))


def test_extract_lambda_rejects_non_invariant_outputs():
    with pytest.raises(InfeasibleDesignError) as info:
        extract_lambda([[0.0, 1.0], [0.0, 0.0]], [[1.0, 0.0]])
    assert info.value.diagnostics
    with pytest.raises(RankError):
        extract_lambda(np.eye(2), [[1.0, 0.0], [2.0, 0.0]])


def test_solve_lmi_uses_lyapunov_for_hurwitz_lambda():
    Lambda = np.array([[-1.0, 10.0], [0.0, -1.0]])
    P = solve_lmi(Lambda)
    assert np.linalg.eigvalsh(P).min() > 0.0
    assert np.linalg.eigvalsh(Lambda.T @ P + P @ Lambda).max() <= 1e-10


def test_solve_lmi_infeasible_for_unstable_lambda():
    with pytest.raises(InfeasibleDesignError):
        solve_lmi([[1.0]])


def test_projector_algebra_on_the_delay_plant():
    Pi = projector(DELAY_B, DELAY_C)
    np.testing.assert_allclose(Pi @ Pi, Pi, atol=1e-12)
    np.testing.assert_allclose(Pi @ DELAY_B, 0.0, atol=1e-12)
    np.testing.assert_allclose(DELAY_C @ Pi, 0.0, atol=1e-12)


def test_projector_algebra_on_random_instances():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 100:
        B = rng.standard_normal((4, 2))
        C = rng.standard_normal((2, 4))
        if np.linalg.cond(C @ B) > 50.0:
            continue
        Pi = projector(B, C)
        tol = 1e-12 * max(1.0, np.linalg.norm(Pi) ** 2)
        assert np.abs(Pi @ Pi - Pi).max() <= tol
        assert np.abs(Pi @ B).max() <= tol * max(1.0, np.linalg.norm(B))
        assert np.abs(C @ Pi).max() <= tol * max(1.0, np.linalg.norm(C))
        checked += 1


def test_sliding_mode_matrix():
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [2.0, -1.0, 1.0]])
    B = np.array([[0.0], [0.0], [1.0]])
    C = np.array([[2.0, 3.0, 1.0]])
    expected = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, -2.0, -3.0]])
    np.testing.assert_allclose(sliding_mode_matrix(A, B, C), expected, atol=1e-12)


def test_bounded_delay_stability_of_the_delay_plant():
    stable, remaining = bounded_delay_stability(DELAY_A, np.zeros((1, 1)))
    assert stable
    np.testing.assert_allclose(np.sort(remaining.real), [-2.0 - np.sqrt(3.0), -2.0 + np.sqrt(3.0)], atol=1e-8)


def test_design_with_unit_memory_needs_an_override(plant):
    result = design(plant, 1e-3, 3.0, delta=0.1, x0=DELAY_X0, rho_override=4.0)
    assert not result.feasible
    assert result.M == pytest.approx(1.0, abs=2e-3)
    assert result.rho == 4.0
    assert result.rho_source == 'override'
    assert any('memory bound' in note for note in result.diagnostics)
    # ||C x0|| = 3.2
    assert result.T_max == pytest.approx(32.0)


def test_design_with_halved_memory_uses_the_formula(feasible_plant):
    result = design(feasible_plant, 1e-3, 3.0, delta=0.1, x0=DELAY_X0)
    assert result.feasible
    assert result.rho_source == 'formula'
    # (|CB| gamma_bar (1 + M) + delta) / (1 - M) with |CB| = 2, gamma_bar = 0.5, M = 0.5
    assert result.rho == pytest.approx(3.2, rel=1e-2)
    assert 'feasible: True' in result.summary()


def test_design_reports_a_low_override(feasible_plant):
    result = design(feasible_plant, 1e-3, 3.0, delta=0.1, rho_override=1.0)
    assert result.rho == 1.0
    assert any('below the closed-form' in note for note in result.diagnostics)


def test_design_reports_infeasible_lambda():
    plant = LinearIdePlant(
        A=[[0.0, 1.0], [0.0, 0.0]],
        B=[[0.0], [1.0]],
        B_tilde=[[0.0], [1.0]],
        C=[[1.0, 1.0]],
        kernel=ZeroKernel(n=2),
    )
    result = design(plant, 1e-2, 1.0)
    assert not result.feasible
    assert result.rho is None
    assert result.diagnostics


def test_design_gain_rejects_large_memory(feasible_plant):
    with pytest.raises(InfeasibleDesignError):
        design_gain(feasible_plant, np.eye(1), 1.0, 0.1)
    with pytest.raises(InvalidParameterError):
        design_gain(feasible_plant, np.eye(1), 0.5, 0.0)


def test_reaching_time_bound():
    assert reaching_time_bound(DELAY_X0, DELAY_C, np.eye(1), 0.5) == pytest.approx(6.4)


def test_closed_loop_fields_share_the_law(plant):
    law = smc_feedback(4.0, plant.CB, np.eye(1), plant.C)
    f, f_tilde = closed_loop_fields(plant, law)
    assert f.feedback is f_tilde.feedback
    x = np.array(DELAY_X0)
    # gamma(0) = 0.5, u = -4 (-1/2) sign(3.2) = 2
    np.testing.assert_allclose(f(0.0, x), DELAY_A @ x + DELAY_B[:, 0] * 2.5)
    np.testing.assert_allclose(f_tilde(0.0, x), DELAY_B[:, 0] * 2.5)

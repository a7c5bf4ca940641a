import numpy as np
import pytest
from pydantic import ValidationError

from smide.lib.errors import InvalidParameterError, OffSurfaceError
from smide.lib.fields import (
    FeedbackLaw,
    InputSelection,
    PiecewiseAffineField,
    RelayLaw,
    SignSelection,
    SlidingKind,
    SwitchingSurface,
    SwitchKind,
    UnitVectorLaw,
    equivalent_control_algebraic,
    filippov_set,
    first_kind_in_second_kind,
    resolve_input,
    sign_bar,
    sliding_status,
    switching_status,
    utkin_sets,
)

# Linear plant with a nominal-plus-relay law, C B = 1.
A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [2.0, -1.0, 1.0]])
B = np.array([[0.0], [0.0], [1.0]])
C = np.array([[2.0, 3.0, 1.0]])

# Two-channel plant, C B = I, relay gain rotated.
A2 = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 1.0], [0.0, 1.0, -1.0]])
B2 = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
C2 = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
ROTATION = np.array([[-1.0, 2.0], [-2.0, -1.0]])


def relay_field(A, B, C, gain) -> PiecewiseAffineField:
    K = np.linalg.solve(C @ B, C @ A)
    law = RelayLaw(gain=gain, surface=SwitchingSurface.linear(C), nominal=lambda t, x: -K @ x)
    return PiecewiseAffineField(a=lambda t, x: A @ x, b=lambda t, x: B, feedback=law)


def two_relays() -> PiecewiseAffineField:
    law = RelayLaw(gain=[[-1.0], [-1.0]], surface=SwitchingSurface.linear([[1.0, 0.0]]))
    return PiecewiseAffineField(a=lambda t, x: np.zeros(2), b=lambda t, x: np.diag([1.0, 0.0]), feedback=law)


def test_linear_surface_value_and_gradient():
    surface = SwitchingSurface.linear(C)
    x = np.array([1.0, -1.0, 0.5])
    np.testing.assert_allclose(surface.value(x), [-0.5])
    assert surface.gradient_error(x) < 1e-8
    assert surface.contains([1.0, 0.0, -2.0])


def test_relay_sign_of_zero_is_zero():
    law = RelayLaw(gain=[[-2.0]], surface=SwitchingSurface.linear([[1.0]]))
    np.testing.assert_array_equal(law.pointwise(0.0, np.array([0.0])), [0.0])
    np.testing.assert_array_equal(law.pointwise(0.0, np.array([0.3])), [-2.0])


def test_relay_gain_must_match_surface():
    with pytest.raises(ValidationError):
        RelayLaw(gain=[[1.0, 1.0]], surface=SwitchingSurface.linear([[1.0]]))


def test_filippov_set_on_the_switching_set():
    field = two_relays()
    regularized = filippov_set(field, 0.0, [0.0, 0.0])
    assert regularized.kind == 'polytope'
    assert regularized.contains([0.0, 0.0])
    assert regularized.contains([0.5, 0.0])
    assert not regularized.contains([2.0, 0.0])
    # away from the surface the set is a single velocity
    assert filippov_set(field, 0.0, [1.0, 0.0]).kind == 'singleton'


def test_utkin_sets_of_two_relays_of_one_sign():
    field = two_relays()
    first, second = utkin_sets(field, 0.0, np.zeros(2))
    assert not first.contains_input([0.0, 1.0])
    assert first.contains_input([0.5, 0.5])
    assert second.contains_input([0.0, 1.0])
    assert first_kind_in_second_kind(field, 0.0, np.zeros(2))


def test_equivalent_control_of_nominal_plus_relay():
    field = relay_field(A, B, C, [[-2.0]])
    x = np.array([1.0, 0.0, -2.0])
    u_eq = equivalent_control_algebraic(field, 0.0, x)
    np.testing.assert_allclose(u_eq, -np.linalg.solve(C @ B, C @ A @ x))
    with pytest.raises(OffSurfaceError):
        equivalent_control_algebraic(field, 0.0, np.array([1.0, 0.0, 0.0]))


def test_sliding_status_of_nominal_plus_relay():
    field = relay_field(A, B, C, [[-2.0]])
    x = np.array([1.0, 0.0, -2.0])
    status = sliding_status(field, 0.0, x)
    assert status.kind is SlidingKind.SLIDING
    # u_eq equals the nominal term, the centre of the relay interval
    assert status.margin == pytest.approx(1.0)
    A_s = A - B @ np.linalg.solve(C @ B, C @ A)
    np.testing.assert_allclose(status.f0, A_s @ x, atol=1e-12)


def test_sliding_status_with_a_narrow_box():
    field = relay_field(A, B, C, [[-2.0]])
    x = np.array([1.0, 0.0, -2.0])
    u_eq = equivalent_control_algebraic(field, 0.0, x)[0]
    status = sliding_status(field, 0.0, x, U_box=([u_eq + 1.0], [u_eq + 2.0]))
    assert status.kind is SlidingKind.NO_SLIDING
    assert status.f0 is None


def test_rotated_relay_crosses_off_the_origin_and_slides_at_it():
    field = relay_field(A2, B2, C2, ROTATION)
    x = np.linalg.pinv(C2) @ np.array([0.0, 1.0])
    kind, plus, minus = switching_status(field, 0.0, x, component=0)
    assert kind is SwitchKind.CROSSING
    assert plus == pytest.approx(1.0)
    assert minus == pytest.approx(3.0)
    assert sliding_status(field, 0.0, np.zeros(3)).kind is SlidingKind.SLIDING


def test_unit_vector_law():
    law = UnitVectorLaw(rho=4.0, CB=[[-2.0]], P=[[1.0]], C=[[1.0, 0.0, -2.0]])
    np.testing.assert_allclose(law.pointwise(0.0, np.array([1.0, 0.0, 0.0])), [2.0])
    np.testing.assert_array_equal(law.pointwise(0.0, np.zeros(3)), [0.0])
    assert law.bound() == pytest.approx(2.0)
    with pytest.raises(ValidationError):
        UnitVectorLaw(rho=-1.0, CB=[[1.0]], P=[[1.0]], C=[[1.0]])


def test_sign_selection_replaces_zero_components():
    field = two_relays()
    u = resolve_input(field, 0.0, np.zeros(2), SignSelection(values=[0.5]))
    np.testing.assert_allclose(u, [-0.5, -0.5])
    with pytest.raises(ValidationError):
        SignSelection(values=[1.5])


def test_input_selection_checks_admissibility():
    field = two_relays()
    origin = np.zeros(2)
    u = resolve_input(field, 0.0, origin, InputSelection(values=[0.0, 1.0], set_kind='second'))
    np.testing.assert_array_equal(u, [0.0, 1.0])
    with pytest.raises(InvalidParameterError):
        resolve_input(field, 0.0, origin, InputSelection(values=[0.0, 1.0], set_kind='first'))
    # off the switching set the pointwise law applies
    np.testing.assert_array_equal(
        resolve_input(field, 0.0, np.array([1.0, 0.0]), InputSelection(values=[0.0, 1.0])), [-1.0, -1.0]
    )


def test_sign_bar():
    assert sign_bar(0.0) == (-1.0, 1.0)
    assert sign_bar(2.5) == (1.0, 1.0)
    # strict sign, no dead band
    assert sign_bar(-1e-300) == (-1.0, -1.0)


def test_feedback_law_base_is_abstract():
    with pytest.raises(TypeError):
        FeedbackLaw()

    class Unwired(FeedbackLaw):
        @property
        def input_dim(self) -> int:
            return 1

    with pytest.raises(TypeError):
        Unwired()


def test_sliding_status_ignores_the_scale_of_the_surface():
    field = relay_field(A, B, C, [[-2.0]])
    x = np.array([1.0, 0.0, -2.0])
    doubled = relay_field(A, B, 2.0 * C, [[-2.0]])
    base, scaled = sliding_status(field, 0.0, x), sliding_status(doubled, 0.0, x)
    assert base.kind == scaled.kind == SlidingKind.SLIDING
    np.testing.assert_allclose(scaled.f0, base.f0, atol=1e-12)


def test_opposed_input_directions_slide_at_rest():
    law = RelayLaw(gain=[[-1.0]], surface=SwitchingSurface.linear([[1.0, 0.0]]))
    field = PiecewiseAffineField(a=lambda t, x: np.zeros(2), b=lambda t, x: np.array([[1.0], [-1.0]]), feedback=law)
    status = sliding_status(field, 0.0, np.array([0.0, 0.5]))
    assert status.kind == SlidingKind.SLIDING
    np.testing.assert_allclose(status.f0, [0.0, 0.0], atol=1e-12)


def test_box_image_of_the_nominal_plus_relay_field():
    field = relay_field(A, B, C, [[-2.0]])
    x = np.array([1.0, 0.0, -2.0])
    K = np.linalg.solve(C @ B, C @ A)
    centre = A @ x - B @ (K @ x)
    image = filippov_set(field, 0.0, x)
    assert image.kind == 'polytope'
    vertices = image.image_vertices()
    vertices = vertices[np.argsort(vertices[:, 2])]
    np.testing.assert_allclose(vertices, [centre - 2.0 * B[:, 0], centre + 2.0 * B[:, 0]], atol=1e-12)
    assert image.contains(centre + 1.5 * B[:, 0])
    assert not image.contains(centre + 2.5 * B[:, 0])
    assert not image.contains(centre + np.array([1e-3, 0.0, 0.0]))

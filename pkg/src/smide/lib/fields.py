"""
Discontinuous affine-in-control vector fields f = a(t,x) + b(t,x) u(t,x),
their Filippov / Utkin regularizations and the sliding and switching
checks on a smooth level-set surface s(x) = 0.
"""

from __future__ import annotations

import itertools
import logging
from abc import abstractmethod
from enum import Enum
from typing import Annotated, Callable, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import linprog

from smide.lib.errors import (
    InvalidParameterError,
    OffSurfaceError,
    SingularMatrixError,
    SmideError,
    UnsupportedFeedbackError,
)
from smide.lib.kernels import Matrix
from smide.lib.linalg import (
    as_matrix,
    as_vector,
    checked_inverse,
    p_induced_norm,
    p_norm,
    sqrt_pair,
)
from smide.lib.signals import Signal

logger = logging.getLogger(__name__)

AMBIGUOUS_BAND = 1e-6


def surface_tol(x: np.ndarray) -> float:
    """On-surface tolerance 1e-8 (1 + ||x||)."""
    return 1e-8 * (1.0 + float(np.linalg.norm(x)))


def sign_bar(y: float) -> tuple[float, float]:
    """Set-valued sign as a closed interval (lo, hi)."""
    if y > 0.0:
        return (1.0, 1.0)
    if y < 0.0:
        return (-1.0, -1.0)
    return (-1.0, 1.0)


class SwitchingSurface(BaseModel):
    """
    Smooth level set {x : s(x) = 0} with its Jacobian.

    Attributes:
        s: x -> (k,) vector.
        grad: x -> (k, n) Jacobian of s.
        k: number of components.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    s: Callable
    grad: Callable
    k: int = 1

    @classmethod
    def linear(cls, C) -> 'SwitchingSurface':
        C = as_matrix(C, 'C')
        return cls(s=lambda x: C @ x, grad=lambda x: C, k=C.shape[0])

    def value(self, x) -> np.ndarray:
        return as_vector(self.s(np.asarray(x, dtype=float)))

    def jacobian(self, x) -> np.ndarray:
        return as_matrix(self.grad(np.asarray(x, dtype=float)))

    def scaled(self, factor: float) -> 'SwitchingSurface':
        return SwitchingSurface(
            s=lambda x: factor * self.value(x),
            grad=lambda x: factor * self.jacobian(x),
            k=self.k,
        )

    def contains(self, x) -> bool:
        return float(np.linalg.norm(self.value(x))) <= surface_tol(np.asarray(x))

    def gradient_error(self, x, eps: float = 1e-6) -> float:
        """Largest deviation between `grad` and central differences of `s`."""
        x = np.asarray(x, dtype=float)
        J = self.jacobian(x)
        fd = np.empty_like(J)
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = eps
            fd[:, i] = (self.value(x + e) - self.value(x - e)) / (2 * eps)
        return float(np.abs(J - fd).max())


class FeedbackLaw(BaseModel):
    """Base class of feedback laws u(t, x)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @property
    @abstractmethod
    def input_dim(self) -> int: ...

    @abstractmethod
    def pointwise(self, t: float, x: np.ndarray) -> np.ndarray:
        """The simulated value, with sign(0) = 0."""

    def is_discontinuous_at(self, t: float, x: np.ndarray) -> bool:
        return False


class RelayLaw(FeedbackLaw):
    """
    Componentwise relay u = u_nom(t, x) + q(t) L sign(s(x)).

    `gain` is the (m, k) matrix L; `nominal` an optional continuous map
    (t, x) -> (m,); `gain_scale` an optional scalar schedule q(t).
    """

    gain: Matrix
    surface: SwitchingSurface
    nominal: Callable | None = None
    gain_scale: Signal | None = None

    @model_validator(mode='after')
    def check_gain(self):
        if not np.all(np.isfinite(self.gain)):
            raise ValueError('relay gain must be finite')
        if self.gain.shape[1] != self.surface.k:
            raise ValueError(f'gain has {self.gain.shape[1]} columns, surface has {self.surface.k} components')
        return self

    @property
    def input_dim(self) -> int:
        return self.gain.shape[0]

    def _scale(self, t: float) -> float:
        return 1.0 if self.gain_scale is None else float(self.gain_scale(t)[0])

    def nominal_value(self, t, x) -> np.ndarray:
        if self.nominal is None:
            return np.zeros(self.input_dim)
        return as_vector(self.nominal(t, x))

    def from_sign(self, t, x, v) -> np.ndarray:
        return self.nominal_value(t, x) + self._scale(t) * (self.gain @ np.asarray(v, dtype=float))

    def pointwise(self, t, x):
        return self.from_sign(t, x, np.sign(self.surface.value(x)))

    def active(self, x) -> np.ndarray:
        """Mask of surface components within tolerance of zero."""
        return np.abs(self.surface.value(x)) <= surface_tol(np.asarray(x))

    def is_discontinuous_at(self, t, x):
        return bool(self.active(x).any())

    def sign_vertices(self, x) -> np.ndarray:
        """All sign vectors of the regularized relay at x, shape (V, k)."""
        sign = np.sign(self.surface.value(x))
        active = self.active(x)
        choices = [(-1.0, 1.0) if on else (float(sg),) for sg, on in zip(sign, active, strict=True)]
        return np.array(list(itertools.product(*choices)))

    def input_vertices(self, t, x) -> np.ndarray:
        return np.array([self.from_sign(t, x, v) for v in self.sign_vertices(x)])


class UnitVectorLaw(FeedbackLaw):
    """
    u = -rho (CB)^-1 y / ||y||_P with y = C x; u = 0 at y = 0.

    The regularized set at y = 0 is the image of the closed P-unit ball,
    {-rho (CB)^-1 v : ||v||_P <= 1}.
    """

    rho: float
    CB: Matrix
    P: Matrix
    C: Matrix

    @model_validator(mode='after')
    def check_data(self):
        if not (np.isfinite(self.rho) and self.rho > 0.0):
            raise ValueError('rho must be positive and finite')
        checked_inverse(self.CB, 'CB')
        return self

    @property
    def input_dim(self) -> int:
        return self.CB.shape[1]

    @property
    def surface(self) -> SwitchingSurface:
        return SwitchingSurface.linear(self.C)

    def of_output(self, y) -> np.ndarray:
        y = as_vector(y)
        norm = p_norm(y, self.P)
        if norm == 0.0:
            return np.zeros(self.input_dim)
        return -self.rho * np.linalg.solve(self.CB, y / norm)

    def pointwise(self, t, x):
        return self.of_output(self.C @ x)

    def is_discontinuous_at(self, t, x):
        return p_norm(self.C @ x, self.P) <= surface_tol(np.asarray(x))

    def ball_shape(self) -> np.ndarray:
        """Matrix E with {E w : ||w|| <= 1} the regularized input set at y = 0."""
        _, inv_half = sqrt_pair(self.P)
        return -self.rho * np.linalg.solve(self.CB, inv_half)

    def bound(self) -> float:
        """rho ||(CB)^-1||_P, an upper bound on ||u||_P."""
        return self.rho * p_induced_norm(np.linalg.inv(self.CB), self.P)


class ContinuousLaw(FeedbackLaw):
    """An arbitrary continuous map (t, x) -> u."""

    fn: Callable
    m: int = 1

    @property
    def input_dim(self) -> int:
        return self.m

    def pointwise(self, t, x):
        return as_vector(self.fn(t, x))


class PiecewiseAffineField(BaseModel):
    """
    f(t, x) = a(t, x) + b(t, x) u(t, x) for a discontinuous feedback u.

    a and b are the caller's continuous maps; `surface` defaults to the
    feedback's own switching surface.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    a: Callable
    b: Callable
    feedback: FeedbackLaw
    surface: SwitchingSurface | None = None

    @model_validator(mode='after')
    def default_surface(self):
        if self.surface is None and hasattr(self.feedback, 'surface'):
            object.__setattr__(self, 'surface', self.feedback.surface)
        return self

    def drift(self, t, x) -> np.ndarray:
        return as_vector(self.a(t, x))

    def input_matrix(self, t, x) -> np.ndarray:
        return as_matrix(self.b(t, x))

    def value(self, t, x, u) -> np.ndarray:
        return self.drift(t, x) + self.input_matrix(t, x) @ np.asarray(u, dtype=float)

    def __call__(self, t, x) -> np.ndarray:
        return self.value(t, x, self.feedback.pointwise(t, x))


class ConvexSetDescription(BaseModel):
    """
    The set offset + matrix U for an input set U described as
    a point or polytope (vertex list), a box, or an ellipsoid
    {center + shape w : ||w|| <= 1}.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: Literal['singleton', 'polytope', 'box', 'ellipsoid']
    offset: np.ndarray
    matrix: np.ndarray
    points: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    center: np.ndarray | None = None
    shape: np.ndarray | None = None

    def input_vertices(self) -> np.ndarray:
        if self.kind in ('singleton', 'polytope'):
            return self.points
        if self.kind == 'box':
            return np.array(list(itertools.product(*zip(self.lower, self.upper, strict=True))))
        raise UnsupportedFeedbackError('an ellipsoid has no vertex list')

    def image_vertices(self) -> np.ndarray:
        return self.offset[None, :] + self.input_vertices() @ self.matrix.T

    def contains_input(self, u, tol: float = 1e-9) -> bool:
        u = as_vector(u)
        if self.kind == 'box':
            return bool(np.all(u >= self.lower - tol) and np.all(u <= self.upper + tol))
        if self.kind == 'ellipsoid':
            w = np.linalg.lstsq(self.shape, u - self.center, rcond=None)[0]
            on_range = np.linalg.norm(self.shape @ w - (u - self.center)) <= tol
            return bool(on_range and np.linalg.norm(w) <= 1.0 + tol)
        return in_hull(u, self.points, tol)

    def contains(self, point, tol: float = 1e-9) -> bool:
        """Membership of a state-space velocity in offset + matrix U."""
        point = as_vector(point)
        if self.kind == 'ellipsoid':
            u = np.linalg.lstsq(self.matrix, point - self.offset, rcond=None)[0]
            if np.linalg.norm(self.matrix @ u + self.offset - point) > tol:
                return False
            return self.contains_input(u, tol)
        return in_hull(point, self.image_vertices(), tol)


def in_hull(point: np.ndarray, vertices: np.ndarray, tol: float = 1e-9) -> bool:
    """
    Whether `point` lies in the convex hull of `vertices` (rows), up to
    `tol` in the max norm. Solved as a small linear program over convex
    weights with slack.
    """
    vertices = np.atleast_2d(vertices)
    count, dim = vertices.shape
    if count == 1:
        return bool(np.abs(vertices[0] - point).max() <= tol)
    if dim == 1:
        return bool(vertices.min() - tol <= point[0] <= vertices.max() + tol)
    # variables: weights (count) then slacks (dim)
    cost = np.concatenate([np.zeros(count), np.ones(dim)])
    eye = np.eye(dim)
    A_ub = np.block([[vertices.T, -eye], [-vertices.T, -eye]])
    b_ub = np.concatenate([point, -point])
    A_eq = np.concatenate([np.ones(count), np.zeros(dim)])[None, :]
    result = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=(0, None))
    return bool(result.success and np.abs(result.x[count:]).max() <= tol)


def _regularized_inputs(field: PiecewiseAffineField, t, x) -> ConvexSetDescription:
    a, b = field.drift(t, x), field.input_matrix(t, x)
    law = field.feedback
    if isinstance(law, RelayLaw):
        if not law.is_discontinuous_at(t, x):
            return ConvexSetDescription(kind='singleton', offset=a, matrix=b, points=law.pointwise(t, x)[None, :])
        vertices = law.input_vertices(t, x)
        return ConvexSetDescription(kind='polytope', offset=a, matrix=b, points=vertices)
    if isinstance(law, UnitVectorLaw):
        if not law.is_discontinuous_at(t, x):
            return ConvexSetDescription(kind='singleton', offset=a, matrix=b, points=law.pointwise(t, x)[None, :])
        return ConvexSetDescription(
            kind='ellipsoid', offset=a, matrix=b, center=np.zeros(law.input_dim), shape=law.ball_shape()
        )
    if isinstance(law, ContinuousLaw):
        return ConvexSetDescription(kind='singleton', offset=a, matrix=b, points=law.pointwise(t, x)[None, :])
    raise UnsupportedFeedbackError(f'no regularization for {type(law).__name__}')


def filippov_set(field: PiecewiseAffineField, t: float, x) -> ConvexSetDescription:
    """
    K[f](t, x) = a + b K[u](t, x).

    A singleton at continuity points, the hull of relay vertex values on
    the switching set, the image of the P-ball for the unit-vector law at
    y = 0.
    """
    return _regularized_inputs(field, t, np.asarray(x, dtype=float))


def utkin_sets(field: PiecewiseAffineField, t: float, x) -> tuple[ConvexSetDescription, ConvexSetDescription]:
    """
    First-kind set K[u] (joint hull) and second-kind box (K[u_1], ..., K[u_m])
    of a componentwise relay, both as input-space sets.
    """
    law = field.feedback
    if not isinstance(law, RelayLaw):
        raise UnsupportedFeedbackError('Utkin sets are defined for componentwise relays')
    x = np.asarray(x, dtype=float)
    m = law.input_dim
    vertices = law.input_vertices(t, x)
    eye, origin = np.eye(m), np.zeros(m)
    first = ConvexSetDescription(kind='polytope', offset=origin, matrix=eye, points=vertices)
    second = ConvexSetDescription(
        kind='box', offset=origin, matrix=eye, lower=vertices.min(axis=0), upper=vertices.max(axis=0)
    )
    return first, second


def first_kind_in_second_kind(field: PiecewiseAffineField, t: float, x) -> bool:
    first, second = utkin_sets(field, t, x)
    return all(second.contains_input(v) for v in first.input_vertices())


def equivalent_control_algebraic(field: PiecewiseAffineField, t: float, x) -> np.ndarray:
    """
    u_eq = -(grad_s b)^-1 grad_s a on the surface.

    Raises:
        OffSurfaceError: ||s(x)|| exceeds 1e-8 (1 + ||x||).
        SingularMatrixError: |det(grad_s b)| < 1e-12.
    """
    x = np.asarray(x, dtype=float)
    surface = field.surface
    s = surface.value(x)
    if np.linalg.norm(s) > surface_tol(x):
        raise OffSurfaceError(f'||s(x)||={np.linalg.norm(s):.3e} is off the surface')
    G = surface.jacobian(x)
    a, b = field.drift(t, x), field.input_matrix(t, x)
    Gb = G @ b
    if Gb.shape[0] != Gb.shape[1] or abs(np.linalg.det(Gb)) < 1e-12:
        raise SingularMatrixError('grad_s b is singular on the surface')
    u_eq = -np.linalg.solve(Gb, G @ a)
    residual = float(np.linalg.norm(G @ (a + b @ u_eq)))
    if residual > 1e-10 * (1.0 + np.linalg.norm(a)):
        logger.warning(f'equivalent control residual {residual:.3e} (ill-conditioned grad_s b)')
    return u_eq


class SlidingKind(str, Enum):
    NO_SLIDING = 'no_sliding'
    SLIDING = 'sliding'
    AMBIGUOUS = 'ambiguous'


class SlidingStatus(BaseModel):
    """Outcome of the sliding test; `f0` is set only for SLIDING."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: SlidingKind
    u_eq: np.ndarray
    margin: float
    f0: np.ndarray | None = None


def _normalized_margin(field: PiecewiseAffineField, t, x, u_eq, U_box) -> float:
    """Distance of u_eq to the boundary of U in units where U has radius 1."""
    if U_box is not None:
        lower, upper = (as_vector(bound) for bound in U_box)
        half = 0.5 * (upper - lower)
        if np.any(half <= 0.0):
            raise InvalidParameterError('U_box must have positive width')
        return float(np.min(np.minimum(u_eq - lower, upper - u_eq) / half))
    law = field.feedback
    if isinstance(law, UnitVectorLaw):
        v = -(law.CB @ u_eq) / law.rho
        return 1.0 - p_norm(v, law.P)
    if isinstance(law, RelayLaw):
        L = law._scale(t) * law.gain
        offset = u_eq - law.nominal_value(t, x)
        if L.shape[0] == L.shape[1] and abs(np.linalg.det(L)) > 1e-12:
            v = np.linalg.solve(L, offset)
            return 1.0 - float(np.abs(v).max())
        _, box = utkin_sets(field, t, x)
        return _normalized_margin(field, t, x, u_eq, (box.lower, box.upper))
    raise UnsupportedFeedbackError(f'no admissible input set for {type(law).__name__}')


def sliding_status(field: PiecewiseAffineField, t: float, x, U_box=None) -> SlidingStatus:
    """
    Classify a surface point: SLIDING when u_eq is strictly inside the
    admissible input set (then f0 = a + b u_eq), NO_SLIDING when strictly
    outside, AMBIGUOUS within a relative 1e-6 band of the boundary.

    Args:
        field (PiecewiseAffineField): the closed-loop field.
        t (float): time.
        x: state on the surface.
        U_box (tuple, optional): (lower, upper) box replacing the law's set.
    """
    x = np.asarray(x, dtype=float)
    u_eq = equivalent_control_algebraic(field, t, x)
    margin = _normalized_margin(field, t, x, u_eq, U_box)
    if margin > AMBIGUOUS_BAND:
        return SlidingStatus(kind=SlidingKind.SLIDING, u_eq=u_eq, margin=margin, f0=field.value(t, x, u_eq))
    if margin < -AMBIGUOUS_BAND:
        return SlidingStatus(kind=SlidingKind.NO_SLIDING, u_eq=u_eq, margin=margin)
    return SlidingStatus(kind=SlidingKind.AMBIGUOUS, u_eq=u_eq, margin=margin)


class SwitchKind(str, Enum):
    CROSSING = 'crossing'
    ATTRACTIVE = 'attractive'
    REPULSIVE = 'repulsive'


def switching_status(field: PiecewiseAffineField, t: float, x, component: int = 0) -> tuple[SwitchKind, float, float]:
    """
    One-sided normal velocities of surface component `component` for a
    relay: ds_j/dt with sign(s_j) = +1 and with sign(s_j) = -1, other
    components at their current sign. Same sign on both sides means the
    trajectory crosses.

    Returns:
        tuple: (kind, velocity on the positive side, velocity on the negative side)
    """
    law = field.feedback
    if not isinstance(law, RelayLaw):
        raise UnsupportedFeedbackError('switching check needs a componentwise relay')
    x = np.asarray(x, dtype=float)
    G = field.surface.jacobian(x)[component]
    sign = np.sign(field.surface.value(x))
    velocities = []
    for side in (1.0, -1.0):
        v = sign.copy()
        v[component] = side
        velocities.append(float(G @ field.value(t, x, law.from_sign(t, x, v))))
    plus, minus = velocities
    if plus < 0.0 < minus:
        kind = SwitchKind.ATTRACTIVE
    elif plus * minus > 0.0:
        kind = SwitchKind.CROSSING
    else:
        kind = SwitchKind.REPULSIVE
    return kind, plus, minus


class PointwiseSelection(BaseModel):
    """Simulate with the pointwise law (sign(0) = 0)."""

    kind: Literal['pointwise'] = 'pointwise'


class SignSelection(BaseModel):
    """On the switching set, replace the zero sign components by `values`."""

    kind: Literal['sign'] = 'sign'
    values: list[float]

    @model_validator(mode='after')
    def check_range(self):
        if any(abs(v) > 1.0 for v in self.values):
            raise ValueError('sign selections must lie in [-1, 1]')
        return self


class InputSelection(BaseModel):
    """
    On the switching set, apply the input `values` directly. The value must
    belong to the first-kind hull or the second-kind box (`set_kind`).
    """

    kind: Literal['input'] = 'input'
    values: list[float]
    set_kind: Literal['first', 'second'] = 'second'


class EquivalentSelection(BaseModel):
    """On the surface, apply the algebraic equivalent control (first kind)."""

    kind: Literal['equivalent'] = 'equivalent'


SelectionPolicy = Annotated[
    Union[PointwiseSelection, SignSelection, InputSelection, EquivalentSelection],
    Field(discriminator='kind'),
]


def resolve_input(field: PiecewiseAffineField, t: float, x: np.ndarray, policy=None) -> np.ndarray:
    """The input value applied at (t, x) under a selection policy."""
    law = field.feedback
    if policy is None or isinstance(policy, PointwiseSelection) or not law.is_discontinuous_at(t, x):
        return law.pointwise(t, x)
    if isinstance(policy, EquivalentSelection):
        try:
            return equivalent_control_algebraic(field, t, x)
        except SmideError:
            return law.pointwise(t, x)
    if isinstance(policy, SignSelection):
        if isinstance(law, RelayLaw):
            v = np.sign(law.surface.value(x))
            active = law.active(x)
            v[active] = np.asarray(policy.values, dtype=float)[active]
            return law.from_sign(t, x, v)
        if isinstance(law, UnitVectorLaw):
            v = np.asarray(policy.values, dtype=float)
            if p_norm(v, law.P) > 1.0 + 1e-12:
                raise InvalidParameterError('unit-vector selection must satisfy ||v||_P <= 1')
            return -law.rho * np.linalg.solve(law.CB, v)
        raise UnsupportedFeedbackError(f'sign selection for {type(law).__name__}')
    if isinstance(policy, InputSelection):
        u = np.asarray(policy.values, dtype=float)
        if isinstance(law, RelayLaw):
            first, second = utkin_sets(field, t, x)
            admissible = first if policy.set_kind == 'first' else second
        else:
            admissible = filippov_set(field, t, x)
            admissible = admissible.model_copy(update={'offset': np.zeros(law.input_dim), 'matrix': np.eye(law.input_dim)})
        if not admissible.contains_input(u):
            raise InvalidParameterError(f'selected input {u} is not admissible at t={t}')
        return u
    raise UnsupportedFeedbackError(f'unknown selection policy {policy!r}')

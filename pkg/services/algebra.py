"""Lie algebra coefficient vectors, group elements and closed-form exponentials.

Three groups are supported: the planar rigid motions SE(2), the rotations
SO(3) and the product SE(2) x R (a planar body carrying a prismatic joint).
Algebra elements are written in the fixed bases (e_theta, e_x, e_y),
(e_x, e_y, e_z) and (e_theta, e_x, e_y, e_z). All values are immutable.
"""
import logging
import math
from dataclasses import dataclass
from typing import ClassVar, Union

import numpy as np

from services.errors import GroupMismatch, InvalidAxis, InvalidRotation

logger = logging.getLogger(__name__)

SE2 = 'SE2'
SO3 = 'SO3'
SE2R = 'SE2xR'
GROUPS = (SE2, SO3, SE2R)

# Below this |angle| the sinc-type coefficients switch to their Taylor series
SMALL_ANGLE = 1e-4
ROTATION_TOLERANCE = 1e-10
UNIT_AXIS_TOLERANCE = 1e-9


def wrap_angle(theta):
    """Canonical representative of theta in (-pi, pi]"""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def atan2c(x, y):
    """Angle of the point (x, y) in (-pi, pi], with atan2c(0, 0) = 0"""
    if x == 0.0 and y == 0.0:
        return 0.0
    angle = math.atan2(y, x)
    if angle <= -math.pi:
        angle = math.pi
    return angle


def sign(value):
    """Sign with sign(0) = 0"""
    if value > 0:
        return 1.0
    if value < 0:
        return -1.0
    return 0.0


def indicator(condition):
    """1.0 when the condition holds, else 0.0"""
    return 1.0 if condition else 0.0


def arg_between(u, v):
    """Unsigned angle between two 3-vectors"""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return math.atan2(float(np.linalg.norm(np.cross(u, v))), float(np.dot(u, v)))


def one_minus_cos(angle):
    """1 - cos(angle) without cancellation near zero"""
    half = math.sin(0.5 * angle)
    return 2.0 * half * half


def _sinc_coefficients(alpha):
    """sin(a)/a and (1 - cos a)/a"""
    if abs(alpha) < SMALL_ANGLE:
        a2 = alpha * alpha
        s = 1.0 - a2 / 6.0 * (1.0 - a2 / 20.0 * (1.0 - a2 / 42.0))
        c = alpha / 2.0 * (1.0 - a2 / 12.0 * (1.0 - a2 / 30.0 * (1.0 - a2 / 56.0)))
        return s, c
    return math.sin(alpha) / alpha, one_minus_cos(alpha) / alpha


def _rodrigues_coefficients(angle):
    """sin(n)/n and (1 - cos n)/n^2"""
    if angle < SMALL_ANGLE:
        n2 = angle * angle
        s = 1.0 - n2 / 6.0 * (1.0 - n2 / 20.0 * (1.0 - n2 / 42.0))
        c = 0.5 * (1.0 - n2 / 12.0 * (1.0 - n2 / 30.0 * (1.0 - n2 / 56.0)))
        return s, c
    return math.sin(angle) / angle, one_minus_cos(angle) / (angle * angle)


@dataclass(frozen=True)
class Se2Vector:
    """a e_theta + b e_x + c e_y"""

    group: ClassVar[str] = SE2

    a: float
    b: float
    c: float

    @property
    def coefficients(self):
        return (self.a, self.b, self.c)


@dataclass(frozen=True)
class So3Vector:
    """a e_x + b e_y + c e_z in so(3)"""

    group: ClassVar[str] = SO3

    a: float
    b: float
    c: float

    @property
    def coefficients(self):
        return (self.a, self.b, self.c)

    def norm(self):
        return math.sqrt(self.a * self.a + self.b * self.b + self.c * self.c)


@dataclass(frozen=True)
class Se2RVector:
    """a e_theta + b e_x + c e_y + d e_z"""

    group: ClassVar[str] = SE2R

    a: float
    b: float
    c: float
    d: float

    @property
    def coefficients(self):
        return (self.a, self.b, self.c, self.d)


@dataclass(frozen=True)
class Se2Pose:
    """Planar pose; theta is kept in (-pi, pi]"""

    group: ClassVar[str] = SE2

    theta: float
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, 'theta', wrap_angle(float(self.theta)))

    @property
    def coordinates(self):
        return (self.theta, self.x, self.y)


@dataclass(frozen=True)
class Se2RPose:
    """Planar pose plus the prismatic coordinate z"""

    group: ClassVar[str] = SE2R

    theta: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        object.__setattr__(self, 'theta', wrap_angle(float(self.theta)))

    @property
    def coordinates(self):
        return (self.theta, self.x, self.y, self.z)


@dataclass(frozen=True, eq=False)
class Rotation:
    """Proper 3x3 rotation matrix"""

    group: ClassVar[str] = SO3

    r: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.r, dtype=float)
        if matrix.shape != (3, 3) or not np.all(np.isfinite(matrix)):
            raise InvalidRotation(f"Expected a finite 3x3 matrix, got shape {matrix.shape}")
        orthogonality = float(np.max(np.abs(matrix.T @ matrix - np.eye(3))))
        determinant = float(np.linalg.det(matrix))
        if orthogonality > ROTATION_TOLERANCE or abs(determinant - 1.0) > ROTATION_TOLERANCE:
            raise InvalidRotation(
                f"Matrix is not a rotation (orthogonality error {orthogonality:.3e}, det {determinant:.12f})"
            )
        matrix.setflags(write=False)
        object.__setattr__(self, 'r', matrix)

    def __eq__(self, other):
        return isinstance(other, Rotation) and np.array_equal(self.r, other.r)

    def __hash__(self):
        return hash(self.r.tobytes())

    def __repr__(self):
        return f"Rotation({self.r.tolist()!r})"

    @property
    def coordinates(self):
        return tuple(float(value) for value in self.r.flatten())


@dataclass(frozen=True)
class AxisAngle:
    omega: tuple
    angle: float


AlgebraVector = Union[Se2Vector, So3Vector, Se2RVector]
GroupElement = Union[Se2Pose, Rotation, Se2RPose]

VECTOR_TYPES = {SE2: Se2Vector, SO3: So3Vector, SE2R: Se2RVector}


def vector(group, coefficients):
    """Build the algebra vector of a group from raw coefficients"""
    cls = VECTOR_TYPES[group]
    values = [float(value) for value in coefficients]
    return cls(*values)


def identity(group):
    if group == SE2:
        return Se2Pose(0.0, 0.0, 0.0)
    if group == SO3:
        return Rotation(np.eye(3))
    if group == SE2R:
        return Se2RPose(0.0, 0.0, 0.0, 0.0)
    raise GroupMismatch(f"Unknown group {group!r}")


def hat(v):
    """Matrix representative of an algebra vector"""
    if isinstance(v, Se2Vector):
        return np.array([[0.0, -v.a, v.b],
                         [v.a, 0.0, v.c],
                         [0.0, 0.0, 0.0]])
    if isinstance(v, So3Vector):
        return np.array([[0.0, -v.c, v.b],
                         [v.c, 0.0, -v.a],
                         [-v.b, v.a, 0.0]])
    if isinstance(v, Se2RVector):
        return np.array([[0.0, -v.a, 0.0, v.b],
                         [v.a, 0.0, 0.0, v.c],
                         [0.0, 0.0, 0.0, v.d],
                         [0.0, 0.0, 0.0, 0.0]])
    raise GroupMismatch(f"Not an algebra vector: {v!r}")


def vee(matrix, group):
    """Inverse of hat"""
    m = np.asarray(matrix, dtype=float)
    if group == SE2:
        return Se2Vector(float(m[1, 0]), float(m[0, 2]), float(m[1, 2]))
    if group == SO3:
        return So3Vector(float(m[2, 1]), float(m[0, 2]), float(m[1, 0]))
    if group == SE2R:
        return Se2RVector(float(m[1, 0]), float(m[0, 3]), float(m[1, 3]), float(m[2, 3]))
    raise GroupMismatch(f"Unknown group {group!r}")


def to_matrix(g):
    """Homogeneous matrix of a group element"""
    if isinstance(g, Rotation):
        return np.array(g.r)
    if isinstance(g, Se2Pose):
        c, s = math.cos(g.theta), math.sin(g.theta)
        return np.array([[c, -s, g.x],
                         [s, c, g.y],
                         [0.0, 0.0, 1.0]])
    if isinstance(g, Se2RPose):
        c, s = math.cos(g.theta), math.sin(g.theta)
        return np.array([[c, -s, 0.0, g.x],
                         [s, c, 0.0, g.y],
                         [0.0, 0.0, 1.0, g.z],
                         [0.0, 0.0, 0.0, 1.0]])
    raise GroupMismatch(f"Not a group element: {g!r}")


def from_matrix(matrix, group):
    m = np.asarray(matrix, dtype=float)
    if group == SE2:
        return Se2Pose(math.atan2(m[1, 0], m[0, 0]), float(m[0, 2]), float(m[1, 2]))
    if group == SO3:
        return Rotation(m)
    if group == SE2R:
        return Se2RPose(math.atan2(m[1, 0], m[0, 0]), float(m[0, 3]), float(m[1, 3]), float(m[2, 3]))
    raise GroupMismatch(f"Unknown group {group!r}")


def exp_se2(v, t):
    """exp(t v) on SE(2)"""
    alpha = t * v.a
    tb, tc = t * v.b, t * v.c
    s, c = _sinc_coefficients(alpha)
    return Se2Pose(alpha, s * tb - c * tc, c * tb + s * tc)


def exp_so3(v, t):
    """Rodrigues formula for exp(t v)"""
    eta = np.array([t * v.a, t * v.b, t * v.c])
    angle = float(np.linalg.norm(eta))
    s, c = _rodrigues_coefficients(angle)
    k = hat(So3Vector(*eta))
    return Rotation(np.eye(3) + s * k + c * (k @ k))


def exp_unit_axis_so3(v, t):
    """Entry-wise exp(t v) for a unit axis v"""
    if abs(v.norm() - 1.0) > UNIT_AXIS_TOLERANCE:
        raise InvalidAxis(f"Axis {v.coefficients} has norm {v.norm():.12f}, expected 1")
    a, b, c = v.a, v.b, v.c
    ct, st = math.cos(t), math.sin(t)
    vt = one_minus_cos(t)
    return Rotation(np.array([
        [a * a + (1.0 - a * a) * ct, a * b * vt - c * st, a * c * vt + b * st],
        [a * b * vt + c * st, b * b + (1.0 - b * b) * ct, b * c * vt - a * st],
        [a * c * vt - b * st, b * c * vt + a * st, c * c + (1.0 - c * c) * ct],
    ]))


def exp_se2r(v, t):
    """exp(t v) on SE(2) x R, component-wise"""
    planar = exp_se2(Se2Vector(v.a, v.b, v.c), t)
    return Se2RPose(planar.theta, planar.x, planar.y, t * v.d)


def exp(v, t):
    """Dispatch to the closed-form exponential of v's algebra"""
    if isinstance(v, Se2Vector):
        return exp_se2(v, t)
    if isinstance(v, So3Vector):
        return exp_so3(v, t)
    if isinstance(v, Se2RVector):
        return exp_se2r(v, t)
    raise GroupMismatch(f"Not an algebra vector: {v!r}")


def compose(g1, g2):
    """Group product g1 g2"""
    if g1.group != g2.group:
        raise GroupMismatch(f"Cannot compose {g1.group} with {g2.group}")
    return from_matrix(to_matrix(g1) @ to_matrix(g2), g1.group)


def inverse(g):
    if isinstance(g, Rotation):
        return Rotation(g.r.T)
    c, s = math.cos(g.theta), math.sin(g.theta)
    x = -(c * g.x + s * g.y)
    y = -(-s * g.x + c * g.y)
    if isinstance(g, Se2Pose):
        return Se2Pose(-g.theta, x, y)
    return Se2RPose(-g.theta, x, y, -g.z)


def pose_distance(g1, g2):
    """Frobenius distance between homogeneous representatives"""
    if g1.group != g2.group:
        raise GroupMismatch(f"Cannot compare {g1.group} with {g2.group}")
    return float(np.linalg.norm(to_matrix(g1) - to_matrix(g2)))


def bracket(v1, v2):
    """Lie bracket [v1, v2] in coefficients"""
    if type(v1) is not type(v2):
        raise GroupMismatch(f"Cannot bracket {type(v1).__name__} with {type(v2).__name__}")
    if isinstance(v1, So3Vector):
        return So3Vector(v1.b * v2.c - v1.c * v2.b,
                         v1.c * v2.a - v1.a * v2.c,
                         v1.a * v2.b - v1.b * v2.a)
    b = v1.c * v2.a - v1.a * v2.c
    c = v1.a * v2.b - v1.b * v2.a
    if isinstance(v1, Se2Vector):
        return Se2Vector(0.0, b, c)
    return Se2RVector(0.0, b, c, 0.0)


def axis_angle(rotation):
    """Unit axis and angle in [0, pi] with exp(angle * axis) = rotation

    The identity maps to ((0, 0, 1), 0). At angle pi the axis whose first
    nonzero coordinate is positive is returned.
    """
    r = rotation.r
    w = 0.5 * np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    sin_angle = float(np.linalg.norm(w))
    cos_angle = 0.5 * (float(np.trace(r)) - 1.0)
    angle = math.atan2(sin_angle, cos_angle)
    if angle < 1e-12:
        return AxisAngle((0.0, 0.0, 1.0), 0.0)
    if cos_angle > -0.5:
        omega = w / sin_angle
    else:
        # (R + R^T)/2 - cos I = (1 - cos) omega omega^T
        outer = 0.5 * (r + r.T) - cos_angle * np.eye(3)
        k = int(np.argmax(np.diag(outer)))
        omega = outer[:, k] / math.sqrt(outer[k, k] * (1.0 - cos_angle))
        if sin_angle > 1e-12:
            if float(np.dot(omega, w)) < 0.0:
                omega = -omega
        else:
            leading = next(value for value in omega if abs(value) > 1e-12)
            if leading < 0.0:
                omega = -omega
    omega = omega / np.linalg.norm(omega)
    return AxisAngle(tuple(float(value) for value in omega), angle)

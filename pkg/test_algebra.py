import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.strategies import floats, tuples

from services.algebra import (
    SE2, SO3, SE2R, Rotation, Se2Pose, Se2RPose, Se2RVector, Se2Vector, So3Vector,
    atan2c, axis_angle, bracket, compose, exp, exp_se2, exp_se2r, exp_so3, exp_unit_axis_so3,
    from_matrix, hat, identity, inverse, one_minus_cos, pose_distance, sign, to_matrix, vee,
    wrap_angle,
)
from services.errors import GroupMismatch, InvalidAxis, InvalidRotation
from services.verify import series_exp

coefficient = floats(min_value=-3.0, max_value=3.0, allow_nan=False, allow_infinity=False)
duration = floats(min_value=-2.0, max_value=2.0, allow_nan=False, allow_infinity=False)

se2_vectors = tuples(coefficient, coefficient, coefficient).map(lambda c: Se2Vector(*c))
so3_vectors = tuples(coefficient, coefficient, coefficient).map(lambda c: So3Vector(*c))
se2r_vectors = tuples(coefficient, coefficient, coefficient, coefficient).map(lambda c: Se2RVector(*c))


def test_wrap_angle_keeps_pi_and_drops_minus_pi():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(0.5) == 0.5
    assert wrap_angle(2.0 * math.pi + 0.25) == pytest.approx(0.25)


def test_atan2c_is_the_angle_of_the_point():
    assert atan2c(0.0, 0.0) == 0.0
    assert atan2c(1.0, 0.0) == 0.0
    assert atan2c(0.0, 1.0) == pytest.approx(math.pi / 2)
    assert atan2c(-1.0, 0.0) == math.pi
    assert atan2c(-1.0, -0.0) == math.pi


def test_sign_and_one_minus_cos():
    assert sign(-2.0) == -1.0
    assert sign(0.0) == 0.0
    assert sign(3.0) == 1.0
    assert one_minus_cos(math.pi) == pytest.approx(2.0)
    assert one_minus_cos(1e-9) == pytest.approx(5e-19, rel=1e-6)


def test_exp_se2_quarter_turn():
    g = exp_se2(Se2Vector(1.0, 1.0, 0.0), math.pi / 2)
    assert g.coordinates == pytest.approx((math.pi / 2, 1.0, 1.0), abs=1e-12)


def test_exp_se2r_quarter_turn():
    g = exp_se2r(Se2RVector(1.0, 1.0, 0.0, 0.5), math.pi / 2)
    assert g.coordinates == pytest.approx((math.pi / 2, 1.0, 1.0, math.pi / 4), abs=1e-12)


def test_exp_se2_pure_translation():
    g = exp_se2(Se2Vector(0.0, 2.0, -1.0), 1.5)
    assert g.coordinates == pytest.approx((0.0, 3.0, -1.5), abs=1e-15)


def test_exp_se2_small_angle_branch_is_continuous():
    g = exp_se2(Se2Vector(1e-5, 1.0, 0.0), 1.0)
    assert g.theta == pytest.approx(1e-5, abs=1e-18)
    assert g.x == pytest.approx(1.0, abs=1e-12)
    assert g.y == pytest.approx(5e-6, abs=1e-12)


def test_exp_at_zero_time_is_identity():
    for v in (Se2Vector(1.0, 2.0, 3.0), So3Vector(0.1, 0.2, 0.3), Se2RVector(1.0, 2.0, 3.0, 4.0)):
        assert pose_distance(exp(v, 0.0), identity(v.group)) == 0.0


def test_exp_so3_matches_unit_axis_form():
    axis = So3Vector(1.0 / math.sqrt(3.0), 1.0 / math.sqrt(3.0), 1.0 / math.sqrt(3.0))
    assert np.allclose(exp_so3(axis, 1.3).r, exp_unit_axis_so3(axis, 1.3).r, atol=1e-14)


def test_exp_unit_axis_rejects_non_unit_axis():
    with pytest.raises(InvalidAxis):
        exp_unit_axis_so3(So3Vector(0.0, 0.0, 2.0), 1.0)


def test_rotation_validation():
    with pytest.raises(InvalidRotation):
        Rotation(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(InvalidRotation):
        Rotation(2.0 * np.eye(3))
    with pytest.raises(InvalidRotation):
        Rotation(np.eye(2))
    r = Rotation(np.eye(3))
    assert r == Rotation(np.eye(3))
    assert hash(r) == hash(Rotation(np.eye(3)))
    with pytest.raises(ValueError):
        r.r[0, 0] = 2.0


def test_compose_rejects_mixed_groups():
    with pytest.raises(GroupMismatch):
        compose(identity(SE2), identity(SE2R))
    with pytest.raises(GroupMismatch):
        bracket(Se2Vector(1.0, 0.0, 0.0), So3Vector(1.0, 0.0, 0.0))


def test_matrix_round_trip():
    for g in (Se2Pose(0.3, 1.0, -2.0), Se2RPose(-2.0, 0.5, 0.25, 4.0), exp_so3(So3Vector(0.1, -0.4, 0.9), 1.0)):
        assert pose_distance(from_matrix(to_matrix(g), g.group), g) < 1e-14


def test_axis_angle_identity_and_half_turn():
    aa = axis_angle(identity(SO3))
    assert aa.omega == (0.0, 0.0, 1.0)
    assert aa.angle == 0.0

    aa = axis_angle(Rotation(np.diag([1.0, -1.0, -1.0])))
    assert aa.angle == pytest.approx(math.pi)
    assert aa.omega == pytest.approx((1.0, 0.0, 0.0))

    aa = axis_angle(Rotation(np.diag([-1.0, -1.0, 1.0])))
    assert aa.omega == pytest.approx((0.0, 0.0, 1.0))


@given(so3_vectors, duration)
def test_axis_angle_reproduces_rotation(v, t):
    r = exp_so3(v, t)
    aa = axis_angle(r)
    assert 0.0 <= aa.angle <= math.pi
    assert pose_distance(exp_so3(So3Vector(*aa.omega), aa.angle), r) < 1e-9


@given(se2_vectors, duration, duration)
def test_se2_one_parameter_subgroup(v, t, s):
    assert pose_distance(compose(exp(v, t), exp(v, s)), exp(v, t + s)) < 1e-9


@given(so3_vectors, duration, duration)
def test_so3_one_parameter_subgroup(v, t, s):
    assert pose_distance(compose(exp(v, t), exp(v, s)), exp(v, t + s)) < 1e-9


@given(se2r_vectors, duration, duration)
def test_se2r_one_parameter_subgroup(v, t, s):
    assert pose_distance(compose(exp(v, t), exp(v, s)), exp(v, t + s)) < 1e-9


@settings(max_examples=200)
@given(se2r_vectors, duration)
def test_se2r_exp_matches_series(v, t):
    assert np.max(np.abs(to_matrix(exp(v, t)) - series_exp(hat(v) * t))) < 1e-12


@given(so3_vectors, duration)
def test_so3_exp_matches_series(v, t):
    assert np.max(np.abs(to_matrix(exp(v, t)) - series_exp(hat(v) * t))) < 1e-12


@given(se2_vectors, se2_vectors)
def test_bracket_is_matrix_commutator_se2(v, w):
    commutator = hat(v) @ hat(w) - hat(w) @ hat(v)
    assert np.allclose(hat(bracket(v, w)), commutator, atol=1e-12)


@given(so3_vectors, so3_vectors)
def test_bracket_is_cross_product(v, w):
    assert np.allclose(bracket(v, w).coefficients, np.cross(v.coefficients, w.coefficients), atol=1e-12)


@given(se2r_vectors)
def test_hat_vee_inverse(v):
    assert vee(hat(v), SE2R) == v


@given(se2_vectors, duration)
def test_inverse_cancels(v, t):
    g = exp(v, t)
    assert pose_distance(compose(g, inverse(g)), identity(SE2)) < 1e-12

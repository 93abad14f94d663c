import math

import numpy as np
import pytest

from services.algebra import SE2, SO3, SE2R, Se2RVector, Se2Vector, So3Vector
from services.controllability import (
    Family, alignment_rotation, classify, closure_rank, se2_controllable, se2r_controllable_2,
    so3_controllable, validate_fields,
)
from services.errors import GroupMismatch, SpecError
from services.verify import lie_closure_rank


def _coefficients(fields):
    return [pytest.approx(v.coefficients, abs=1e-12) for v in fields]


def test_parallel_fields_are_uncontrollable():
    result = classify((Se2Vector(1.0, 0.0, 0.0), Se2Vector(2.0, 0.0, 0.0)), SE2)
    assert result.family == Family.UNCONTROLLABLE
    assert result.record is None


def test_planar_pair_system_is_s1(s1_system):
    result = classify(s1_system, SE2)
    assert result.family == Family.S1
    assert result.record.permutation == (1, 2)
    assert result.record.scales == (1.0, 1.0)
    assert list(result.canonical_fields) == _coefficients(s1_system)


def test_s1_reorders_and_rescales():
    result = classify((Se2Vector(0.0, 2.0, 0.0), Se2Vector(2.0, 0.0, 1.0)), SE2)
    assert result.family == Family.S1
    assert result.record.permutation == (2, 1)
    assert result.record.scales == pytest.approx((0.5, 0.5))
    assert [v.coefficients for v in result.canonical_fields] == [(1.0, 0.0, 0.5), (0.0, 1.0, 0.0)]


def test_s2_puts_the_shorter_offset_first():
    result = classify((Se2Vector(1.0, 1.0, 0.0), Se2Vector(1.0, 0.0, 0.5)), SE2)
    assert result.family == Family.S2
    assert result.record.permutation == (2, 1)
    first, second = result.canonical_fields
    assert first.b ** 2 + first.c ** 2 <= second.b ** 2 + second.c ** 2


def test_so3_canonical_fields(so3_system):
    result = classify(so3_system, SO3)
    assert result.family == Family.SO3
    assert np.allclose(result.record.conjugation.r, np.eye(3))
    assert list(result.canonical_fields) == _coefficients(so3_system)


def test_so3_scales_are_inverse_norms():
    result = classify((So3Vector(0.0, 0.0, 2.0), So3Vector(0.0, 1.0, 1.0)), SO3)
    assert result.record.scales == pytest.approx((0.5, 1.0 / math.sqrt(2.0)))


def test_so3_conjugation_aligns_first_field():
    v1, v2 = So3Vector(1.0, 0.0, 0.0), So3Vector(0.0, 3.0, 4.0)
    result = classify((v1, v2), SO3)
    r0 = result.record.conjugation.r
    assert np.allclose(r0 @ np.array([1.0, 0.0, 0.0]), [0.0, 0.0, 1.0], atol=1e-12)
    assert result.canonical_fields[1].coefficients == pytest.approx(tuple(r0 @ np.array([0.0, 0.6, 0.8])), abs=1e-12)


def test_alignment_rotation_of_antipode():
    assert np.allclose(alignment_rotation([0.0, 0.0, -1.0]).r @ np.array([0.0, 0.0, -1.0]), [0.0, 0.0, 1.0])


def test_lifted_pair_system_is_t1(t1_system):
    result = classify(t1_system, SE2R)
    assert result.family == Family.T1
    assert result.record.scales == (1.0, 1.0)
    assert list(result.canonical_fields) == _coefficients(t1_system)


def test_two_rotating_fields_are_t2(t2_system):
    assert classify(t2_system, SE2R).family == Family.T2


def test_matching_prismatic_ratio_is_uncontrollable():
    result = classify((Se2RVector(1.0, 0.0, 0.0, 1.0), Se2RVector(2.0, 1.0, 0.0, 2.0)), SE2R)
    assert result.family == Family.UNCONTROLLABLE


def test_triples(t3_system, t4_system, t5_system):
    assert classify(t3_system, SE2R).family == Family.T3
    assert classify(t4_system, SE2R).family == Family.T4
    result = classify(t5_system, SE2R)
    assert result.family == Family.T5
    assert result.record.permutation == (1, 2, 3)


def test_disguised_t4_is_recovered(t4_system):
    v1, v2, v3 = t4_system
    fields = (Se2RVector(0.0, 0.0, 0.0, 2.0),
              Se2RVector(*(3.0 * x for x in v1.coefficients)),
              Se2RVector(*(0.5 * x for x in v2.coefficients)))
    result = classify(fields, SE2R)
    assert result.family == Family.T4
    assert result.record.permutation == (2, 3, 1)
    assert result.record.scales == pytest.approx((1.0 / 3.0, 1.0, 0.5))
    assert result.canonical_fields[0].coefficients == pytest.approx(v1.coefficients)
    assert result.canonical_fields[2].coefficients == (0.0, 0.0, 0.0, 1.0)


def test_triple_with_controllable_pair_plans_on_the_pair():
    fields = (Se2RVector(1.0, 0.0, 0.0, 0.0), Se2RVector(0.0, 1.0, 0.0, 1.0), Se2RVector(0.0, 0.0, 0.0, 1.0))
    result = classify(fields, SE2R)
    assert result.family == Family.T1
    assert result.record.permutation == (1, 2)
    assert 'field 3 unused' in result.note


def test_three_planar_fields_use_first_controllable_pair():
    fields = (Se2Vector(1.0, 0.0, 0.0), Se2Vector(2.0, 0.0, 0.0), Se2Vector(0.0, 1.0, 0.0))
    result = classify(fields, SE2)
    assert result.family == Family.S1
    assert result.record.permutation == (1, 3)
    assert 'field 2 unused' in result.note


def test_collinear_triple_is_uncontrollable():
    fields = tuple(Se2RVector(k, 0.0, 0.0, 0.0) for k in (1.0, 2.0, 3.0))
    assert classify(fields, SE2R).family == Family.UNCONTROLLABLE


def test_validate_fields():
    with pytest.raises(SpecError):
        validate_fields((Se2Vector(1.0, 0.0, 0.0),), SE2)
    with pytest.raises(SpecError):
        validate_fields((Se2Vector(1.0, 0.0, 0.0), Se2Vector(0.0, 1.0, 0.0)), 'SE3')
    with pytest.raises(GroupMismatch):
        validate_fields((Se2Vector(1.0, 0.0, 0.0), So3Vector(0.0, 1.0, 0.0)), SE2)
    with pytest.raises(SpecError):
        validate_fields((Se2Vector(math.nan, 0.0, 0.0), Se2Vector(0.0, 1.0, 0.0)), SE2)


def test_closure_rank_of_planar_pair(s1_system):
    assert closure_rank(s1_system, depth=2) == 3
    assert lie_closure_rank(s1_system, depth=2) == 3


def test_se2r_pair_needs_both_conditions():
    assert se2r_controllable_2(Se2RVector(1.0, 0.0, 0.0, 0.0), Se2RVector(0.0, 1.0, 0.0, 1.0))
    # no prismatic coupling
    assert not se2r_controllable_2(Se2RVector(1.0, 0.0, 0.0, 0.0), Se2RVector(0.0, 1.0, 0.0, 0.0))
    # no planar coupling
    assert not se2r_controllable_2(Se2RVector(1.0, 0.0, 0.0, 0.0), Se2RVector(0.0, 0.0, 0.0, 1.0))


def test_pair_determinants():
    assert se2_controllable(Se2Vector(1.0, 0.0, 0.5), Se2Vector(1.0, 1.0, 0.0))
    # both fields rotate about the same point
    assert not se2_controllable(Se2Vector(1.0, 0.0, 0.5), Se2Vector(2.0, 0.0, 1.0))
    assert so3_controllable(So3Vector(0.0, 0.0, 1.0), So3Vector(0.0, 1.0, 1.0))
    assert not so3_controllable(So3Vector(0.0, 0.0, 1.0), So3Vector(0.0, 0.0, -3.0))

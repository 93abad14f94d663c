"""Rank conditions and classification of input systems into canonical families.

A user system is a list of 2 or 3 algebra vectors. Classification reorders,
rescales (and on SO(3) conjugates) the fields into the canonical form of one
family and keeps a NormalizationRecord so canonical coasting times can be
mapped back: flowing along canonical field i for time t is the same as
flowing along user field permutation[i] for time scales[i] * t.
"""
import enum
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from services.algebra import (
    SE2, SO3, SE2R, VECTOR_TYPES, Rotation, Se2RVector, Se2Vector, So3Vector,
    bracket, exp_unit_axis_so3,
)
from services.errors import GroupMismatch, SpecError

logger = logging.getLogger(__name__)

EPS_RANK = 1e-9
EPS_ZERO = 1e-12
EPS_EQUAL = 1e-9


class Family(str, enum.Enum):
    S1 = 'S1'
    S2 = 'S2'
    SO3 = 'SO3'
    T1 = 'T1'
    T2 = 'T2'
    T3 = 'T3'
    T4 = 'T4'
    T5 = 'T5'
    UNCONTROLLABLE = 'Uncontrollable'
    OUT_OF_CATALOG = 'OutOfCatalog'


FAMILY_GROUPS = {
    Family.S1: SE2, Family.S2: SE2, Family.SO3: SO3,
    Family.T1: SE2R, Family.T2: SE2R, Family.T3: SE2R, Family.T4: SE2R, Family.T5: SE2R,
}


@dataclass(frozen=True)
class NormalizationRecord:
    """Canonical field i is scales[i] times user field permutation[i] (1-based)"""

    permutation: tuple
    scales: tuple
    conjugation: Optional[Rotation] = None

    def to_user(self, canonical_index, time):
        """Map a (1-based canonical index, canonical time) step to user terms"""
        return self.permutation[canonical_index - 1], self.scales[canonical_index - 1] * time

    def to_dict(self):
        return {
            'permutation': list(self.permutation),
            'scales': list(self.scales),
            'conjugation': None if self.conjugation is None else self.conjugation.r.tolist(),
        }


@dataclass(frozen=True)
class SystemClass:
    family: Family
    canonical_fields: tuple = ()
    record: Optional[NormalizationRecord] = None
    note: str = ''

    def to_dict(self):
        return {
            'family': self.family.value,
            'canonical_fields': [list(v.coefficients) for v in self.canonical_fields],
            'record': None if self.record is None else self.record.to_dict(),
            'note': self.note,
        }


def _unit_max(v):
    """Coefficients divided by the largest absolute coefficient"""
    coefficients = np.array(v.coefficients, dtype=float)
    largest = float(np.max(np.abs(coefficients)))
    if largest == 0.0:
        return coefficients
    return coefficients / largest


def _is_zero(value, v):
    largest = max(abs(x) for x in v.coefficients)
    return abs(value) <= EPS_ZERO * max(largest, EPS_ZERO)


def _close(p, q):
    return abs(p - q) <= EPS_EQUAL * max(1.0, abs(p), abs(q))


def se2_determinant(v1, v2):
    """det of (V1, V2, [V1, V2]) on unit-max inputs"""
    a1, b1, c1 = _unit_max(v1)
    a2, b2, c2 = _unit_max(v2)
    return (a1 * b2 - b1 * a2) ** 2 + (c1 * a2 - a1 * c2) ** 2


def so3_determinant(v1, v2):
    """det of (V1, V2, V1 x V2) on unit-max inputs"""
    cross = np.cross(_unit_max(v1), _unit_max(v2))
    return float(np.dot(cross, cross))


def se2r_conditions(v1, v2):
    """The two quantities whose joint nonvanishing makes a pair controllable"""
    a1, b1, c1, d1 = _unit_max(v1)
    a2, b2, c2, d2 = _unit_max(v2)
    prismatic = abs(a2 * d1 - d2 * a1)
    planar = (c1 * a2 - a1 * c2) ** 2 + (a1 * b2 - b1 * a2) ** 2
    return prismatic, planar


def se2_controllable(v1, v2):
    return se2_determinant(v1, v2) > EPS_RANK


def so3_controllable(v1, v2):
    return so3_determinant(v1, v2) > EPS_RANK


def se2r_controllable_2(v1, v2):
    prismatic, planar = se2r_conditions(v1, v2)
    return prismatic > EPS_RANK and planar > EPS_RANK


def closure_rank(fields, depth):
    """Numeric rank of the fields and their iterated brackets up to depth nestings"""
    layer = [type(v)(*_unit_max(v)) for v in fields]
    generators = list(layer)
    span = list(layer)
    for _ in range(depth):
        layer = [bracket(x, y) for x in generators for y in layer]
        span.extend(layer)
    matrix = np.array([v.coefficients for v in span], dtype=float)
    singular_values = np.linalg.svd(matrix, compute_uv=False)
    threshold = EPS_RANK * max(1.0, float(singular_values[0]))
    return int(np.sum(singular_values > threshold))


def _uncontrollable(note=''):
    return SystemClass(Family.UNCONTROLLABLE, note=note)


def _shorter_offset_first(first, second):
    """True when (first, second) satisfies b1^2 + c1^2 <= b2^2 + c2^2"""
    return first.b ** 2 + first.c ** 2 <= second.b ** 2 + second.c ** 2


def classify_se2(v1, v2):
    """S1 when exactly one field rotates, S2 when both do"""
    if not se2_controllable(v1, v2):
        return _uncontrollable('Lie closure of the pair has rank below 3')
    fields = (v1, v2)
    rotating = [i for i, v in enumerate(fields) if not _is_zero(v.a, v)]
    if len(rotating) == 1:
        i = rotating[0]
        j = 1 - i
        first, other = fields[i], fields[j]
        s1 = 1.0 / first.a
        s2 = 1.0 / math.hypot(other.b, other.c)
        canonical = (Se2Vector(1.0, first.b * s1, first.c * s1),
                     Se2Vector(0.0, other.b * s2, other.c * s2))
        record = NormalizationRecord((i + 1, j + 1), (s1, s2))
        return SystemClass(Family.S1, canonical, record)

    candidates = []
    for i, j in ((0, 1), (1, 0)):
        s1, s2 = 1.0 / fields[i].a, 1.0 / fields[j].a
        canonical = (Se2Vector(1.0, fields[i].b * s1, fields[i].c * s1),
                     Se2Vector(1.0, fields[j].b * s2, fields[j].c * s2))
        candidates.append((canonical, NormalizationRecord((i + 1, j + 1), (s1, s2))))
    canonical, record = next(
        (c, r) for c, r in candidates if _shorter_offset_first(c[0], c[1])
    )
    return SystemClass(Family.S2, canonical, record)


def alignment_rotation(u):
    """Rotation R0 with R0 u = e_z for a unit vector u"""
    u = np.asarray(u, dtype=float)
    axis = np.cross(u, np.array([0.0, 0.0, 1.0]))
    sin_angle = float(np.linalg.norm(axis))
    if sin_angle < EPS_ZERO:
        if u[2] > 0.0:
            return Rotation(np.eye(3))
        return Rotation(np.diag([1.0, -1.0, -1.0]))
    angle = math.atan2(sin_angle, float(u[2]))
    return exp_unit_axis_so3(So3Vector(*(axis / sin_angle)), angle)


def classify_so3(v1, v2):
    """Conjugate V1 onto e_z and normalize both fields"""
    if not so3_controllable(v1, v2):
        return _uncontrollable('Fields are parallel')
    n1, n2 = v1.norm(), v2.norm()
    r0 = alignment_rotation(np.array(v1.coefficients) / n1)
    a, b, c = r0.r @ (np.array(v2.coefficients) / n2)
    canonical = (So3Vector(0.0, 0.0, 1.0), So3Vector(float(a), float(b), float(c)))
    record = NormalizationRecord((1, 2), (1.0 / n1, 1.0 / n2), r0)
    return SystemClass(Family.SO3, canonical, record)


def classify_se2r_2(v1, v2):
    """T1 when one field is a pure planar translation plus prismatic motion, T2 otherwise"""
    if not se2r_controllable_2(v1, v2):
        return _uncontrollable('Lie closure of the pair has rank below 4')
    fields = (v1, v2)
    rotating = [i for i, v in enumerate(fields) if not _is_zero(v.a, v)]
    if len(rotating) == 1:
        i = rotating[0]
        j = 1 - i
        first, other = fields[i], fields[j]
        s1, s2 = 1.0 / first.a, 1.0 / other.d
        canonical = (Se2RVector(1.0, first.b * s1, first.c * s1, first.d * s1),
                     Se2RVector(0.0, other.b * s2, other.c * s2, 1.0))
        return SystemClass(Family.T1, canonical, NormalizationRecord((i + 1, j + 1), (s1, s2)))

    candidates = []
    for i, j in ((0, 1), (1, 0)):
        s1, s2 = 1.0 / fields[i].a, 1.0 / fields[j].a
        canonical = (Se2RVector(1.0, fields[i].b * s1, fields[i].c * s1, fields[i].d * s1),
                     Se2RVector(1.0, fields[j].b * s2, fields[j].c * s2, fields[j].d * s2))
        candidates.append((canonical, NormalizationRecord((i + 1, j + 1), (s1, s2))))
    canonical, record = next(
        (c, r) for c, r in candidates if _shorter_offset_first(c[0], c[1])
    )
    return SystemClass(Family.T2, canonical, record)


def _is_prismatic(v):
    return (not _is_zero(v.d, v) and _is_zero(v.a, v)
            and _is_zero(v.b, v) and _is_zero(v.c, v))


def _is_planar_translation(v):
    return (_is_zero(v.a, v) and _is_zero(v.d, v)
            and not (_is_zero(v.b, v) and _is_zero(v.c, v)))


def _match_t3(w1, w2, w3):
    if _is_zero(w1.a, w1) or _is_zero(w3.a, w3) or not _is_planar_translation(w2):
        return None
    s1, s3 = 1.0 / w1.a, 1.0 / w3.a
    b1, c1, d1 = w1.b * s1, w1.c * s1, w1.d * s1
    b3, c3, d3 = w3.b * s3, w3.c * s3, w3.d * s3
    if not (_close(b1, b3) and _close(c1, c3)) or _close(d1, d3):
        return None
    canonical = (Se2RVector(1.0, b1, c1, d1),
                 Se2RVector(0.0, w2.b, w2.c, 0.0),
                 Se2RVector(1.0, b1, c1, d3))
    return canonical, (s1, 1.0, s3)


def _match_t4(w1, w2, w3):
    # d3 is normalized to 1 even when it equals d1; controllability only needs d3 != 0
    if _is_zero(w1.a, w1) or not _is_planar_translation(w2) or not _is_prismatic(w3):
        return None
    s1, s3 = 1.0 / w1.a, 1.0 / w3.d
    canonical = (Se2RVector(1.0, w1.b * s1, w1.c * s1, w1.d * s1),
                 Se2RVector(0.0, w2.b, w2.c, 0.0),
                 Se2RVector(0.0, 0.0, 0.0, 1.0))
    return canonical, (s1, 1.0, s3)


def _match_t5(w1, w2, w3):
    if _is_zero(w1.a, w1) or _is_zero(w2.a, w2) or not _is_prismatic(w3):
        return None
    s1, s2, s3 = 1.0 / w1.a, 1.0 / w2.a, 1.0 / w3.d
    b1, c1, d1 = w1.b * s1, w1.c * s1, w1.d * s1
    b2, c2, d2 = w2.b * s2, w2.c * s2, w2.d * s2
    if not _close(d1, d2) or b1 ** 2 + c1 ** 2 > b2 ** 2 + c2 ** 2:
        return None
    canonical = (Se2RVector(1.0, b1, c1, d1),
                 Se2RVector(1.0, b2, c2, d1),
                 Se2RVector(0.0, 0.0, 0.0, 1.0))
    return canonical, (s1, s2, s3)


_TRIPLE_MATCHERS = ((Family.T3, _match_t3), (Family.T4, _match_t4), (Family.T5, _match_t5))


def classify_se2r_3(v1, v2, v3):
    """Match a three-input system on SE(2) x R against T3, T4 and T5

    Every pair must be uncontrollable on its own and the triple must have a
    full-rank closure; otherwise the result is OutOfCatalog or Uncontrollable.
    """
    fields = (v1, v2, v3)
    for i, j in itertools.combinations(range(3), 2):
        if se2r_controllable_2(fields[i], fields[j]):
            return SystemClass(
                Family.OUT_OF_CATALOG,
                note=f"Fields {i + 1} and {j + 1} already form a controllable pair",
            )
    if closure_rank(fields, depth=3) < 4:
        return _uncontrollable('Lie closure of the triple has rank below 4')
    for family, matcher in _TRIPLE_MATCHERS:
        for permutation in itertools.permutations(range(3)):
            match = matcher(*(fields[k] for k in permutation))
            if match is None:
                continue
            canonical, scales = match
            record = NormalizationRecord(tuple(k + 1 for k in permutation), scales)
            return SystemClass(family, canonical, record)
    return SystemClass(Family.OUT_OF_CATALOG, note='Controllable triple outside T3, T4 and T5')


_PAIR_CLASSIFIERS = {SE2: classify_se2, SO3: classify_so3, SE2R: classify_se2r_2}
_FULL_RANK = {SE2: 3, SO3: 3, SE2R: 4}


def _classify_first_pair(fields, group):
    """Classify the first controllable pair of a three-field system"""
    classifier = _PAIR_CLASSIFIERS[group]
    for i, j in itertools.combinations(range(len(fields)), 2):
        pair_class = classifier(fields[i], fields[j])
        if pair_class.family == Family.UNCONTROLLABLE:
            continue
        users = (i + 1, j + 1)
        record = pair_class.record
        remapped = NormalizationRecord(
            tuple(users[p - 1] for p in record.permutation), record.scales, record.conjugation
        )
        unused = sorted(set(range(1, len(fields) + 1)) - set(users))
        note = f"Planning with fields {i + 1} and {j + 1}; field {unused[0]} unused"
        return SystemClass(pair_class.family, pair_class.canonical_fields, remapped, note)
    return None


def validate_fields(fields, group):
    if group not in VECTOR_TYPES:
        raise SpecError(f"Unknown group {group!r}")
    if len(fields) not in (2, 3):
        raise SpecError(f"Expected 2 or 3 fields, got {len(fields)}")
    for v in fields:
        if not isinstance(v, VECTOR_TYPES[group]):
            raise GroupMismatch(f"Field {v!r} does not belong to the algebra of {group}")
        if not all(math.isfinite(x) for x in v.coefficients):
            raise SpecError(f"Field {v!r} has non-finite coefficients")


def classify(fields, group):
    """Classify a user system of 2 or 3 fields on the given group"""
    validate_fields(fields, group)
    fields = tuple(fields)
    if len(fields) == 2:
        system_class = _PAIR_CLASSIFIERS[group](*fields)
    elif group == SE2R:
        system_class = classify_se2r_3(*fields)
        if system_class.family == Family.OUT_OF_CATALOG and system_class.record is None:
            system_class = _classify_first_pair(fields, group) or system_class
    else:
        system_class = _classify_first_pair(fields, group)
        if system_class is None:
            system_class = _uncontrollable(
                f"Lie closure rank {closure_rank(fields, depth=2)} below {_FULL_RANK[group]}"
            )
    logger.debug(f"Classified {group} system {[v.coefficients for v in fields]} as {system_class.family.value}")
    return system_class

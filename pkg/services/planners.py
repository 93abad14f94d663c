"""Forward kinematics of motion-primitive sequences and closed-form inverses.

Each canonical family has a fixed multiindex (the order in which the input
fields are switched on) and an inverse-kinematics map returning the coasting
times. Global maps accept every target; local maps check a domain predicate
first and raise OutsideDomain unless forced.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from services.algebra import (
    Rotation, Se2Pose, Se2RPose, So3Vector, atan2c, axis_angle, compose, exp, exp_unit_axis_so3,
    identity, indicator, one_minus_cos, sign,
)
from services.controllability import Family, classify
from services.errors import (
    DegenerateL, GroupMismatch, InvalidPlan, OutOfCatalog, OutsideDomain, Uncontrollable,
)

logger = logging.getLogger(__name__)

MULTIINDEX = {
    Family.S1: (1, 2, 1),
    Family.S2: (1, 2, 1),
    Family.SO3: (1, 2, 1),
    Family.T1: (1, 2, 1, 2, 1),
    Family.T2: (1, 2, 1, 2, 1),
    Family.T3: (1, 3, 2, 1),
    Family.T4: (1, 2, 1, 3),
    Family.T5: (1, 2, 1, 3),
}

LOCAL_FAMILIES = (Family.S2, Family.SO3, Family.T2, Family.T5)

# arccos and sqrt arguments this close to their bound are treated as rounding noise
CLAMP_TOLERANCE = 1e-12
# Below this |w| the first SO(3) time is recovered from the residual z-rotation
SO3_DEGENERATE = 1e-4


def canonical_multiindex(family):
    """Switch pattern used by the planner of a family"""
    try:
        return MULTIINDEX[Family(family)]
    except (KeyError, ValueError):
        raise OutOfCatalog(f"No planner for family {family}") from None


@dataclass(frozen=True)
class PlanStep:
    field: int
    time: float


@dataclass(frozen=True)
class MotionPlan:
    steps: tuple
    family: Family = None
    note: str = ''

    @property
    def multiindex(self):
        return tuple(step.field for step in self.steps)

    @property
    def times(self):
        return tuple(step.time for step in self.steps)

    def to_dict(self):
        return {
            'family': None if self.family is None else self.family.value,
            'steps': [{'field': step.field, 'time': step.time} for step in self.steps],
            'note': self.note,
        }


@dataclass(frozen=True)
class DomainVerdict:
    inside: bool
    violated: str = ''
    margin: float = 0.0
    slacks: dict = field(default_factory=dict)

    def to_dict(self):
        return {'inside': self.inside, 'violated': self.violated,
                'margin': self.margin, 'slacks': dict(self.slacks)}


def _verdict(slacks):
    """Closed-set verdict over named constraint slacks"""
    name, margin = min(slacks.items(), key=lambda item: item[1])
    inside = all(value >= 0.0 for value in slacks.values())
    return DomainVerdict(inside, '' if inside else name, float(margin), slacks)


def _refuse(family, verdict):
    raise OutsideDomain(
        f"Target outside the {family.value} domain ({verdict.violated}, margin {verdict.margin:.3e})",
        verdict,
    )


def _clamped_sqrt(value, family, constraint):
    if value >= 0.0:
        return math.sqrt(value)
    if value >= -CLAMP_TOLERANCE:
        return 0.0
    _refuse(family, DomainVerdict(False, constraint, value, {constraint: value}))


def _clamped_arccos(value, family, constraint):
    if -1.0 <= value <= 1.0:
        return math.acos(value)
    if abs(value) <= 1.0 + CLAMP_TOLERANCE:
        return math.acos(max(-1.0, min(1.0, value)))
    slack = 1.0 - abs(value)
    _refuse(family, DomainVerdict(False, constraint, slack, {constraint: slack}))


def fk(fields, multiindex, times):
    """exp(t1 V_i1) ... exp(tk V_ik) for 1-based indices"""
    if len(multiindex) != len(times):
        raise InvalidPlan(f"Multiindex has {len(multiindex)} entries but {len(times)} times were given")
    if not fields:
        raise InvalidPlan('No fields given')
    g = identity(fields[0].group)
    for index, t in zip(multiindex, times):
        if not 1 <= index <= len(fields):
            raise InvalidPlan(f"Field index {index} outside 1..{len(fields)}")
        g = compose(g, exp(fields[index - 1], t))
    return g


def _rotation_offset(b1, c1, theta):
    """Displacement of a full rotation by theta along (1, b1, c1)"""
    vt, st = one_minus_cos(theta), math.sin(theta)
    return -c1 * vt + b1 * st, b1 * vt + c1 * st


def _translation_residual(b1, c1, target):
    ox, oy = _rotation_offset(b1, c1, target.theta)
    return target.x - ox, target.y - oy


def _one_rotating_ab(b2, c2, ex, ey):
    """(alpha, beta) when the second field is a pure translation (b2, c2)"""
    scale = b2 * b2 + c2 * c2
    return (b2 * ex + c2 * ey) / scale, (-c2 * ex + b2 * ey) / scale


def _two_rotating_ab(b1, c1, b2, c2, ex, ey):
    """(alpha, beta) when both fields rotate"""
    p, q = c1 - c2, b1 - b2
    scale = p * p + q * q
    return (p * ex - q * ey) / scale, (q * ex + p * ey) / scale


# SE(2)

def ik_s1(sys, target, *, force=False, paper_literal=False):
    """Global inverse of FK^(1,2,1) for (1, b1, c1), (0, b2, c2)"""
    v1, v2 = sys
    ex, ey = _translation_residual(v1.b, v1.c, target)
    alpha, beta = _one_rotating_ab(v2.b, v2.c, ex, ey)
    t1 = atan2c(alpha, beta)
    return (t1, math.hypot(alpha, beta), target.theta - t1)


def domain_s2(sys, target):
    v1, v2 = sys
    n2 = (v1.c - v2.c) ** 2 + (v1.b - v2.b) ** 2
    rotation = 2.0 * one_minus_cos(target.theta) * (v1.b ** 2 + v1.c ** 2)
    return _verdict({
        'translation bound': n2 - (target.x ** 2 + target.y ** 2),
        'rotation bound': n2 - rotation,
    })


def _two_chord_times(rho, phi, theta, family):
    root = _clamped_sqrt(4.0 - rho * rho, family, 'rho <= 2')
    t1 = atan2c(rho, root) + phi
    t2 = atan2c(2.0 - rho * rho, rho * root)
    return t1, t2, theta - t1 - t2


def ik_s2(sys, target, *, force=False, paper_literal=False):
    """Local inverse of FK^(1,2,1) for two rotating fields"""
    if not force:
        verdict = domain_s2(sys, target)
        if not verdict.inside:
            _refuse(Family.S2, verdict)
    v1, v2 = sys
    ex, ey = _translation_residual(v1.b, v1.c, target)
    alpha, beta = _two_rotating_ab(v1.b, v1.c, v2.b, v2.c, ex, ey)
    return _two_chord_times(math.hypot(alpha, beta), atan2c(alpha, beta), target.theta, Family.S2)


# SO(3)

def domain_so3(sys, target):
    c = sys[1].c
    return _verdict({'R33 lower bound': float(target.r[2, 2]) - (2.0 * c * c - 1.0)})


def so3_domain_axis_angle(sys, target):
    """Axis-angle form of the SO(3) domain test"""
    c = sys[1].c
    aa = axis_angle(target)
    sin2 = 1.0 - aa.omega[2] ** 2
    return sin2 * one_minus_cos(aa.angle) <= 2.0 * (1.0 - c * c)


def so3_sufficient_conditions(sys, target):
    """The two sufficient conditions for membership in the SO(3) domain"""
    c = sys[1].c
    aa = axis_angle(target)
    return {
        'angle': aa.angle <= math.acos(max(-1.0, min(1.0, 2.0 * c * c - 1.0))),
        'axis': 1.0 - aa.omega[2] ** 2 <= 1.0 - c * c,
    }


def ik_so3(sys, target, *, force=False, paper_literal=False):
    """Local inverse of FK^(1,2,1) for e_z and a unit (a, b, c)"""
    if not force:
        verdict = domain_so3(sys, target)
        if not verdict.inside:
            _refuse(Family.SO3, verdict)
    v2 = sys[1]
    a, b, c = v2.a, v2.b, v2.c
    r = target.r
    t2 = _clamped_arccos((r[2, 2] - c * c) / (1.0 - c * c), Family.SO3, 'R33 lower bound')
    z1, z2 = one_minus_cos(t2), math.sin(t2)
    w1, w2 = a * c * z1 + b * z2, c * b * z1 - a * z2
    v1_, v2_ = a * c * z1 - b * z2, c * b * z1 + a * z2
    t3 = atan2c(v1_ * r[2, 0] + v2_ * r[2, 1], v2_ * r[2, 0] - v1_ * r[2, 1])
    if math.hypot(w1, w2) >= SO3_DEGENERATE:
        t1 = atan2c(w1 * r[0, 2] + w2 * r[1, 2], -w2 * r[0, 2] + w1 * r[1, 2])
    else:
        e_z = So3Vector(0.0, 0.0, 1.0)
        rest = exp_unit_axis_so3(v2, t2).r @ exp_unit_axis_so3(e_z, t3).r
        m = r @ rest.T
        t1 = math.atan2(m[1, 0], m[0, 0])
    return (t1, t2, t3)


# SE(2) x R, two inputs

def ik_t1(sys, target, *, force=False, paper_literal=False):
    """Global inverse of FK^(1,2,1,2,1) for (1, b1, c1, d1), (0, b2, c2, 1)"""
    v1, v2 = sys
    gamma = target.z - v1.d * target.theta
    ex, ey = _translation_residual(v1.b, v1.c, target)
    alpha, beta = _one_rotating_ab(v2.b, v2.c, ex, ey)
    rho = math.hypot(alpha, beta)
    phi = atan2c(alpha, beta)
    if paper_literal:
        t1 = math.pi * indicator(gamma - rho < 0) + phi + atan2c((rho + gamma) / 2.0, 0.0)
        t3 = (atan2c((rho * rho - gamma * gamma) / 4.0, 0.0)
              + math.pi * (indicator(gamma + rho < 0) - indicator(gamma - rho < 0)))
    else:
        # Reversed first leg, half turn between the two translation legs
        t1 = phi + math.pi
        t3 = -math.pi
    return (t1, (gamma - rho) / 2.0, t3, (gamma + rho) / 2.0, target.theta - t1 - t3)


def _t2_prismatic_bound(v1, v2, target):
    n = math.hypot(v1.c - v2.c, v1.b - v2.b)
    reach = (math.hypot(target.x, target.y)
             + math.hypot(v1.b, v1.c) * math.sqrt(2.0 * one_minus_cos(target.theta)))
    argument = -1.0 + reach / n
    if argument > 1.0:
        return None
    return 2.0 * abs(v2.d - v1.d) * math.acos(max(-1.0, argument))


def domain_t2(sys, target):
    v1, v2 = sys
    n2 = (v1.c - v2.c) ** 2 + (v1.b - v2.b) ** 2
    rotation = 2.0 * one_minus_cos(target.theta) * (v1.b ** 2 + v1.c ** 2)
    bound = _t2_prismatic_bound(v1, v2, target)
    gamma_abs = abs(target.z - v1.d * target.theta)
    prismatic = -gamma_abs - 1.0 if bound is None else bound - gamma_abs
    return _verdict({
        'translation bound': 4.0 * n2 - (target.x ** 2 + target.y ** 2),
        'rotation bound': 4.0 * n2 - rotation,
        'prismatic bound': prismatic,
    })


def _t2_literal(v1, v2, target, gamma):
    p, q = v1.d - v2.d, v1.c - v2.c
    scale = p * p + q * q
    vt, st = one_minus_cos(target.theta), math.sin(target.theta)
    ex = target.x - (-v1.d * vt + v1.c * st)
    ey = target.y - (v1.c * vt + v1.d * st)
    alpha, beta = (p * ex - q * ey) / scale, (q * ex + p * ey) / scale
    rho = math.hypot(alpha, beta)
    s, c = math.sin(gamma / 2.0), math.cos(gamma / 2.0)
    discriminant = rho * rho * (1.0 + c) ** 2 - (1.0 + c) * (2.0 * rho * rho - 8.0 * s * s)
    if discriminant < 0.0 or 1.0 + c == 0.0:
        raise DegenerateL(f"Negative discriminant {discriminant:.3e}", discriminant)
    l = (rho * (1.0 + c) + sign(gamma) * math.sqrt(discriminant)) / (2.0 * (1.0 + c))
    if abs(l) > 2.0 or abs(rho - l) > 2.0:
        raise DegenerateL(f"Chord length {l:.6f} outside [-2, 2]", discriminant)
    t1 = atan2c(l, math.sqrt(4.0 - l * l)) + atan2c(alpha, beta)
    t2 = 2.0 * atan2c(math.sqrt(4.0 - l * l), l)
    t3 = -atan2c(rho - l, math.sqrt(4.0 - (rho - l) ** 2)) - t1 - t2
    t4 = gamma - t2
    return (t1, t2, t3, t4, target.theta - t1 - t2 - t3 - t4)


def ik_t2(sys, target, *, force=False, paper_literal=False):
    """Local inverse of FK^(1,2,1,2,1) for two rotating fields

    The in-plane motion splits into two chords of the unit circle, of
    lengths l and rho - l, whose turning angles add up to gamma.
    """
    if not force:
        verdict = domain_t2(sys, target)
        if not verdict.inside:
            _refuse(Family.T2, verdict)
    v1, v2 = sys
    gamma = (target.z - v1.d * target.theta) / (v2.d - v1.d)
    if paper_literal:
        return _t2_literal(v1, v2, target, gamma)

    ex, ey = _translation_residual(v1.b, v1.c, target)
    alpha, beta = _two_rotating_ab(v1.b, v1.c, v2.b, v2.c, ex, ey)
    rho = math.hypot(alpha, beta)
    phi = atan2c(alpha, beta)
    s, c = math.sin(gamma / 2.0), math.cos(gamma / 2.0)
    if 1.0 + c < CLAMP_TOLERANCE:
        raise DegenerateL(f"Turning angle {gamma:.6f} leaves no room for two chords")
    discriminant = (1.0 + c) * (1.0 - c) * (8.0 * (1.0 + c) - rho * rho)
    if discriminant < -CLAMP_TOLERANCE:
        logger.warning(f"T2 discriminant {discriminant:.3e} negative for target {target.coordinates}")
        raise DegenerateL(f"Negative discriminant {discriminant:.3e}", discriminant)
    l = (rho * (1.0 + c) + sign(gamma) * math.sqrt(max(0.0, discriminant))) / (2.0 * (1.0 + c))
    root = _clamped_sqrt(4.0 - l * l, Family.T2, 'chord length <= 2')
    t1 = atan2c(l, root) + phi
    t2 = 2.0 * atan2c(root, l)
    t4 = gamma - t2

    # Second chord must carry the rest of (alpha, beta)
    rx = alpha - (math.cos(t1) - math.cos(t1 + t2))
    ry = beta - (math.sin(t1) - math.sin(t1 + t2))
    length = 2.0 * math.sin(t4 / 2.0)
    psi = atan2c(length * rx, length * ry)
    t3 = psi - t4 / 2.0 + math.pi / 2.0 - t1 - t2
    return (t1, t2, t3, t4, target.theta - t1 - t2 - t3 - t4)


# SE(2) x R, three inputs

def ik_t3(sys, target, *, force=False, paper_literal=False):
    """Global inverse of FK^(1,3,2,1)"""
    v1, v2, v3 = sys
    ex, ey = _translation_residual(v1.b, v1.c, target)
    alpha, beta = _one_rotating_ab(v2.b, v2.c, ex, ey)
    phi = atan2c(alpha, beta)
    t2 = (target.z - v1.d * target.theta) / (v3.d - v1.d)
    return (phi - t2, t2, math.hypot(alpha, beta), target.theta - phi)


def ik_t4(sys, target, *, force=False, paper_literal=False):
    """Global inverse of FK^(1,2,1,3)"""
    v1, v2, v3 = sys
    ex, ey = _translation_residual(v1.b, v1.c, target)
    if paper_literal:
        scale = v2.b ** 2 + v2.c ** 2
        alpha = (v2.b * ex + v2.c * ey) / scale
        beta = (-v2.c * ex + v2.d * ey) / scale
    else:
        alpha, beta = _one_rotating_ab(v2.b, v2.c, ex, ey)
    phi = atan2c(alpha, beta)
    return (phi, math.hypot(alpha, beta), target.theta - phi,
            (target.z - v1.d * target.theta) / v3.d)


def domain_t5(sys, target):
    v1, v2, _ = sys
    return domain_s2((v1, v2), target)


def ik_t5(sys, target, *, force=False, paper_literal=False):
    """Local inverse of FK^(1,2,1,3)"""
    if not force:
        verdict = domain_t5(sys, target)
        if not verdict.inside:
            _refuse(Family.T5, verdict)
    v1, v2, v3 = sys
    ex, ey = _translation_residual(v1.b, v1.c, target)
    alpha, beta = _two_rotating_ab(v1.b, v1.c, v2.b, v2.c, ex, ey)
    t1, t2, t3 = _two_chord_times(math.hypot(alpha, beta), atan2c(alpha, beta), target.theta, Family.T5)
    return (t1, t2, t3, (target.z - v1.d * target.theta) / v3.d)


IK_MAPS = {
    Family.S1: ik_s1,
    Family.S2: ik_s2,
    Family.SO3: ik_so3,
    Family.T1: ik_t1,
    Family.T2: ik_t2,
    Family.T3: ik_t3,
    Family.T4: ik_t4,
    Family.T5: ik_t5,
}

DOMAINS = {
    Family.S2: domain_s2,
    Family.SO3: domain_so3,
    Family.T2: domain_t2,
    Family.T5: domain_t5,
}


def ik(family, sys, target, force=False, paper_literal=False):
    """Coasting times of the family's multiindex reaching target"""
    return IK_MAPS[family](sys, target, force=force, paper_literal=paper_literal)


def domain(family, sys, target):
    """Domain verdict; global families accept every target"""
    check = DOMAINS.get(family)
    if check is None:
        return DomainVerdict(True, '', math.inf, {})
    return check(sys, target)


def _rot2(angle):
    return np.array([[math.cos(angle), -math.sin(angle)],
                     [math.sin(angle), math.cos(angle)]])


def _unit(angle):
    return np.array([math.cos(angle), math.sin(angle)])


def _chord_displacement(v1, v2, t):
    """(M2 - M1) [1 - cos t, sin t] for two rotating fields"""
    p, q = v1.c - v2.c, v1.b - v2.b
    return np.array([[p, -q], [-q, -p]]) @ np.array([one_minus_cos(t), math.sin(t)])


def fk_closed_form(family, sys, times):
    """Pose reached by the family's multiindex, from expanded expressions"""
    if family == Family.SO3:
        e_z = So3Vector(0.0, 0.0, 1.0)
        t1, t2, t3 = times
        product = (exp_unit_axis_so3(e_z, t1).r @ exp_unit_axis_so3(sys[1], t2).r
                   @ exp_unit_axis_so3(e_z, t3).r)
        return Rotation(product)

    v1 = sys[0]
    w2 = np.array([sys[1].b, sys[1].c])
    if family == Family.S1:
        t1, t2, t3 = times
        theta = t1 + t3
        xy = np.array(_rotation_offset(v1.b, v1.c, theta)) + t2 * (_rot2(t1) @ w2)
        return Se2Pose(theta, *xy)
    if family in (Family.S2, Family.T5):
        t1, t2, t3 = times[:3]
        theta = t1 + t2 + t3
        xy = np.array(_rotation_offset(v1.b, v1.c, theta)) + _rot2(t1) @ _chord_displacement(v1, sys[1], t2)
        if family == Family.S2:
            return Se2Pose(theta, *xy)
        return Se2RPose(theta, xy[0], xy[1], v1.d * theta + sys[2].d * times[3])
    if family == Family.T1:
        t1, t2, t3, t4, t5 = times
        theta = t1 + t3 + t5
        rotated = np.array([[w2[0], -w2[1]], [w2[1], w2[0]]]) @ (_unit(t1) * t2 + _unit(t1 + t3) * t4)
        xy = np.array(_rotation_offset(v1.b, v1.c, theta)) + rotated
        return Se2RPose(theta, xy[0], xy[1], t2 + t4 + v1.d * theta)
    if family == Family.T2:
        t1, t2, t3, t4, t5 = times
        theta = t1 + t2 + t3 + t4 + t5
        xy = (np.array(_rotation_offset(v1.b, v1.c, theta))
              + _rot2(t1) @ _chord_displacement(v1, sys[1], t2)
              + _rot2(t1 + t2 + t3) @ _chord_displacement(v1, sys[1], t4))
        return Se2RPose(theta, xy[0], xy[1], v1.d * theta + (sys[1].d - v1.d) * (t2 + t4))
    if family == Family.T3:
        t1, t2, t3, t4 = times
        theta = t1 + t2 + t4
        xy = np.array(_rotation_offset(v1.b, v1.c, theta)) + t3 * (_rot2(t1 + t2) @ w2)
        return Se2RPose(theta, xy[0], xy[1], v1.d * (t1 + t4) + sys[2].d * t2)
    if family == Family.T4:
        t1, t2, t3, t4 = times
        theta = t1 + t3
        xy = np.array(_rotation_offset(v1.b, v1.c, theta)) + t2 * (_rot2(t1) @ w2)
        return Se2RPose(theta, xy[0], xy[1], v1.d * theta + sys[2].d * t4)
    raise InvalidPlan(f"No closed-form kinematics for {family}")


def canonical_target(system_class, target):
    """Express the target in the coordinates of the canonical system"""
    conjugation = system_class.record.conjugation
    if conjugation is None:
        return target
    return Rotation(conjugation.r @ target.r @ conjugation.r.T)


def plan(fields, group, target, force=False, paper_literal=False):
    """Classify the user system, invert canonically and map times back"""
    system_class = classify(fields, group)
    if system_class.family == Family.UNCONTROLLABLE:
        raise Uncontrollable(system_class.note or 'System is not controllable', system_class)
    if system_class.family == Family.OUT_OF_CATALOG:
        raise OutOfCatalog(system_class.note or 'System matches no canonical family', system_class)
    if target.group != group:
        raise GroupMismatch(f"Target belongs to {target.group}, fields to {group}")

    family = system_class.family
    times = ik(family, system_class.canonical_fields, canonical_target(system_class, target),
               force=force, paper_literal=paper_literal)
    steps = tuple(
        PlanStep(*system_class.record.to_user(index, t))
        for index, t in zip(MULTIINDEX[family], times)
    )
    logger.info(f"Planned {family.value} motion with {len(steps)} steps")
    return MotionPlan(steps, family, system_class.note)


def sample_trajectory(fields, motion_plan, dt):
    """(elapsed time, pose) samples along each leg with spacing at most dt"""
    if dt <= 0:
        raise InvalidPlan(f"Sampling interval must be positive, got {dt}")
    if not fields:
        raise InvalidPlan('No fields given')
    g = identity(fields[0].group)
    elapsed = 0.0
    samples = [(0.0, g)]
    for step in motion_plan.steps:
        if not 1 <= step.field <= len(fields):
            raise InvalidPlan(f"Field index {step.field} outside 1..{len(fields)}")
        v = fields[step.field - 1]
        count = max(1, math.ceil(abs(step.time) / dt))
        for k in range(1, count + 1):
            s = step.time if k == count else step.time * k / count
            samples.append((elapsed + abs(s), compose(g, exp(v, s))))
        g = samples[-1][1]
        elapsed += abs(step.time)
    return samples

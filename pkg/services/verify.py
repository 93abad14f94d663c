"""Independent oracles and falsification experiments for the planners.

The matrix exponential and the Lie closure rank here are computed from
plain matrix arithmetic and never call the closed forms they check.
Randomized runs derive one RNG stream per trial from (seed, trial labels),
so a report is reproducible from its seed regardless of trial order.
"""
import hashlib
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from services.algebra import (
    SE2, SO3, SE2R, Rotation, Se2Pose, Se2RPose, Se2RVector, Se2Vector, So3Vector,
    exp, pose_distance, to_matrix,
)
from services.controllability import (
    EPS_RANK, FAMILY_GROUPS, Family, classify, se2_controllable, se2_determinant,
    se2r_conditions, se2r_controllable_2, so3_controllable, so3_determinant,
)
from services.errors import PlannerError
from services.planners import MULTIINDEX, domain, fk, ik

logger = logging.getLogger(__name__)

PARAM_RANGE = 5.0
TARGET_RANGE = 20.0
DEGENERATE = 1e-3
DEFAULT_TOLERANCE = 1e-9

SAMPLING_NOTE = (
    f"family parameters uniform in [-{PARAM_RANGE}, {PARAM_RANGE}], systems with a defining "
    f"determinant below {DEGENERATE} rejected; global targets uniform with |x|, |y|, |z| <= "
    f"{TARGET_RANGE}; local targets drawn inside the domain"
)

_BASIS = {
    SE2: (
        np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
        np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
        np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]),
    ),
    SO3: (
        np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]),
        np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
        np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
    ),
    SE2R: (
        np.array([[0.0, -1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]]),
        np.array([[0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]]),
        np.array([[0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]]),
        np.array([[0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 0.0]]),
    ),
}


def _derive_seed(seed, *parts):
    h = hashlib.blake2b(digest_size=16)
    h.update(str(seed).encode('utf-8'))
    for part in parts:
        h.update(b'|')
        h.update(str(part).encode('utf-8'))
    return int.from_bytes(h.digest(), byteorder='big', signed=False)


def trial_rng(seed, *parts):
    """Independent generator for one trial"""
    return np.random.default_rng(_derive_seed(seed, *parts))


def generator(v):
    """Matrix of an algebra vector built from the basis generators"""
    return sum(coefficient * basis for coefficient, basis in zip(v.coefficients, _BASIS[v.group]))


def series_exp(matrix, terms=30):
    """Truncated exponential series with scaling and squaring"""
    m = np.asarray(matrix, dtype=float)
    norm = float(np.linalg.norm(m, 1))
    squarings = 0
    if norm > 0.5:
        squarings = int(math.ceil(math.log2(norm / 0.5)))
    scaled = m / (2.0 ** squarings)
    result = np.eye(m.shape[0])
    term = np.eye(m.shape[0])
    for k in range(1, terms + 1):
        term = term @ scaled / k
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result


def lie_closure_rank(fields, depth):
    """Rank of the span of the fields and their commutators nested up to depth"""
    layer = []
    for v in fields:
        m = generator(v)
        largest = float(np.max(np.abs(m)))
        layer.append(m / largest if largest > 0.0 else m)
    generators = list(layer)
    span = list(layer)
    for _ in range(depth):
        layer = [x @ y - y @ x for x in generators for y in layer]
        span.extend(layer)
    stacked = np.array([m.flatten() for m in span])
    singular_values = np.linalg.svd(stacked, compute_uv=False)
    return int(np.sum(singular_values > EPS_RANK * max(1.0, float(singular_values[0]))))


# Sampling

def _unit_circle(rng):
    angle = rng.uniform(-math.pi, math.pi)
    return math.cos(angle), math.sin(angle)


def _planar_direction(rng):
    while True:
        b, c = rng.uniform(-PARAM_RANGE, PARAM_RANGE, size=2)
        if b * b + c * c >= DEGENERATE:
            return float(b), float(c)


def _nonzero(rng):
    while True:
        value = float(rng.uniform(-PARAM_RANGE, PARAM_RANGE))
        if abs(value) >= DEGENERATE:
            return value


def _rotating_pair(rng):
    while True:
        b1, c1, b2, c2 = (float(x) for x in rng.uniform(-PARAM_RANGE, PARAM_RANGE, size=4))
        if (c1 - c2) ** 2 + (b1 - b2) ** 2 >= DEGENERATE:
            return b1, c1, b2, c2


def sample_system(family, rng):
    """Random canonical system of a family"""
    uniform = lambda n: [float(x) for x in rng.uniform(-PARAM_RANGE, PARAM_RANGE, size=n)]
    if family == Family.S1:
        b1, c1 = uniform(2)
        return (Se2Vector(1.0, b1, c1), Se2Vector(0.0, *_unit_circle(rng)))
    if family == Family.S2:
        b1, c1, b2, c2 = _rotating_pair(rng)
        return (Se2Vector(1.0, b1, c1), Se2Vector(1.0, b2, c2))
    if family == Family.SO3:
        while True:
            u = rng.normal(size=3)
            u = u / np.linalg.norm(u)
            if 1.0 - u[2] ** 2 >= DEGENERATE:
                return (So3Vector(0.0, 0.0, 1.0), So3Vector(*(float(x) for x in u)))
    if family == Family.T1:
        b1, c1, d1 = uniform(3)
        return (Se2RVector(1.0, b1, c1, d1), Se2RVector(0.0, *_planar_direction(rng), 1.0))
    if family == Family.T2:
        b1, c1, b2, c2 = _rotating_pair(rng)
        d1 = float(rng.uniform(-PARAM_RANGE, PARAM_RANGE))
        while True:
            d2 = float(rng.uniform(-PARAM_RANGE, PARAM_RANGE))
            if abs(d2 - d1) >= DEGENERATE:
                break
        return (Se2RVector(1.0, b1, c1, d1), Se2RVector(1.0, b2, c2, d2))
    if family == Family.T3:
        b1, c1, d1 = uniform(3)
        while True:
            d3 = float(rng.uniform(-PARAM_RANGE, PARAM_RANGE))
            if abs(d3 - d1) >= DEGENERATE:
                break
        return (Se2RVector(1.0, b1, c1, d1),
                Se2RVector(0.0, *_planar_direction(rng), 0.0),
                Se2RVector(1.0, b1, c1, d3))
    if family == Family.T4:
        b1, c1, d1 = uniform(3)
        return (Se2RVector(1.0, b1, c1, d1),
                Se2RVector(0.0, *_planar_direction(rng), 0.0),
                Se2RVector(0.0, 0.0, 0.0, _nonzero(rng)))
    if family == Family.T5:
        b1, c1, b2, c2 = _rotating_pair(rng)
        d1 = float(rng.uniform(-PARAM_RANGE, PARAM_RANGE))
        return (Se2RVector(1.0, b1, c1, d1),
                Se2RVector(1.0, b2, c2, d1),
                Se2RVector(0.0, 0.0, 0.0, _nonzero(rng)))
    raise ValueError(f"Cannot sample systems of {family}")


def haar_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0.0:
        q[:, 0] = -q[:, 0]
    return Rotation(q)


def _disk(rng, radius):
    angle = rng.uniform(-math.pi, math.pi)
    r = radius * math.sqrt(rng.uniform(0.0, 1.0))
    return r * math.cos(angle), r * math.sin(angle)


def _half_angle_limit(ratio):
    """Largest |theta| with 2 |sin(theta / 2)| <= ratio"""
    return 2.0 * math.asin(min(1.0, ratio / 2.0))


def _so3_target(sys, rng):
    c = sys[1].c
    for _ in range(20):
        candidate = haar_rotation(rng)
        if float(candidate.r[2, 2]) >= 2.0 * c * c - 1.0:
            return candidate
    # Fall back on the angle condition, which is sufficient on its own
    limit = 0.999 * math.acos(max(-1.0, min(1.0, 2.0 * c * c - 1.0)))
    axis = rng.normal(size=3)
    axis = axis / np.linalg.norm(axis)
    return exp(So3Vector(*(float(x) for x in axis)), float(rng.uniform(0.0, limit)))


def sample_target(family, sys, rng):
    """Random target; local families get targets inside their domain"""
    if family == Family.SO3:
        return _so3_target(sys, rng)
    theta = float(rng.uniform(-math.pi, math.pi))
    if family in (Family.S1, Family.T1, Family.T3, Family.T4):
        x, y, z = (float(v) for v in rng.uniform(-TARGET_RANGE, TARGET_RANGE, size=3))
        if family == Family.S1:
            return Se2Pose(theta, x, y)
        return Se2RPose(theta, x, y, z)

    v1, v2 = sys[0], sys[1]
    n = math.hypot(v1.c - v2.c, v1.b - v2.b)
    r1 = math.hypot(v1.b, v1.c)
    if family in (Family.S2, Family.T5):
        limit = math.pi if r1 == 0.0 else _half_angle_limit(n / r1)
        theta = 0.999 * float(rng.uniform(-limit, limit))
        x, y = _disk(rng, 0.999 * n)
        if family == Family.S2:
            return Se2Pose(theta, x, y)
        return Se2RPose(theta, x, y, float(rng.uniform(-TARGET_RANGE, TARGET_RANGE)))

    # T2: spend at most 0.9 n on rotation, keep the combined reach below 1.8 n
    limit = math.pi if r1 == 0.0 else _half_angle_limit(0.9 * n / r1)
    theta = 0.999 * float(rng.uniform(-limit, limit))
    rotation_reach = r1 * 2.0 * abs(math.sin(theta / 2.0))
    x, y = _disk(rng, 1.8 * n - rotation_reach)
    reach = math.hypot(x, y) + rotation_reach
    gamma_limit = 2.0 * math.acos(max(-1.0, min(1.0, -1.0 + reach / n)))
    gamma = 0.9 * float(rng.uniform(-gamma_limit, gamma_limit))
    return Se2RPose(theta, x, y, v1.d * theta + gamma * (v2.d - v1.d))


def _wide_target(family, sys, rng):
    """Target drawn well beyond the domain of a local family"""
    if family == Family.SO3:
        return haar_rotation(rng)
    v1, v2 = sys[0], sys[1]
    n = math.hypot(v1.c - v2.c, v1.b - v2.b)
    theta = float(rng.uniform(-math.pi, math.pi))
    if family == Family.S2:
        return Se2Pose(theta, *_disk(rng, 3.0 * n))
    x, y = _disk(rng, (4.0 if family == Family.T2 else 3.0) * n)
    if family == Family.T2:
        gamma = float(rng.uniform(-2.0 * math.pi, 2.0 * math.pi))
        return Se2RPose(theta, x, y, v1.d * theta + gamma * (v2.d - v1.d))
    return Se2RPose(theta, x, y, float(rng.uniform(-TARGET_RANGE, TARGET_RANGE)))


# Reports

@dataclass(frozen=True)
class FuzzFailure:
    system: tuple
    target: tuple
    times: tuple
    residual: float
    error: str = ''


@dataclass(frozen=True)
class FuzzReport:
    family: str
    trials: int
    max_residual: float
    failures: tuple
    seed: int
    paper_literal: bool = False
    tolerance: float = DEFAULT_TOLERANCE
    sampling: str = SAMPLING_NOTE

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ImpossibilityScan:
    t3_bound: float
    beta: float
    best_residual: float
    argmin: tuple
    order: str = '2121'
    pose_residual: float = 0.0
    envelope: tuple = ()

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class TightnessReport:
    family: str
    samples: int
    outside: int
    recovered: int
    excess_fraction: float
    note: str = ''

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class AgreementReport:
    group: str
    checked: int
    skipped: int
    disagreements: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _residual(family, sys, target, times):
    return pose_distance(fk(sys, MULTIINDEX[family], times), target)


def fuzz_family(family, systems, targets_per_system, seed, paper_literal=False,
                tolerance=DEFAULT_TOLERANCE):
    """Round-trip fk(ik(g)) over random canonical systems and targets"""
    family = Family(family)
    failures = []
    max_residual = 0.0
    trials = 0
    for i in range(systems):
        sys = sample_system(family, trial_rng(seed, family.value, 'system', i))
        for j in range(targets_per_system):
            target = sample_target(family, sys, trial_rng(seed, family.value, i, j))
            trials += 1
            try:
                times = ik(family, sys, target, paper_literal=paper_literal)
                residual = _residual(family, sys, target, times)
                error = '' if math.isfinite(residual) else 'non-finite residual'
            except (PlannerError, ValueError) as e:
                times, residual, error = (), math.inf, f"{type(e).__name__}: {e}"
            if not math.isfinite(residual):
                residual = math.inf
            max_residual = max(max_residual, residual)
            if residual >= tolerance:
                failures.append(FuzzFailure(
                    tuple(v.coefficients for v in sys), target.coordinates,
                    tuple(float(t) for t in times), residual, error,
                ))
    logger.info(f"Fuzzed {family.value}: {trials} trials, {len(failures)} failures, max residual {max_residual:.3e}")
    return FuzzReport(family.value, trials, max_residual, tuple(failures), seed,
                      paper_literal, tolerance)


def _reduced_residual(t2, t3, beta):
    """|t3 (cos t2 - 1, sin t2) - (0, beta)|"""
    half = math.sin(0.5 * t2)
    return math.hypot(-2.0 * half * half * t3, math.sin(t2) * t3 - beta)


def _best_t2(t3, beta):
    """Minimizing t2 for a fixed t3"""
    if t3 == 0.0:
        return 0.0
    return math.atan2(math.copysign(1.0, t3) * beta, abs(t3))


def impossibility_scan(sys, beta, t3_bound, grid=401, order='2121', iterations=50):
    """Smallest distance from (0, beta) reachable by the four-switch sequences

    With theta = z = 0 the planar equation of either four-switch order
    reduces to f(t2, t3) = t3 (cos t2 - 1, sin t2). The scan grids
    |t3| <= t3_bound, then refines with exact t2 updates and a pattern
    search on t3.
    """
    if order not in ('2121', '1212'):
        raise ValueError(f"Unknown order {order!r}")
    if grid % 2 == 0:
        grid += 1
    t2_values = np.linspace(-math.pi, math.pi, grid)
    t3_values = np.linspace(-t3_bound, t3_bound, grid)
    t2_grid, t3_grid = np.meshgrid(t2_values, t3_values, indexing='ij')
    half = np.sin(0.5 * t2_grid)
    residuals = np.hypot(-2.0 * half * half * t3_grid, np.sin(t2_grid) * t3_grid - beta)
    k = np.unravel_index(int(np.argmin(residuals)), residuals.shape)
    t2, t3 = float(t2_grid[k]), float(t3_grid[k])
    best = float(residuals[k])
    if abs(beta) <= best:
        t2, t3, best = 0.0, 0.0, abs(beta)

    step = 2.0 * t3_bound / (grid - 1)
    for _ in range(iterations if beta != 0.0 else 0):
        t2_new = _best_t2(t3, beta)
        candidate = _reduced_residual(t2_new, t3, beta)
        if candidate <= best:
            t2, best = t2_new, candidate
        improved = False
        for move in (step, -step):
            t3_new = min(t3_bound, max(-t3_bound, t3 + move))
            t2_new = _best_t2(t3_new, beta)
            candidate = _reduced_residual(t2_new, t3_new, beta)
            if candidate < best:
                t2, t3, best, improved = t2_new, t3_new, candidate, True
                break
        step = step * 2.0 if improved else step / 2.0

    if order == '2121':
        argmin = (-t3, t2, t3, -t2)
        multiindex = (2, 1, 2, 1)
    else:
        argmin = (t2, t3, -t2, -t3)
        multiindex = (1, 2, 1, 2)
    v2 = sys[1]
    target = Se2RPose(0.0, -v2.c * beta, v2.b * beta, 0.0)
    pose_residual = pose_distance(fk(sys, multiindex, argmin), target)
    envelope = (beta * beta / (4.0 * t3_bound), beta * beta / t3_bound)
    logger.info(f"Impossibility scan beta={beta} bound={t3_bound}: residual {best:.3e}")
    return ImpossibilityScan(float(t3_bound), float(beta), best, argmin, order,
                             pose_residual, envelope)


def domain_tightness(family, sys, samples, seed=0, tolerance=DEFAULT_TOLERANCE):
    """Fraction of targets outside the stated domain that the inverse still reaches"""
    family = Family(family)
    outside = recovered = 0
    for j in range(samples):
        target = _wide_target(family, sys, trial_rng(seed, 'tightness', family.value, j))
        if domain(family, sys, target).inside:
            continue
        outside += 1
        try:
            times = ik(family, sys, target, force=True)
            if _residual(family, sys, target, times) < tolerance:
                recovered += 1
        except (PlannerError, ValueError):
            continue
    note = ''
    if outside == 0:
        note = 'No sampled target fell outside the domain'
        if family == Family.SO3 and abs(sys[1].c) < 1e-12:
            note = 'Perpendicular fields: the domain is all of SO(3)'
    fraction = recovered / outside if outside else 0.0
    return TightnessReport(family.value, samples, outside, recovered, fraction, note)


def _random_vector(group, rng, scale=1.0):
    values = [float(x) for x in rng.normal(size=4 if group == SE2R else 3) * scale]
    return {SE2: Se2Vector, SO3: So3Vector, SE2R: Se2RVector}[group](*values)


def exp_oracle_check(group, samples, seed=0):
    """Largest entry-wise gap between closed-form and series exponentials"""
    worst = 0.0
    for j in range(samples):
        rng = trial_rng(seed, 'exp', group, j)
        v = _random_vector(group, rng)
        norm = float(np.linalg.norm(v.coefficients))
        t = float(rng.uniform(-10.0, 10.0)) / norm
        if j % 2 == 1:
            # small-angle branch
            if group == SO3:
                t = float(rng.uniform(-1e-6, 1e-6)) / norm
            else:
                v = type(v)(float(rng.uniform(-1e-6, 1e-6)) / max(abs(t), 1e-12), *v.coefficients[1:])
        closed = to_matrix(exp(v, t))
        oracle = series_exp(generator(v) * t)
        worst = max(worst, float(np.max(np.abs(closed - oracle))))
    return worst


def _pair_band(group, v1, v2):
    if group == SE2:
        return se2_determinant(v1, v2), se2_controllable(v1, v2)
    if group == SO3:
        return so3_determinant(v1, v2), so3_controllable(v1, v2)
    prismatic, planar = se2r_conditions(v1, v2)
    return min(prismatic, planar), se2r_controllable_2(v1, v2)


def _degenerate_pair(group, rng):
    """Structured uncontrollable pair"""
    v1 = _random_vector(group, rng)
    if rng.uniform() < 0.5 or group == SO3:
        return v1, type(v1)(*(float(rng.uniform(0.5, 2.0)) * x for x in v1.coefficients))
    # no rotation in either field
    coefficients = list(v1.coefficients)
    coefficients[0] = 0.0
    other = list(_random_vector(group, rng).coefficients)
    other[0] = 0.0
    return type(v1)(*coefficients), type(v1)(*other)


def controllability_agreement(group, samples, seed=0):
    """Compare each determinant test with the numeric Lie closure rank"""
    full = 4 if group == SE2R else 3
    checked = skipped = 0
    disagreements = []
    for j in range(samples):
        rng = trial_rng(seed, 'agreement', group, j)
        if j % 5 == 4:
            v1, v2 = _degenerate_pair(group, rng)
        else:
            v1, v2 = _random_vector(group, rng), _random_vector(group, rng)
        quantity, determinant = _pair_band(group, v1, v2)
        if EPS_RANK / 10.0 <= quantity <= EPS_RANK * 10.0:
            skipped += 1
            continue
        checked += 1
        numeric = lie_closure_rank((v1, v2), depth=2) == full
        if numeric != determinant:
            disagreements.append({'fields': [v1.coefficients, v2.coefficients],
                                  'determinant': determinant, 'closure': numeric})
    return AgreementReport(group, checked, skipped, disagreements)


def disguise(sys, rng, conjugate=False):
    """Randomly permute and positively rescale a canonical system

    Returns the user fields and, for SO(3) with conjugate set, the rotation
    R0 applied to every field.
    """
    order = list(rng.permutation(len(sys)))
    scales = [float(rng.uniform(0.2, 5.0)) for _ in sys]
    fields = [type(sys[k])(*(s * x for x in sys[k].coefficients)) for k, s in zip(order, scales)]
    r0 = None
    if conjugate and sys[0].group == SO3:
        r0 = haar_rotation(rng)
        fields = [So3Vector(*(float(x) for x in r0.r @ np.array(v.coefficients))) for v in fields]
    return tuple(fields), r0


def classification_recovery(family, samples, seed=0):
    """Fraction of disguised canonical systems classified back to their family"""
    family = Family(family)
    group = FAMILY_GROUPS[family]
    recovered = 0
    for j in range(samples):
        rng = trial_rng(seed, 'recovery', family.value, j)
        fields, _ = disguise(sample_system(family, rng), rng, conjugate=True)
        if classify(fields, group).family == family:
            recovered += 1
    return recovered / samples if samples else 0.0

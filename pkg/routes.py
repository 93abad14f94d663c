"""Command handlers behind the planner's command line.

Each handler takes the parsed arguments and a PlanningService, writes JSON
to stdout, messages to stderr, and returns the process exit code:
0 success, 1 input error, 2 uncontrollable or out of catalog, 3 target
outside the planner's domain, 4 fuzz failures or a degenerate solve.
"""
import csv
import enum
import json
import logging
import math
import os
import sys

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Polygon  # noqa: E402

from services.algebra import SE2, SO3, SE2R  # noqa: E402
from services.errors import SpecError  # noqa: E402

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNCONTROLLABLE = 2
EXIT_OUTSIDE_DOMAIN = 3
EXIT_FAILURES = 4

EXIT_CODES = {
    'Uncontrollable': EXIT_UNCONTROLLABLE,
    'OutOfCatalog': EXIT_UNCONTROLLABLE,
    'OutsideDomain': EXIT_OUTSIDE_DOMAIN,
    'DegenerateL': EXIT_FAILURES,
    'ResidualTooLarge': EXIT_FAILURES,
}

CSV_HEADERS = {
    SE2: ['t', 'theta', 'x', 'y'],
    SO3: ['t'] + [f"r{i}{j}" for i in range(1, 4) for j in range(1, 4)],
    SE2R: ['t', 'theta', 'x', 'y', 'z'],
}

DEMO_SCENARIOS = {
    1: [
        ('planar_s1', {'group': SE2, 'fields': [[1.0, 0.0, 0.5], [0.0, 1.0, 0.0]]},
         {'pose': [math.pi / 6, 1.0, 1.0]}, False),
        # outside the conservative S2 domain, reached anyway
        ('planar_s2_forced', {'group': SE2, 'fields': [[1.0, 0.0, 0.5], [1.0, 1.0, 0.0]]},
         {'pose': [math.pi / 6, 1.0, 1.0]}, True),
    ],
    2: [
        ('rotation_so3', {'group': SO3, 'fields': [[0.0, 0.0, 1.0], [0.0, math.sqrt(0.5), math.sqrt(0.5)]]},
         {'axis_angle': {'axis': [1.0, 1.0, 0.0], 'angle': math.pi * math.sqrt(2.0) / 3.0}}, False),
    ],
    3: [
        ('lifted_t1', {'group': SE2R, 'fields': [[1.0, 1.0, 0.0, 0.5], [0.0, -2.0, 0.0, 1.0]]},
         {'pose': [math.pi / 6, 10.0, 0.0, 1.0]}, False),
    ],
}


def jsonable(value):
    """Plain JSON types; non-finite floats become null"""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dumps(payload):
    # repr floats round-trip exactly
    return json.dumps(jsonable(payload), indent=2, sort_keys=True)


def emit(payload, stream=None):
    print(dumps(payload), file=stream or sys.stdout)


def fail(message):
    print(f"error: {message}", file=sys.stderr)


def exit_code(result):
    if result.get('success'):
        return EXIT_OK
    return EXIT_CODES.get(result.get('error_type'), EXIT_INPUT)


def load_json(source):
    """Parse inline JSON or the JSON file at the given path"""
    try:
        if os.path.exists(source):
            with open(source) as f:
                return json.load(f)
        return json.loads(source)
    except (OSError, json.JSONDecodeError) as e:
        raise SpecError(f"Cannot read JSON from {source!r}: {e}")


def trajectory_rows(trajectory):
    rows = []
    for elapsed, g in trajectory:
        rows.append([elapsed] + [float(x) for x in g.coordinates])
    return rows


def write_trajectory_csv(path, group, trajectory):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADERS[group])
        for row in trajectory_rows(trajectory):
            writer.writerow([repr(x) for x in row])


def _pose_triangle(theta, x, y, size):
    heading = np.array([math.cos(theta), math.sin(theta)])
    normal = np.array([-heading[1], heading[0]])
    center = np.array([x, y])
    return np.array([
        center + size * heading,
        center - 0.5 * size * heading + 0.4 * size * normal,
        center - 0.5 * size * heading - 0.4 * size * normal,
    ])


def _switch_indices(trajectory, motion_plan):
    """Sample indices at which each leg ends"""
    ends, elapsed = [0], 0.0
    for step in motion_plan.steps:
        elapsed += abs(step.time)
        ends.append(min(range(len(trajectory)), key=lambda k: abs(trajectory[k][0] - elapsed)))
    return ends


def _draw_planar(ax, trajectory, motion_plan):
    xs = [g.x for _, g in trajectory]
    ys = [g.y for _, g in trajectory]
    ax.plot(xs, ys, color='tab:blue', linewidth=1.2)
    span = max(max(xs) - min(xs), max(ys) - min(ys), 1.0)
    ends = _switch_indices(trajectory, motion_plan)
    for n, k in enumerate(ends):
        g = trajectory[k][1]
        color = 'tab:green' if n == 0 else 'tab:red' if n == len(ends) - 1 else 'tab:gray'
        ax.add_patch(Polygon(_pose_triangle(g.theta, g.x, g.y, 0.04 * span), closed=True,
                             facecolor=color, edgecolor='black', linewidth=0.5))
    ax.set_xlabel('x')
    ax.set_ylabel('y')
    ax.set_aspect('equal', adjustable='datalim')


def _draw_rotations(ax, trajectory, frames=12):
    # oblique projection of the body axes, each frame shifted along x
    projection = np.array([[1.0, 0.0, -0.35], [0.0, 1.0, -0.35]])
    picks = np.unique(np.linspace(0, len(trajectory) - 1, frames).round().astype(int))
    for n, k in enumerate(picks):
        r = trajectory[k][1].r
        origin = np.array([2.5 * n, 0.0])
        for axis, color in zip(range(3), ('tab:red', 'tab:green', 'tab:blue')):
            tip = origin + projection @ r[:, axis]
            ax.plot([origin[0], tip[0]], [origin[1], tip[1]], color=color, linewidth=1.2)
    ax.set_aspect('equal', adjustable='datalim')
    ax.set_yticks([])
    ax.set_xlabel('time (frames along x)')


def render_svg(path, group, trajectory, motion_plan, title=''):
    if group == SE2R:
        fig, (ax, ax_z) = plt.subplots(1, 2, figsize=(10, 4.5))
    else:
        fig, ax = plt.subplots(figsize=(6 if group == SE2 else 10, 4.5))
    try:
        if group == SO3:
            _draw_rotations(ax, trajectory)
        else:
            _draw_planar(ax, trajectory, motion_plan)
        if group == SE2R:
            ax_z.plot([t for t, _ in trajectory], [g.z for _, g in trajectory], color='tab:purple')
            ax_z.set_xlabel('t')
            ax_z.set_ylabel('z')
        if title:
            fig.suptitle(title)
        fig.savefig(path, format='svg')
    finally:
        plt.close(fig)


def _plan_payload(result):
    return {
        'family': result['family'],
        'group': result['group'],
        'steps': result['steps'],
        'residual': result['residual'],
        'note': result['note'],
    }


def _report_failure(result):
    fail(f"{result.get('error_type', 'Error')}: {result.get('error')}")
    code = exit_code(result)
    if code != EXIT_INPUT:
        emit({k: v for k, v in result.items() if k != 'success'})
    return code


def cmd_classify(args, service):
    """Classify a system spec into its canonical family"""
    try:
        spec = load_json(args.system)
    except SpecError as e:
        fail(str(e))
        return EXIT_INPUT
    result = service.classify(spec)
    if 'classification' not in result:
        return _report_failure(result)
    classification = result['classification']
    payload = {
        'family': classification['family'],
        'canonical_fields': classification['canonical_fields'],
        'note': classification['note'],
    }
    if classification['record'] is not None:
        payload.update(classification['record'])
    emit(payload)
    return exit_code(result)


def cmd_plan(args, service):
    """Plan a motion and optionally write the trajectory"""
    try:
        system_spec = load_json(args.system)
        target_spec = load_json(args.target)
    except SpecError as e:
        fail(str(e))
        return EXIT_INPUT
    wants_trajectory = bool(args.traj or args.svg)
    result = service.plan(system_spec, target_spec, force=args.force, paper_literal=args.paper_literal,
                          dt=args.dt if wants_trajectory else None)
    if not result['success']:
        return _report_failure(result)
    if args.traj:
        write_trajectory_csv(args.traj, result['group'], result['trajectory'])
    if args.svg:
        render_svg(args.svg, result['group'], result['trajectory'], result['plan'],
                   title=f"{result['family']} plan")
    emit(_plan_payload(result))
    return EXIT_OK


def cmd_fuzz(args, service):
    """Round-trip fuzz of one canonical family"""
    result = service.fuzz(args.family, args.systems, args.targets, seed=args.seed,
                          paper_literal=args.paper_literal)
    if 'report' not in result:
        fail(result['error'])
        return EXIT_INPUT
    emit(result['report'])
    return EXIT_OK if result['success'] else EXIT_FAILURES


def cmd_demo(args, service):
    """Write spec, plan, trajectory and figure for one of the demo scenarios"""
    scenarios = DEMO_SCENARIOS.get(args.figure)
    if scenarios is None:
        fail(f"Unknown figure {args.figure}; expected one of {sorted(DEMO_SCENARIOS)}")
        return EXIT_INPUT
    os.makedirs(args.out, exist_ok=True)
    summary = []
    for name, system_spec, target_spec, force in scenarios:
        result = service.plan(system_spec, target_spec, force=force, dt=args.dt)
        if not result['success']:
            return _report_failure(result)
        paths = {kind: os.path.join(args.out, f"{name}{suffix}") for kind, suffix in (
            ('spec', '_spec.json'), ('plan', '_plan.json'), ('trajectory', '_trajectory.csv'), ('svg', '.svg'),
        )}
        with open(paths['spec'], 'w') as f:
            f.write(dumps({'system': system_spec, 'target': target_spec, 'force': force}))
        with open(paths['plan'], 'w') as f:
            f.write(dumps(_plan_payload(result)))
        write_trajectory_csv(paths['trajectory'], result['group'], result['trajectory'])
        render_svg(paths['svg'], result['group'], result['trajectory'], result['plan'],
                   title=f"{result['family']}: {len(result['steps'])} motion primitives")
        summary.append({'scenario': name, 'family': result['family'], 'steps': len(result['steps']),
                        'residual': result['residual'], 'files': paths})
    emit({'figure': args.figure, 'scenarios': summary})
    return EXIT_OK


def cmd_impossibility(args, service):
    """Best residual of the four-switch sequences for a pure translation"""
    result = service.impossibility(args.beta, args.t3_bound, grid=args.grid, order=args.order)
    if not result['success']:
        return _report_failure(result)
    emit(result['report'])
    return EXIT_OK


def cmd_tightness(args, service):
    """Fraction of targets outside the stated domain that are still reached"""
    system_spec = None
    if args.system:
        try:
            system_spec = load_json(args.system)
        except SpecError as e:
            fail(str(e))
            return EXIT_INPUT
    result = service.tightness(args.family, system_spec, samples=args.samples, seed=args.seed)
    if not result['success']:
        return _report_failure(result)
    emit({**result['report'], 'system': result['system']})
    return EXIT_OK


def cmd_exp_check(args, service):
    """Closed-form exponentials against the series oracle"""
    result = service.exp_check(args.group, args.samples, seed=args.seed)
    if 'report' not in result:
        fail(result['error'])
        return EXIT_INPUT
    emit(result['report'])
    return EXIT_OK if result['success'] else EXIT_FAILURES


def cmd_runs(args, service):
    """Recent ledger runs"""
    result = service.recent_runs(hours=args.hours)
    if not result['success']:
        fail(result['error'])
        return EXIT_INPUT
    emit(result['runs'])
    return EXIT_OK

import logging
import math
import time
from datetime import datetime, timedelta

import numpy as np

from app import db
from models import ErrorLog, PlanRun
from services import verify
from services.algebra import (
    GROUPS, SE2, SO3, SE2R, Rotation, Se2Pose, Se2RPose, So3Vector, exp_so3, pose_distance, vector,
)
from services.controllability import Family, classify
from services.errors import DegenerateL, PlannerError, ResidualTooLarge, SpecError
from services.planners import fk, plan, sample_trajectory

logger = logging.getLogger(__name__)

POSE_LENGTHS = {SE2: 3, SE2R: 4}


def parse_system(spec):
    """(group, fields) from a SystemSpec mapping"""
    if not isinstance(spec, dict):
        raise SpecError('System spec must be a JSON object')
    group = spec.get('group')
    if group not in GROUPS:
        raise SpecError(f"Unknown group {group!r}; expected one of {', '.join(GROUPS)}")
    raw_fields = spec.get('fields')
    if not isinstance(raw_fields, list) or len(raw_fields) not in (2, 3):
        raise SpecError('System spec needs a list of 2 or 3 fields')
    size = 4 if group == SE2R else 3
    fields = []
    for k, coefficients in enumerate(raw_fields, start=1):
        if not isinstance(coefficients, list) or len(coefficients) != size:
            raise SpecError(f"Field {k} must have {size} coefficients for {group}")
        try:
            values = [float(value) for value in coefficients]
        except (TypeError, ValueError):
            raise SpecError(f"Field {k} has non-numeric coefficients")
        if not all(math.isfinite(value) for value in values):
            raise SpecError(f"Field {k} has non-finite coefficients")
        fields.append(vector(group, values))
    return group, tuple(fields)


def parse_target(spec, group):
    """Group element from a TargetSpec mapping with exactly one representation"""
    if not isinstance(spec, dict):
        raise SpecError('Target spec must be a JSON object')
    present = [key for key in ('pose', 'rotation', 'axis_angle') if key in spec]
    if len(present) != 1:
        raise SpecError(f"Target spec needs exactly one of pose, rotation, axis_angle; got {present}")
    key = present[0]
    try:
        if key == 'pose':
            if group not in POSE_LENGTHS or len(spec['pose']) != POSE_LENGTHS[group]:
                raise SpecError(f"A {group} target cannot be given as a pose of that length")
            values = [float(value) for value in spec['pose']]
            if not all(math.isfinite(value) for value in values):
                raise SpecError('Target pose has non-finite coordinates')
            return Se2Pose(*values) if group == SE2 else Se2RPose(*values)
        if group != SO3:
            raise SpecError(f"A {group} target must be given as a pose")
        if key == 'rotation':
            entries = [float(value) for value in spec['rotation']]
            if len(entries) != 9:
                raise SpecError('Rotation target needs 9 row-major entries')
            return Rotation(np.array(entries).reshape(3, 3))
        axis = np.array([float(value) for value in spec['axis_angle']['axis']])
        angle = float(spec['axis_angle']['angle'])
        norm = float(np.linalg.norm(axis))
        if axis.shape != (3,) or not math.isfinite(norm) or norm == 0.0 or not math.isfinite(angle):
            raise SpecError('Axis-angle target needs a nonzero finite 3-vector axis and a finite angle')
        return exp_so3(So3Vector(*(axis / norm)), angle)
    except (TypeError, ValueError, KeyError) as e:
        raise SpecError(f"Malformed {key} target: {e}")


def _coordinates(g):
    return None if g is None else list(g.coordinates)


class PlanningService:
    """Runs planner commands and records them in the run ledger"""

    def __init__(self, settings):
        self.settings = settings

    def _log_run(self, command, group=None, family=None, fields=None, target=None, steps=None,
                 residual=None, success=False, duration_ms=0):
        """Log a planner run to the database"""
        if not db.enabled:
            return None
        try:
            run = PlanRun(
                command=command,
                group=group,
                family=family,
                fields=fields,
                target=target,
                steps=steps,
                residual=residual if residual is None or math.isfinite(residual) else None,
                success=success,
                duration_ms=duration_ms,
                created_at=datetime.now()
            )
            db.session.add(run)
            db.session.commit()
            return run.id
        except Exception as e:
            logger.error(f"Error logging run: {str(e)}", exc_info=True)
            db.session.rollback()
            return None

    def _log_error(self, run_id, error_type, error_message, error_details=None):
        """Log error to the database"""
        if not db.enabled:
            return
        try:
            error_log = ErrorLog(
                run_id=run_id,
                error_type=error_type,
                error_message=error_message,
                error_details=error_details,
                created_at=datetime.now()
            )
            db.session.add(error_log)
            db.session.commit()
        except Exception as e:
            logger.error(f"Error logging error: {str(e)}", exc_info=True)
            db.session.rollback()

    def _failure(self, run_id, e, details=None):
        details = dict(details or {})
        verdict = getattr(e, 'verdict', None)
        system_class = getattr(e, 'system_class', None)
        if verdict is not None:
            details['verdict'] = verdict.to_dict()
        if system_class is not None:
            details['classification'] = system_class.to_dict()
        if getattr(e, 'discriminant', None) is not None:
            details['discriminant'] = e.discriminant
        if getattr(e, 'residual', None) is not None:
            details['residual'] = e.residual
        self._log_error(run_id, e.error_type, str(e), details or None)
        result = {'success': False, 'error': str(e), 'error_type': e.error_type, 'run_id': run_id}
        result.update(details)
        return result

    def classify(self, system_spec):
        """Classify a system spec into its canonical family"""
        try:
            group, fields = parse_system(system_spec)
            system_class = classify(fields, group)
        except PlannerError as e:
            return self._failure(None, e)
        result = {'success': True, 'group': group, 'classification': system_class.to_dict()}
        if system_class.family in (Family.UNCONTROLLABLE, Family.OUT_OF_CATALOG):
            result.update(success=False, error_type=system_class.family.value,
                          error=system_class.note or system_class.family.value)
        return result

    def plan(self, system_spec, target_spec, force=False, paper_literal=False, dt=None):
        """Plan a motion to the target and log the attempt"""
        start_time = time.time()
        group = fields = target = None
        try:
            group, fields = parse_system(system_spec)
            target = parse_target(target_spec, group)
            motion_plan = plan(fields, group, target, force=force, paper_literal=paper_literal)
            reached = fk(fields, motion_plan.multiindex, motion_plan.times)
            residual = pose_distance(reached, target)
            trajectory = sample_trajectory(fields, motion_plan, dt) if dt else None
        except PlannerError as e:
            if isinstance(e, DegenerateL):
                logger.warning(f"Plan failed: {e}")
            else:
                logger.info(f"Plan refused: {e.error_type}: {e}")
            duration_ms = int((time.time() - start_time) * 1000)
            run_id = self._log_run(
                'plan', group=group,
                fields=None if fields is None else [list(v.coefficients) for v in fields],
                target=_coordinates(target), success=False, duration_ms=duration_ms,
            )
            return self._failure(run_id, e)

        duration_ms = int((time.time() - start_time) * 1000)
        steps = motion_plan.to_dict()['steps']
        success = residual < self.settings.tolerance or force
        run_id = self._log_run(
            'plan', group=group, family=motion_plan.family.value,
            fields=[list(v.coefficients) for v in fields], target=_coordinates(target),
            steps=steps, residual=residual, success=success, duration_ms=duration_ms,
        )
        if residual >= self.settings.tolerance:
            logger.warning(f"Plan residual {residual:.3e} above tolerance {self.settings.tolerance:.1e}")
            if not force:
                return self._failure(run_id, ResidualTooLarge(
                    f"Plan misses the target by {residual:.3e}", residual), {'steps': steps})
        return {
            'success': True,
            'group': group,
            'family': motion_plan.family.value,
            'steps': steps,
            'residual': residual,
            'note': motion_plan.note,
            'fields': fields,
            'target': target,
            'plan': motion_plan,
            'trajectory': trajectory,
            'run_id': run_id,
        }

    def fuzz(self, family, systems, targets, seed=None, paper_literal=False):
        """Round-trip fuzz of one canonical family"""
        seed = self.settings.seed if seed is None else seed
        start_time = time.time()
        try:
            report = verify.fuzz_family(family, systems, targets, seed, paper_literal=paper_literal,
                                        tolerance=self.settings.tolerance)
        except ValueError as e:
            return {'success': False, 'error': str(e), 'error_type': 'Specification Error'}
        duration_ms = int((time.time() - start_time) * 1000)
        success = not report.failures
        run_id = self._log_run('fuzz', family=report.family, residual=report.max_residual,
                               success=success, duration_ms=duration_ms)
        if not success:
            self._log_error(run_id, 'Fuzz Failure',
                            f"{len(report.failures)} of {report.trials} trials above tolerance",
                            {'seed': seed, 'paper_literal': paper_literal})
        return {'success': success, 'report': report.to_dict(), 'run_id': run_id}

    def impossibility(self, beta, t3_bound, grid=401, order='2121'):
        """Scan the four-switch sequences for the pure-translation target"""
        if not t3_bound > 0 or grid < 3 or not math.isfinite(beta):
            return {'success': False, 'error': 'Need t3 bound > 0, grid >= 3 and a finite beta',
                    'error_type': 'Specification Error'}
        canonical = (vector(SE2R, (1.0, 0.0, 0.0, 0.0)), vector(SE2R, (0.0, 1.0, 0.0, 1.0)))
        try:
            scan = verify.impossibility_scan(canonical, beta, t3_bound, grid=grid, order=order)
        except ValueError as e:
            return {'success': False, 'error': str(e), 'error_type': 'Specification Error'}
        run_id = self._log_run('impossibility', group=SE2R, residual=scan.best_residual, success=True)
        return {'success': True, 'report': scan.to_dict(), 'run_id': run_id}

    def tightness(self, family, system_spec=None, samples=1000, seed=None):
        """Share of out-of-domain targets the local inverse still reaches"""
        seed = self.settings.seed if seed is None else seed
        try:
            family = Family(family)
            if system_spec is None:
                sys = verify.sample_system(family, verify.trial_rng(seed, 'tightness-system', family.value))
            else:
                _, sys = parse_system(system_spec)
            report = verify.domain_tightness(family, sys, samples, seed=seed,
                                             tolerance=self.settings.tolerance)
        except PlannerError as e:
            return self._failure(None, e)
        except (ValueError, IndexError, AttributeError) as e:
            return {'success': False, 'error': f"Cannot run tightness for {family}: {e}",
                    'error_type': 'Specification Error'}
        run_id = self._log_run('tightness', family=report.family, success=True)
        return {'success': True, 'report': report.to_dict(),
                'system': [list(v.coefficients) for v in sys], 'run_id': run_id}

    def exp_check(self, group, samples, seed=None):
        """Closed-form exponentials against the series oracle"""
        seed = self.settings.seed if seed is None else seed
        if group not in GROUPS:
            return {'success': False, 'error': f"Unknown group {group!r}",
                    'error_type': 'Specification Error'}
        worst = verify.exp_oracle_check(group, samples, seed=seed)
        success = worst < 1e-12
        run_id = self._log_run('exp-check', group=group, residual=worst, success=success)
        return {'success': success, 'report': {'group': group, 'samples': samples, 'seed': seed,
                                               'max_error': worst}, 'run_id': run_id}

    def recent_runs(self, hours=24):
        """Ledger rows of the last hours, newest first"""
        if not db.enabled:
            return {'success': False, 'error': 'Run ledger disabled; set LIE_PLANNER_DATABASE_URL',
                    'error_type': 'Specification Error'}
        since = datetime.now() - timedelta(hours=hours)
        runs = (db.session.query(PlanRun).filter(PlanRun.created_at >= since)
                .order_by(PlanRun.created_at.desc()).all())
        return {
            'success': True,
            'runs': [{
                'id': run.id,
                'command': run.command,
                'group': run.group,
                'family': run.family,
                'residual': run.residual,
                'success': run.success,
                'duration_ms': run.duration_ms,
                'created_at': run.created_at.isoformat(),
                'errors': [{'type': e.error_type, 'message': e.error_message} for e in run.error_logs],
            } for run in runs],
        }

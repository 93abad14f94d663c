import json
import math

import pytest

from app import Settings, db, load_settings
from check_logs import show_recent_runs
from cli import main
from models import ErrorLog, PlanRun

PLANAR_PAIR = {'group': 'SE2', 'fields': [[1.0, 0.0, 0.5], [0.0, 1.0, 0.0]]}
PLANAR_TARGET = {'pose': [math.pi / 6, 1.0, 1.0]}


def test_load_settings_defaults():
    settings = load_settings({})
    assert settings == Settings()
    assert not settings.ledger_enabled


def test_load_settings_from_environment():
    settings = load_settings({
        'LIE_PLANNER_SEED': '9',
        'DATABASE_URL': 'sqlite://',
        'LIE_PLANNER_LOG_LEVEL': 'info',
        'LIE_PLANNER_TOLERANCE': '1e-6',
    })
    assert settings.seed == 9
    assert settings.database_url == 'sqlite://'
    assert settings.log_level == 'INFO'
    assert settings.tolerance == 1e-6


def test_load_settings_rejects_bad_seed():
    with pytest.raises(ValueError):
        load_settings({'LIE_PLANNER_SEED': 'seven'})


def test_successful_plan_is_logged(ledger, service):
    result = service.plan(PLANAR_PAIR, PLANAR_TARGET)
    assert result['success']
    run = ledger.session.get(PlanRun, result['run_id'])
    assert run.command == 'plan'
    assert run.family == 'S1'
    assert run.success
    assert len(run.steps) == 3
    assert run.residual < 1e-9
    assert run.error_logs == []


def test_refused_plan_logs_error(ledger, service):
    system = {'group': 'SE2', 'fields': [[1.0, 0.0, 0.5], [1.0, 1.0, 0.0]]}
    result = service.plan(system, PLANAR_TARGET)
    assert not result['success']
    run = ledger.session.get(PlanRun, result['run_id'])
    assert not run.success
    assert [e.error_type for e in run.error_logs] == ['OutsideDomain']
    assert run.error_logs[0].error_details['verdict']['violated'] == 'translation bound'


def test_fuzz_failures_are_logged(ledger, service):
    result = service.fuzz('T2', 10, 10, seed=0, paper_literal=True)
    assert not result['success']
    errors = ledger.session.query(ErrorLog).filter_by(run_id=result['run_id']).all()
    assert [e.error_type for e in errors] == ['Fuzz Failure']


def test_recent_runs(ledger, service):
    service.plan(PLANAR_PAIR, PLANAR_TARGET)
    service.impossibility(1.0, 100.0)
    result = service.recent_runs(hours=1)
    assert [run['command'] for run in result['runs']] == ['impossibility', 'plan']


def test_show_recent_runs(ledger, service, capsys):
    service.plan(PLANAR_PAIR, PLANAR_TARGET)
    show_recent_runs(hours=1, session=ledger.session)
    out = capsys.readouterr().out
    assert 'Found 1 runs in the last 1 hours' in out
    assert 'Errors in the last 1 hours: 0' in out


def test_ledger_failure_does_not_break_planning(ledger, service, monkeypatch):
    def broken_run(**kwargs):
        raise RuntimeError('disk full')

    monkeypatch.setattr('services.planning_service.PlanRun', broken_run)
    result = service.plan(PLANAR_PAIR, PLANAR_TARGET)
    assert result['success']
    assert result['run_id'] is None


def test_cli_records_runs(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv('LIE_PLANNER_DATABASE_URL', f"sqlite:///{tmp_path / 'cli.db'}")
    try:
        assert main(['plan', json.dumps(PLANAR_PAIR), '--target', json.dumps(PLANAR_TARGET)]) == 0
        capsys.readouterr()
        assert main(['runs', '--hours', '1']) == 0
        runs = json.loads(capsys.readouterr().out)
        assert len(runs) == 1
        assert runs[0]['family'] == 'S1'
    finally:
        db.close()


def test_plan_above_tolerance_is_a_failure(ledger, service, monkeypatch):
    monkeypatch.setattr('services.planning_service.pose_distance', lambda g1, g2: 1e-3)
    result = service.plan(PLANAR_PAIR, PLANAR_TARGET)
    assert not result['success']
    assert result['error_type'] == 'ResidualTooLarge'
    assert result['residual'] == 1e-3
    run = ledger.session.get(PlanRun, result['run_id'])
    assert not run.success
    assert [e.error_type for e in run.error_logs] == ['ResidualTooLarge']

    forced = service.plan(PLANAR_PAIR, PLANAR_TARGET, force=True)
    assert forced['success']

import csv
import json
import math

import numpy as np
import pytest

from cli import main
from services.algebra import So3Vector, exp_so3

PLANAR_PAIR = json.dumps({'group': 'SE2', 'fields': [[1.0, 0.0, 0.5], [0.0, 1.0, 0.0]]})
PLANAR_TARGET = json.dumps({'pose': [math.pi / 6, 1.0, 1.0]})
S2_SYSTEM = json.dumps({'group': 'SE2', 'fields': [[1.0, 0.0, 0.5], [1.0, 1.0, 0.0]]})


@pytest.fixture(autouse=True)
def no_ledger(monkeypatch):
    for name in ('LIE_PLANNER_DATABASE_URL', 'DATABASE_URL', 'LIE_PLANNER_SEED'):
        monkeypatch.delenv(name, raising=False)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def read_csv(path):
    with open(path, newline='') as f:
        rows = list(csv.reader(f))
    return rows[0], [[float(x) for x in row] for row in rows[1:]]


def test_classify_planar_pair(capsys):
    code, payload = run(capsys, 'classify', PLANAR_PAIR)
    assert code == 0
    assert payload['family'] == 'S1'
    assert payload['permutation'] == [1, 2]
    assert payload['scales'] == [1.0, 1.0]


def test_classify_parallel_fields(capsys):
    code, payload = run(capsys, 'classify', json.dumps({'group': 'SE2', 'fields': [[1, 0, 0], [2, 0, 0]]}))
    assert code == 2
    assert payload['family'] == 'Uncontrollable'


def test_classify_t4_pattern(capsys):
    spec = {'group': 'SE2xR', 'fields': [[0, 0, 0, 2], [2, 0.6, 0.8, 1], [0, 1.5, -1, 0]]}
    code, payload = run(capsys, 'classify', json.dumps(spec))
    assert code == 0
    assert payload['family'] == 'T4'
    assert payload['scales'] == pytest.approx([0.5, 1.0, 0.5])


def test_classify_rejects_bad_input(capsys):
    assert main(['classify', '{not json']) == 1
    assert main(['classify', json.dumps({'group': 'SE3', 'fields': []})]) == 1
    assert main(['classify', json.dumps({'group': 'SE2', 'fields': [[1, 0], [0, 1]]})]) == 1
    assert 'error' in capsys.readouterr().err


def test_plan_planar_pair_with_outputs(capsys, tmp_path):
    traj, svg = tmp_path / 'fig1.csv', tmp_path / 'fig1.svg'
    code, payload = run(capsys, 'plan', PLANAR_PAIR, '--target', PLANAR_TARGET,
                        '--traj', str(traj), '--svg', str(svg))
    assert code == 0
    assert len(payload['steps']) == 3
    assert payload['residual'] < 1e-9
    header, rows = read_csv(traj)
    assert header == ['t', 'theta', 'x', 'y']
    assert rows[-1][1:] == pytest.approx([math.pi / 6, 1.0, 1.0], abs=1e-9)
    assert svg.read_text().lstrip().startswith('<?xml')


def test_plan_reads_spec_files(capsys, tmp_path):
    system, target = tmp_path / 'system.json', tmp_path / 'target.json'
    system.write_text(PLANAR_PAIR)
    target.write_text(PLANAR_TARGET)
    code, payload = run(capsys, 'plan', str(system), '--target', str(target))
    assert code == 0
    assert payload['family'] == 'S1'


def test_plan_outside_domain(capsys):
    code, payload = run(capsys, 'plan', S2_SYSTEM, '--target', PLANAR_TARGET)
    assert code == 3
    assert payload['error_type'] == 'OutsideDomain'
    assert payload['verdict']['violated'] == 'translation bound'
    assert payload['verdict']['inside'] is False


def test_plan_forced(capsys):
    code, payload = run(capsys, 'plan', S2_SYSTEM, '--target', PLANAR_TARGET, '--force')
    assert code == 0
    assert payload['residual'] < 1e-9


def test_plan_missing_target_exits_with_failure(capsys, monkeypatch):
    monkeypatch.setattr('services.planning_service.pose_distance', lambda g1, g2: 1e-3)
    code, payload = run(capsys, 'plan', PLANAR_PAIR, '--target', PLANAR_TARGET)
    assert code == 4
    assert payload['error_type'] == 'ResidualTooLarge'
    assert len(payload['steps']) == 3


def test_plan_uncontrollable(capsys):
    system = json.dumps({'group': 'SE2', 'fields': [[1, 0, 0], [2, 0, 0]]})
    code, payload = run(capsys, 'plan', system, '--target', PLANAR_TARGET)
    assert code == 2
    assert payload['error_type'] == 'Uncontrollable'


def test_plan_rejects_ambiguous_target(capsys):
    target = json.dumps({'pose': [0, 0, 0], 'rotation': [1, 0, 0, 0, 1, 0, 0, 0, 1]})
    assert main(['plan', PLANAR_PAIR, '--target', target]) == 1


def test_fuzz_passes_and_repeats(capsys):
    first = main(['fuzz', '--family', 'S1', '--systems', '5', '--targets', '5', '--seed', '3'])
    first_out = capsys.readouterr().out
    second = main(['fuzz', '--family', 'S1', '--systems', '5', '--targets', '5', '--seed', '3'])
    assert first == second == 0
    assert capsys.readouterr().out == first_out
    assert json.loads(first_out)['failures'] == []


def test_fuzz_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv('LIE_PLANNER_SEED', '42')
    code, payload = run(capsys, 'fuzz', '--family', 'T3', '--systems', '2', '--targets', '2')
    assert code == 0
    assert payload['seed'] == 42


def test_fuzz_literal_t2_fails(capsys):
    code, payload = run(capsys, 'fuzz', '--family', 'T2', '--systems', '20', '--targets', '20',
                        '--paper-literal')
    assert code == 4
    assert payload['paper_literal'] is True
    assert len(payload['failures']) > 0


def test_demo_planar_pair(capsys, tmp_path):
    code, payload = run(capsys, 'demo', '1', '--out', str(tmp_path))
    assert code == 0
    s1 = payload['scenarios'][0]
    assert s1['steps'] == 3
    _, rows = read_csv(s1['files']['trajectory'])
    assert rows[-1][1:] == pytest.approx([math.pi / 6, 1.0, 1.0], abs=1e-9)
    for scenario in payload['scenarios']:
        assert scenario['residual'] < 1e-9
        for path in scenario['files'].values():
            assert (tmp_path / path.split('/')[-1]).exists()


def test_demo_rotation_pair(capsys, tmp_path):
    code, payload = run(capsys, 'demo', '2', '--out', str(tmp_path))
    assert code == 0
    scenario = payload['scenarios'][0]
    assert scenario['steps'] == 3
    header, rows = read_csv(scenario['files']['trajectory'])
    assert header[1:] == ['r11', 'r12', 'r13', 'r21', 'r22', 'r23', 'r31', 'r32', 'r33']
    expected = exp_so3(So3Vector(math.pi / 3, math.pi / 3, 0.0), 1.0).r
    assert np.allclose(np.array(rows[-1][1:]).reshape(3, 3), expected, atol=1e-9)


def test_demo_lifted_pair(capsys, tmp_path):
    code, payload = run(capsys, 'demo', '3', '--out', str(tmp_path))
    assert code == 0
    scenario = payload['scenarios'][0]
    assert scenario['steps'] == 5
    header, rows = read_csv(scenario['files']['trajectory'])
    assert header == ['t', 'theta', 'x', 'y', 'z']
    assert rows[-1][1:] == pytest.approx([math.pi / 6, 10.0, 0.0, 1.0], abs=1e-9)


def test_demo_unknown_figure(tmp_path):
    assert main(['demo', '4', '--out', str(tmp_path)]) == 1


def test_impossibility(capsys):
    code, payload = run(capsys, 'impossibility', '--beta', '1', '--t3-bound', '100')
    assert code == 0
    assert payload['best_residual'] == pytest.approx(0.005, rel=0.01)

    code, payload = run(capsys, 'impossibility', '--beta', '0')
    assert payload['best_residual'] == 0.0


def test_tightness(capsys):
    code, payload = run(capsys, 'tightness', '--family', 'S2', '--samples', '200')
    assert code == 0
    assert 'excess_fraction' in payload


def test_exp_check(capsys):
    code, payload = run(capsys, 'exp-check', '--group', 'SE2', '--samples', '200')
    assert code == 0
    assert payload['max_error'] < 1e-12


def test_runs_needs_ledger(capsys):
    assert main(['runs']) == 1

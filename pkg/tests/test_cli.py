import json
import shutil
import subprocess

import pytest

from qdet.cli import main


@pytest.fixture
def run(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv('QDET_HOME', str(tmp_path / 'store'))

    def go(*argv):
        code = main(list(argv))
        out, err = capsys.readouterr()
        return code, out, err
    return go


def test_gen_build_analyze(run):
    assert run('gen', 'scalar-product', '--n', '8', '-o', 'sp.fc')[0] == 0
    assert run('build', 'sp.fc', '--param', 'n=8', '-o', 'sp.qd')[0] == 0
    assert run('analyze', 'sp.qd') == (0, 'D=4 P=8\n', '')


def test_formula(run):
    assert run('formula', 'grid-jacobi-width', '--kj', '256')[:2] == (0, '1313\n')
    assert run('formula', 'scalar', '--n', '4')[:2] == (0, 'D=3 P=4\n')
    assert run('formula', 'grid-jacobi-height', '--kj', '16')[0] == 1


def test_compare_without_shared_keys(run):
    run('gen', 'matmul', '--n', '2', '--k', '2', '--m', '2', '-o', 'a.qd')
    run('gen', 'matmul', '--n', '3', '--k', '3', '--m', '3', '-o', 'b.qd')
    code, out, err = run('compare', 'a.qd', 'b.qd')
    assert code == 2 and 'not possible' in err and out == ''


def test_compare_report(run):
    for n in (2, 4):
        run('gen', 'matmul', '--n', str(n), '--k', str(n), '--m', str(n), '-o', f'f{n}.qd')
        run('gen', 'matmul', '--n', str(n), '--k', str(n), '--m', str(n),
            '--doubling', 'off', '-o', f's{n}.qd')
    code, out, _ = run('compare', 'f2.qd,f4.qd', 's2.qd,s4.qd', '--doubling', 'off')
    assert code == 0
    assert out.splitlines()[1] == 'dP=0 (equal)'
    assert out.startswith('dD=-') and '(less)' in out
    code, out, _ = run('compare', 'f2.qd', 's2.qd', '--metric', 'width', '--doubling', 'off')
    assert out == 'dP=0 (equal)\n'


def test_build_flag_checks(run):
    run('gen', 'gauss-seidel', '--n', '2', '--L', '1', '-o', 'gs.fc')
    assert run('build', 'gs.fc', '--param', 'n=2')[0] == 1
    assert run('build', 'gs.fc', '--param', 'n=2', '--param', 'm=3', '--iterations', '1')[0] == 1
    assert run('build', 'gs.fc', '--param', 'n=2', '--iterations', '1', '-o', 'gs.qd')[0] == 0
    run('gen', 'scalar-product', '-o', 'sp.fc')
    assert run('build', 'sp.fc', '--param', 'n=2', '--iterations', '3')[0] == 1


def test_eval_chart_and_determinant(run):
    run('gen', 'gauss-jordan', '--n', '2', '-o', 'gj.fc')
    run('build', 'gj.fc', '--param', 'n=2', '-o', 'gj.qd')
    inputs = ['--input', 'A(1,1)=0,A(1,2)=1,A(1,3)=5', '--input', 'A(2,1)=1,A(2,2)=0,A(2,3)=7']
    want = 'X(1) = 7\nX(2) = 5\n'
    assert run('eval', 'gj.fc', '--param', 'n=2', *inputs)[:2] == (0, want)
    assert run('eval', 'gj.qd', *inputs)[:2] == (0, want)
    assert run('eval', 'gj.qd', '--mode', 'effective', *inputs)[:2] == (0, want)
    singular = ['--input', 'A(1,1)=1,A(1,2)=2,A(1,3)=5,A(2,1)=2,A(2,2)=4,A(2,3)=7']
    assert run('eval', 'gj.qd', *singular)[1] == 'X(1) = undetermined\nX(2) = undetermined\n'


def test_json_envelope_echoes_flags(run):
    run('gen', 'matmul', '--n', '2', '--k', '2', '--m', '2', '-o', 'a.qd')
    code, out, _ = run('analyze', 'a.qd', '--json', '--sharing', 'tree', '--doubling', 'off',
                       '--chain-count', 'floor', '--param', 'x=1', '--iterations', '0',
                       '--input', 'b=2', '--store', 'st')
    doc = json.loads(out)
    assert code == 0 and doc['ok'] and doc['command'] == 'analyze'
    flags = doc['flags']
    assert flags['sharing'] == 'tree' and flags['doubling'] is False
    assert flags['chain_count'] == 'floor' and flags['param'] == {'x': 1}
    assert flags['iterations'] == 0 and flags['input'] == [{'b': 2.0}]
    assert flags['store'] == 'st' and flags['json'] is True
    assert doc['result']['D'] == 2 and doc['result']['sharing'] == 'tree'


def test_json_error_envelope(run):
    code, out, err = run('analyze', 'missing.qd', '--json')
    assert code == 3 and err
    assert json.loads(out)['ok'] is False


def test_usage_errors(run):
    assert run('bogus')[0] == 1
    assert run('analyze')[0] == 1
    assert run('analyze', 'x', '--doubling', 'maybe')[0] == 1
    assert run('eval', 'x', '--input', 'a')[0] == 1


def test_domain_errors(run, tmp_path):
    (tmp_path / 'bad.qd').write_text('#iterations 0\ny = oops\n')
    assert run('analyze', 'bad.qd')[0] == 2
    (tmp_path / 'bad.fc').write_text('{"Vertices": [{"Id": 1, "Type": 9, "Content": ""}], "Edges": []}')
    assert run('build', 'bad.fc')[0] == 2
    assert run('gen', 'gauss-jordan', '--n', '9')[0] == 2


def test_schedule(run):
    run('gen', 'matmul', '--n', '1', '--k', '4', '--m', '1', '-o', 'a.qd')
    code, out, _ = run('schedule', 'a.qd')
    doc = json.loads(out)
    assert code == 0 and [len(lv) for lv in doc['levels']] == [4, 2, 1]
    assert run('schedule', 'a.qd', '-o', 's.json')[0] == 0


def test_catalog_commands(run, tmp_path):
    run('gen', 'matmul', '--n', '2', '--k', '2', '--m', '2', '-o', 'a.qd')
    assert run('catalog', 'algorithm-add', '--name', 'mm', '--id', 'mm')[:2] == (0, 'mm\n')
    assert run('catalog', 'algorithm-add', '--name', 'mm', '--id', 'mm')[0] == 3
    code, out, _ = run('catalog', 'determinant-add', 'mm', 'a.qd')
    assert code == 0 and out == 'mm.1 D=2 P=8\n'
    assert run('catalog', 'algorithm-list')[1].startswith('mm\t1\tmm')
    assert run('catalog', 'determinant-list', 'mm')[1].startswith('mm.1\t')
    assert run('catalog', 'determinant-download', 'mm.1')[1] == (tmp_path / 'a.qd').read_text()
    assert run('catalog', 'compare', 'mm', 'mm')[1] == 'dD=0 (equal)\ndP=0 (equal)\n'
    assert run('compare', 'mm', 'mm')[0] == 0
    assert run('catalog', 'algorithm-update', 'mm', '--description', 'd')[0] == 0
    assert run('catalog', 'determinant-remove', 'mm.1')[0] == 0
    assert run('catalog', 'algorithm-remove', 'mm')[0] == 0
    assert run('catalog', 'algorithm-remove', 'mm')[0] == 3


@pytest.mark.skipif(shutil.which('qdet') is None, reason='console script not installed')
def test_console_script(tmp_path):
    r = subprocess.run(['qdet', 'formula', 'grid-jacobi-width-pow2', '--s', '9'],
                       capture_output=True, text=True, cwd=tmp_path)
    assert r.returncode == 0 and r.stdout == '2626\n'


def test_oversized_file_is_a_domain_error(run, tmp_path):
    code, out, err = run('gen', 'grid-jacobi', '--K', '2', '--J', '16', '--L', '6', '-o', 'g.qd')
    assert code == 2 and 'no sharing' in err
    assert not (tmp_path / 'g.qd').exists()

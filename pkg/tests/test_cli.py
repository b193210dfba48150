"""
Tests for the command-line frontend: one tiny golden instance per subcommand,
exit codes, the manifest and byte-identical reruns
"""

import csv
import json
import math

import pytest

from kac_ising.cli import EXIT_CONVERGENCE, EXIT_OK, EXIT_VALIDATION, format_value, parse_and_dispatch
from kac_ising.effective import ensemble_gap
from kac_ising.errors import ConvergenceError
from kac_ising.ising1d import Coupling
from kac_ising.runner import ExperimentRunner


def run_cli(tmp_path, *argv, name='out.csv'):
    out = tmp_path / name
    code = parse_and_dispatch(list(argv) + ['--out', str(out)])
    return code, out


def read_csv(path):
    with open(path, newline='') as f:
        return list(csv.reader(f))


def read_json(path):
    with open(path) as f:
        return json.load(f)


def manifest_of(out):
    return read_json(out.with_name(out.stem + '.manifest.json'))


def test_phase_diagram_without_coupling(tmp_path):
    code, out = run_cli(tmp_path, 'phase-diagram', '--lambda', '0', '--grid-step', '1e-2')
    assert code == EXIT_OK
    rows = read_csv(out)
    assert rows[0] == ['m', 'g', 'envelope']
    for m, g, envelope in rows[1:]:
        assert float(envelope) == pytest.approx(float(g), abs=1e-9)

    summary = read_json(out.with_suffix('.json'))['summary']
    assert summary['flat_interval'] is None
    assert summary['pressure_lp'] == pytest.approx(math.log(2), abs=1e-10)
    assert all(manifest_of(out)['acceptance'].values())


def test_phase_diagram_plateau_in_sidecar(tmp_path):
    code, out = run_cli(tmp_path, 'phase-diagram', '--lambda', '0.01', '--grid-step', '1e-3', name='pd.csv')
    assert code == EXIT_OK
    lo, hi = read_json(tmp_path / 'pd.json')['summary']['flat_interval']
    assert lo == pytest.approx(-hi, abs=1e-9)
    assert hi == pytest.approx(math.sqrt(0.06), rel=0.05)


def test_spontaneous_mag(tmp_path):
    code, out = run_cli(tmp_path, 'spontaneous-mag', '--lambdas', '0.001')
    assert code == EXIT_OK
    rows = read_csv(out)
    assert rows[0] == ['lambda', 'm_s', 'small_coupling_law', 'ratio']
    assert float(rows[1][2]) == pytest.approx(0.0774597, abs=1e-7)
    assert abs(float(rows[1][3]) - 1) <= 0.05


def test_cluster_expand_csv_and_json(tmp_path):
    code, out = run_cli(tmp_path, 'cluster-expand', '--lambda', '0.05', '--ell', '4', '--degree', '2')
    assert code == EXIT_OK
    rows = read_csv(out)
    assert rows[0] == ['sites', 'powers', 'degree', 'value']
    assert all(int(row[2]) % 2 == 0 for row in rows[1:])
    assert manifest_of(out)['acceptance']['odd_coefficients_absent']

    code, out = run_cli(tmp_path, 'cluster-expand', '--lambda', '0.05', '--ell', '4', '--degree', '2',
                        '--format', 'json', name='coeffs.json')
    assert code == EXIT_OK
    document = read_json(out)
    assert document['ring_length'] == 4
    assert document['max_total_degree'] == 2
    assert not (tmp_path / 'coeffs.json.json').exists()


def test_kp_check(tmp_path):
    code, out = run_cli(tmp_path, 'kp-check', '--lambda', '0.01')
    assert code == EXIT_OK
    summary = read_json(out.with_suffix('.json'))['summary']
    assert summary['holds'] is True
    assert summary['size_convention'] == 'bonds'
    assert 0.01 < summary['max_lambda_kp'] < 0.5


def test_decompose_json_to_stdout(capsys):
    assert parse_and_dispatch(['decompose', '--powers', '2,1', '--format', 'json']) == EXIT_OK
    document = json.loads(capsys.readouterr().out)
    assert document['n'] == [2, 1]
    assert document['p'] == ['2/3', '1/3']
    assert document['d'] == [{'i': 1, 'j': 2, 'terms': [{'powers': [1, 0], 'coeff': '-2/3'},
                                                        {'powers': [0, 1], 'coeff': '-1/3'}]}]


def test_decompose_csv_golden(tmp_path):
    code, out = run_cli(tmp_path, 'decompose', '--powers', '1,1')
    assert code == EXIT_OK
    assert out.read_text() == (
        'kind,i,j,powers,coeff\n'
        'p,1,,,1/2\n'
        'p,2,,,1/2\n'
        'd,1,2,0 0,-1/2\n'
    )
    assert all(manifest_of(out)['acceptance'].values())


def test_eff_minimize(tmp_path):
    code, out = run_cli(tmp_path, 'eff-minimize', '--lambda', '0.05', '--h-ext', '0.05', '--ell', '8',
                        '--restarts', '8', '--seed', '1')
    assert code == EXIT_OK
    rows = read_csv(out)
    assert rows[0] == ['rank', 'value', 'per_site', 'spread', 'global'] + [f'u{i}' for i in range(8)]
    assert rows[1][4] == 'true'
    acceptance = manifest_of(out)['acceptance']
    assert acceptance['global_minimizers_homogeneous']
    assert acceptance['matches_homogeneous_reduction']


def test_ensemble_gap_without_coupling(tmp_path):
    code, out = run_cli(tmp_path, 'ensemble-gap', '--lambda', '0', '--ells', '2')
    assert code == EXIT_OK
    rows = read_csv(out)
    assert rows[0] == ['ell', 'gap', 'phi', 'grand']
    assert float(rows[1][1]) == pytest.approx(math.log(2) - math.log(6) / 4, abs=1e-12)


def test_ensemble_gap_layer_profile(tmp_path):
    code, out = run_cli(tmp_path, 'ensemble-gap', '--lambda', '0', '--ells', '2', '--m', '0,0')
    assert code == EXIT_OK
    assert float(read_csv(out)[1][1]) == pytest.approx(math.log(2) - math.log(6) / 4, abs=1e-12)

    profile = [0.5, 0.0, -0.5, 0.0]
    code, out = run_cli(tmp_path, 'ensemble-gap', '--lambda', '0.1', '--ells', '4', '--m', '0.5,0,-0.5,0')
    assert code == EXIT_OK
    expected = ensemble_gap(Coupling(0.1), 4, profile).gap
    assert float(read_csv(out)[1][1]) == pytest.approx(expected, rel=1e-12)
    assert read_json(out.with_suffix('.json'))['summary']['m'] == profile


def test_ensemble_gap_profile_length_mismatch(tmp_path):
    code, out = run_cli(tmp_path, 'ensemble-gap', '--lambda', '0.1', '--ells', '2,4', '--m', '0,0')
    assert code == EXIT_VALIDATION
    assert manifest_of(out)['status'] == 'rejected'


def test_theta_scan_coarse(tmp_path):
    code, out = run_cli(tmp_path, 'theta-scan', '--resolution', '101')
    assert code == EXIT_OK
    summary = read_json(out.with_suffix('.json'))['summary']
    assert summary['grid_max'] <= 0.375
    assert len(read_csv(out)) == 102


MC_ARGS = ['mc-run', '--lambda', '0.1', '--h-ext', '0.1', '--gamma', '0.25', '--L', '12',
           '--sweeps', '64', '--warmup', '8', '--seed', '42']


def test_mc_run_trace(tmp_path):
    code, out = run_cli(tmp_path, *MC_ARGS)
    assert code == EXIT_OK
    rows = read_csv(out)
    assert rows[0] == ['sweep', 'magnetization', 'energy']
    summary = read_json(out.with_suffix('.json'))['summary']
    assert summary['rng_algorithm'] == 'Philox'
    assert summary['L'] == 12
    assert manifest_of(out)['seeds'] == {'seed': 42}


def test_mc_run_is_byte_identical(tmp_path):
    first = tmp_path / 'a'
    second = tmp_path / 'b'
    first.mkdir()
    second.mkdir()
    assert run_cli(first, *MC_ARGS)[0] == EXIT_OK
    assert run_cli(second, *MC_ARGS)[0] == EXIT_OK
    assert (first / 'out.csv').read_bytes() == (second / 'out.csv').read_bytes()
    assert (first / 'out.json').read_bytes() == (second / 'out.json').read_bytes()


def test_gamma_sweep(tmp_path):
    code, out = run_cli(tmp_path, 'gamma-sweep', '--lambda', '0', '--gammas', '0.25,0.5', '--ratio', '4',
                        '--sweeps', '40', '--warmup', '0', '--seed', '3')
    assert code == EXIT_OK
    rows = read_csv(out)
    assert rows[0] == ['gamma', 'L', 'mean_magnetization', 'stderr', 'predicted', 'deviation', 'seed']
    assert [float(row[0]) for row in rows[1:]] == [0.25, 0.5]
    assert [int(row[1]) for row in rows[1:]] == [16, 8]


def test_manifest_records_flags_and_versions(tmp_path):
    code, out = run_cli(tmp_path, 'kp-check', '--lambda', '0.02', '--size-convention', 'sites')
    assert code == EXIT_OK
    manifest = manifest_of(out)
    assert manifest['status'] == 'ok'
    assert manifest['command'] == 'kp-check'
    assert manifest['flags']['lam'] == 0.02
    assert manifest['flags']['size_convention'] == 'sites'
    assert manifest['flags']['out'] == str(out)
    assert manifest['params'] == {'lam': 0.02, 'b': None, 'size_convention': 'sites'}
    assert {'python', 'numpy', 'scipy', 'sympy', 'numba'} <= set(manifest['versions'])
    assert 'inversion_tolerance' in manifest['solver']


def test_manifest_identical_modulo_timing(tmp_path):
    code, out = run_cli(tmp_path, 'decompose', '--powers', '2,1,1')
    assert code == EXIT_OK
    first = manifest_of(out)
    assert parse_and_dispatch(['decompose', '--powers', '2,1,1', '--out', str(out)]) == EXIT_OK
    second = manifest_of(out)
    for manifest in (first, second):
        manifest.pop('timestamp')
        manifest.pop('wall_time')
    assert first == second


def test_rejected_run_writes_manifest_only(tmp_path):
    code, out = run_cli(tmp_path, 'phase-diagram', '--lambda', '-0.1')
    assert code == EXIT_VALIDATION
    assert not out.exists()
    assert not out.with_suffix('.json').exists()
    manifest = manifest_of(out)
    assert manifest['status'] == 'rejected'
    assert manifest['acceptance'] == {}
    assert 'lam' in manifest['error']


@pytest.mark.parametrize("argv", [
    ['phase-diagram'],
    ['phase-diagram', '--lambda', 'nan'],
    ['phase-diagram', '--lambda', '0.01', '--grid-step', '0.05'],
    ['decompose', '--powers', '1'],
    ['ensemble-gap', '--lambda', '0.1', '--ells', '6'],
    ['mc-run', '--lambda', '0.1', '--gamma', '0.25', '--L', '6'],
    ['mc-run', '--lambda', '0.1', '--gamma', '0.25', '--L', '12', '--sweeps', '20'],
    ['kp-check', '--lambda', '0.01', '--size-convention', 'volume'],
    ['theta-scan', '--bound', '1.0'],
    ['no-such-command'],
    ['kp-check', '--lambda', '0.01', '--no-such-flag'],
])
def test_validation_exit_code(argv, capsys):
    assert parse_and_dispatch(argv) == EXIT_VALIDATION


def test_convergence_exit_code(tmp_path, monkeypatch):
    def fail(self, name, params, config, output_format):
        raise ConvergenceError("Newton iteration did not converge", iterations=200, residual=1e-3)

    monkeypatch.setattr(ExperimentRunner, 'run', fail)
    code, out = run_cli(tmp_path, 'kp-check', '--lambda', '0.01')
    assert code == EXIT_CONVERGENCE
    assert not out.exists()
    assert manifest_of(out)['status'] == 'failed'


def test_toml_config_with_flag_override(tmp_path):
    config = tmp_path / 'run.toml'
    config.write_text(
        '[params]\n'
        'lam = 0.01\n'
        'size_convention = "sites"\n'
        '\n'
        '[solver]\n'
        'kp_root_tolerance = 1e-5\n'
    )
    code, out = run_cli(tmp_path, 'kp-check', '--config', str(config), '--size-convention', 'bonds')
    assert code == EXIT_OK
    manifest = manifest_of(out)
    assert manifest['params']['lam'] == 0.01
    assert manifest['params']['size_convention'] == 'bonds'
    assert manifest['solver']['kp_root_tolerance'] == 1e-5


@pytest.mark.parametrize("body", [
    '[params]\nlam = 0.01\nell = 4\n',
    '[params]\nlam = 0.01\n[solver]\nno_such_setting = 1\n',
    '[params]\nlam = [0.01\n',
])
def test_bad_toml_is_rejected(tmp_path, body):
    config = tmp_path / 'run.toml'
    config.write_text(body)
    code, out = run_cli(tmp_path, 'kp-check', '--config', str(config))
    assert code == EXIT_VALIDATION
    assert manifest_of(out)['status'] == 'rejected'


def test_cache_dir_serves_second_run(tmp_path):
    cache_dir = tmp_path / 'cache'
    argv = ['decompose', '--powers', '2,2', '--cache-dir', str(cache_dir)]
    code, out = run_cli(tmp_path, *argv)
    assert code == EXIT_OK
    first = out.read_text()
    assert manifest_of(out)['from_cache'] is False

    code, out = run_cli(tmp_path, *argv)
    assert code == EXIT_OK
    assert out.read_text() == first
    assert manifest_of(out)['from_cache'] is True


def test_float_formatting_round_trips():
    for value in (0.1, 1 / 3, math.pi, -2.5e-17):
        assert float(format_value(value)) == value
    assert format_value(True) == 'true'
    assert format_value(7) == '7'

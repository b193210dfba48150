"""
Tests for solver settings and TOML run files
"""

import pytest

from kac_ising.config import DEFAULT_CONFIG, SolverConfig, load_run_config, solver_config_from_mapping
from kac_ising.errors import ConfigError


def test_defaults():
    assert DEFAULT_CONFIG.inversion_bisection_steps == 80
    assert DEFAULT_CONFIG.minimization_grid_step == 1e-3
    assert DEFAULT_CONFIG.multistart_restarts == 32
    assert DEFAULT_CONFIG.batch_count == 32
    with pytest.raises(AttributeError):
        DEFAULT_CONFIG.batch_count = 16


def test_overrides_are_coerced():
    config = solver_config_from_mapping({'multistart_restarts': 8.0, 'tie_tolerance': 1})
    assert config.multistart_restarts == 8
    assert isinstance(config.multistart_restarts, int)
    assert config.tie_tolerance == 1.0
    assert config.inversion_tolerance == DEFAULT_CONFIG.inversion_tolerance


def test_unknown_and_malformed_overrides():
    with pytest.raises(ConfigError):
        solver_config_from_mapping({'no_such_setting': 1})
    with pytest.raises(ConfigError):
        solver_config_from_mapping({'batch_count': 'many'})


def test_load_run_config(tmp_path):
    path = tmp_path / 'run.toml'
    path.write_text('[params]\nlam = 0.05\nell = 8\n\n[solver]\nmultistart_restarts = 16\n')
    params, config = load_run_config(str(path))
    assert params == {'lam': 0.05, 'ell': 8}
    assert isinstance(config, SolverConfig)
    assert config.multistart_restarts == 16


def test_params_only(tmp_path):
    path = tmp_path / 'run.toml'
    path.write_text('[params]\nlambdas = [0.001, 0.0001]\n')
    params, config = load_run_config(str(path))
    assert params == {'lambdas': [0.001, 0.0001]}
    assert config == DEFAULT_CONFIG


@pytest.mark.parametrize("body", [
    '[params]\nlam = \n',
    '[params.nested]\nlam = 0.1\n',
    'params = 3\n',
])
def test_bad_files(tmp_path, body):
    path = tmp_path / 'run.toml'
    path.write_text(body)
    with pytest.raises(ConfigError):
        load_run_config(str(path))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(str(tmp_path / 'absent.toml'))

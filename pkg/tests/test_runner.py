"""
Tests for the experiment runner and the experiment base classes
"""

from fractions import Fraction

import numpy as np
import pytest

from kac_ising.base import (ExperimentContext, ExperimentResult, Table, float_list, int_list, require_int,
                            to_jsonable)
from kac_ising.errors import ConfigError, DomainError, InvalidInputError
from kac_ising.experiments import ALL_EXPERIMENTS, KPCheckExperiment
from kac_ising.runner import ExperimentRunner

COMMANDS = ['phase-diagram', 'spontaneous-mag', 'cluster-expand', 'kp-check', 'decompose',
            'eff-minimize', 'ensemble-gap', 'theta-scan', 'mc-run', 'gamma-sweep']


def test_experiments_sorted_by_priority():
    runner = ExperimentRunner()
    assert runner.list_experiments() == COMMANDS
    priorities = [experiment.priority for experiment in runner.experiments]
    assert priorities == sorted(priorities, reverse=True)
    assert len(ALL_EXPERIMENTS) == len(COMMANDS)


def test_unknown_experiment():
    with pytest.raises(ConfigError):
        ExperimentRunner().get('phase-portrait')


def test_prepare_resolves_defaults():
    context = ExperimentRunner().prepare('kp-check', {'lam': 0.01})
    assert context.params == {'lam': 0.01, 'b': None, 'size_convention': 'bonds'}
    assert context.cache_enabled is False


def test_prepare_rejects_missing_and_invalid():
    runner = ExperimentRunner()
    with pytest.raises(ConfigError):
        runner.prepare('mc-run', {'lam': 0.1, 'gamma': 0.25})
    with pytest.raises(DomainError):
        runner.prepare('mc-run', {'lam': 0.1, 'gamma': 0.25, 'L': 4})
    with pytest.raises(InvalidInputError):
        runner.prepare('ensemble-gap', {'lam': 0.1, 'ells': '2,x'})


def test_run_records_stats():
    runner = ExperimentRunner()
    result = runner.run('decompose', {'powers': '1,1'})
    assert result.acceptance['identity_verified']
    assert result.from_cache is False
    with pytest.raises(DomainError):
        runner.run('kp-check', {'lam': -1.0})

    stats = runner.get_performance_stats()
    assert stats['total_runs'] == 2
    assert stats['successful_runs'] == 1
    assert stats['success_rate'] == 0.5
    assert stats['experiment_usage']['kp-check'] == {'attempts': 1, 'successes': 0, 'avg_time': pytest.approx(0.0, abs=1.0)}
    assert 'decompose' in runner.get_timing_summary()

    runner.reset_stats()
    assert runner.get_performance_stats()['total_runs'] == 0


def test_cached_run(tmp_path):
    runner = ExperimentRunner(cache_dir=str(tmp_path))
    first = runner.run('kp-check', {'lam': 0.01})
    second = runner.run('kp-check', {'lam': 0.01})
    assert second.from_cache
    assert second.summary == to_jsonable(first.summary)
    assert second.table.rows == to_jsonable(first.table.rows)
    assert runner.get_performance_stats()['cache_hit_rate'] == 0.5

    third = runner.run('kp-check', {'lam': 0.02})
    assert not third.from_cache
    runner.clear_cache()
    assert runner.cache.entries == {}


def test_cache_key_depends_on_params():
    experiment = KPCheckExperiment()
    a = ExperimentContext(params=experiment.resolve_params({'lam': 0.01}))
    b = ExperimentContext(params=experiment.resolve_params({'lam': 0.02}))
    assert experiment.get_cache_key(a) != experiment.get_cache_key(b)
    assert experiment.get_cache_key(a) == experiment.get_cache_key(
        ExperimentContext(params=experiment.resolve_params({'lam': 0.01})))


def test_result_dict_round_trip():
    result = ExperimentResult(experiment_name='x', summary={'a': 1}, table=Table(['c'], [[1.5]]),
                              acceptance={'ok': True}, seeds={'seed': 3})
    restored = ExperimentResult.from_dict(result.to_dict())
    assert restored.table.rows == [[1.5]]
    assert restored.from_cache


def test_to_jsonable():
    value = {'f': Fraction(2, 3), 'b': np.bool_(True), 'i': np.int64(4), 'x': np.float64(np.inf),
             'a': np.array([0.5, 1.0]), 't': (1, 2)}
    assert to_jsonable(value) == {'f': '2/3', 'b': True, 'i': 4, 'x': 'inf', 'a': [0.5, 1.0], 't': [1, 2]}


def test_parameter_helpers():
    assert float_list('0.1, 0.2', 'xs') == [0.1, 0.2]
    assert float_list([1, 2], 'xs') == [1.0, 2.0]
    assert int_list('2,4', 'ells') == [2, 4]
    with pytest.raises(InvalidInputError):
        int_list('2.5', 'ells')
    with pytest.raises(InvalidInputError):
        float_list('', 'xs')
    assert require_int({'n': 4.0}, 'n', 1) == 4
    with pytest.raises(InvalidInputError):
        require_int({'n': True}, 'n', 1)
    with pytest.raises(DomainError):
        require_int({'n': 0}, 'n', 1)

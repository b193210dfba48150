"""
Experiment runner - dispatches experiments with validation, caching and run statistics
"""

import logging
import time
from typing import Any, Dict, List, Optional

from .base import CacheableExperiment, ExperimentContext, ExperimentResult, to_jsonable
from .cache import ResultCache
from .config import DEFAULT_CONFIG, SolverConfig
from .errors import ConfigError
from .experiments import ALL_EXPERIMENTS

logger = logging.getLogger(__name__)


def _empty_stats() -> Dict[str, Any]:
    return {
        'total_runs': 0,
        'cache_hits': 0,
        'experiment_usage': {},
        'average_run_time': 0.0,
        'successful_runs': 0,
    }


class ExperimentRunner:
    """
    Runs experiments by subcommand name

    Parameters are resolved against the experiment's defaults and validated
    before any computation; with a cache directory, results are reused for
    identical parameters and solver settings.
    """

    def __init__(self, cache_dir: Optional[str] = None, debug: bool = False):
        self.cache = ResultCache(cache_dir) if cache_dir else None
        self.debug = debug
        self.experiments: List[CacheableExperiment] = sorted(cls() for cls in ALL_EXPERIMENTS)
        self.performance_stats = _empty_stats()

    def get(self, name: str) -> CacheableExperiment:
        for experiment in self.experiments:
            if experiment.name == name:
                return experiment
        raise ConfigError(f"Unknown experiment '{name}'")

    def list_experiments(self) -> List[str]:
        return [experiment.name for experiment in self.experiments]

    def prepare(self, name: str, params: Dict[str, Any], config: SolverConfig = DEFAULT_CONFIG,
                output_format: str = 'csv') -> ExperimentContext:
        """Resolve and validate parameters without running anything"""
        experiment = self.get(name)
        context = ExperimentContext(
            params=experiment.resolve_params(params),
            config=config,
            output_format=output_format,
            cache_enabled=self.cache is not None,
            debug=self.debug,
        )
        experiment.validate(context)
        return context

    def run(self, name: str, params: Dict[str, Any], config: SolverConfig = DEFAULT_CONFIG,
            output_format: str = 'csv') -> ExperimentResult:
        start_time = time.time()
        self.performance_stats['total_runs'] += 1
        experiment = self.get(name)
        try:
            context = self.prepare(name, params, config, output_format)
        except Exception:
            self._update_performance_stats(name, time.time() - start_time, False)
            raise

        if experiment.should_use_cache(context):
            key = experiment.get_cache_key(context)
            payload = self.cache.get(key)
            if payload is not None:
                self.performance_stats['cache_hits'] += 1
                self._update_performance_stats(name, time.time() - start_time, True)
                logger.debug(f"  → {name}: cache hit {key}")
                return ExperimentResult.from_dict(payload)

        logger.debug(f"  → {name}: running with {context.params}")
        try:
            result = experiment.time_operation(name, experiment.run, context)
        except Exception:
            self._update_performance_stats(name, time.time() - start_time, False)
            raise

        if experiment.should_use_cache(context):
            self.cache.put(name, experiment.get_cache_key(context), to_jsonable(result.to_dict()))
        self._update_performance_stats(name, time.time() - start_time, True)
        return result

    def _update_performance_stats(self, name: str, duration: float, success: bool):
        usage = self.performance_stats['experiment_usage']
        if name not in usage:
            usage[name] = {'attempts': 0, 'successes': 0, 'avg_time': 0.0}

        stats = usage[name]
        stats['attempts'] += 1
        if success:
            stats['successes'] += 1
            self.performance_stats['successful_runs'] += 1
        stats['avg_time'] = (stats['avg_time'] * (stats['attempts'] - 1) + duration) / stats['attempts']

        total = self.performance_stats['total_runs']
        self.performance_stats['average_run_time'] = (
            self.performance_stats['average_run_time'] * (total - 1) + duration
        ) / total

    def get_performance_stats(self) -> Dict[str, Any]:
        stats = self.performance_stats.copy()
        if self.cache:
            stats['cache_stats'] = self.cache.get_stats()
        if stats['total_runs'] > 0:
            stats['success_rate'] = stats['successful_runs'] / stats['total_runs']
            stats['cache_hit_rate'] = stats['cache_hits'] / stats['total_runs']
        else:
            stats['success_rate'] = 0.0
            stats['cache_hit_rate'] = 0.0
        return stats

    def get_timing_summary(self) -> Dict[str, float]:
        timings: Dict[str, float] = {}
        for experiment in self.experiments:
            timings.update(experiment.get_timing_summary())
        return timings

    def clear_cache(self):
        if self.cache:
            self.cache.clear()

    def reset_stats(self):
        self.performance_stats = _empty_stats()

"""
Monte Carlo experiments: a single Metropolis run and the gamma sweep
"""

import math

from ..base import (CacheableExperiment, ExperimentContext, ExperimentResult, Table,
                    float_list, require_finite, require_int, require_nonnegative, to_jsonable)
from ..errors import DomainError, InvalidInputError
from ..mc import KERNEL_SHAPES, ModelParams, build_kernel, gamma_sweep, run_metropolis
from ..phase import lp_pressure


def _check_model(params):
    require_nonnegative(params, 'lam', 'kac_strength')
    require_finite(params, 'h_ext')
    if params['kernel_shape'] not in KERNEL_SHAPES:
        raise DomainError(f"kernel_shape must be one of {KERNEL_SHAPES}, got {params['kernel_shape']!r}")


def _check_sweeps(params, batch_count: int):
    sweeps = require_int(params, 'sweeps', 1)
    warmup = sweeps // 10 if params['warmup'] is None else require_int(params, 'warmup', 0)
    if sweeps - warmup < batch_count:
        raise InvalidInputError(f"need at least {batch_count} sweeps after a warmup of {warmup}, got {sweeps}")
    require_int(params, 'seed', 0)
    return sweeps, warmup


class McRunExperiment(CacheableExperiment):
    """One Metropolis chain with its magnetization/energy trace"""

    command = 'mc-run'
    description = 'Metropolis simulation of the layered Kac-Ising model'
    defaults = {'lam': None, 'h_ext': 0.0, 'gamma': None, 'L': None, 'sweeps': 2000, 'warmup': None,
                'seed': 0, 'kernel_shape': 'raised_cosine', 'kac_strength': 1.0}
    required = ('lam', 'gamma', 'L')

    def __init__(self):
        super().__init__(priority=60)

    def validate(self, context: ExperimentContext):
        params = context.params
        _check_model(params)
        require_finite(params, 'gamma')
        kernel = build_kernel(float(params['gamma']), params['kernel_shape'])
        L = require_int(params, 'L', 1)
        if L < 2 * kernel.range + 1:
            raise DomainError(f"L = {L} is smaller than the kernel support {2 * kernel.range + 1}")
        _check_sweeps(params, context.config.batch_count)

    def run(self, context: ExperimentContext) -> ExperimentResult:
        params = context.params
        sweeps, warmup = _check_sweeps(params, context.config.batch_count)
        model = ModelParams(lam=float(params['lam']), h_ext=float(params['h_ext']), gamma=float(params['gamma']),
                            kernel_shape=params['kernel_shape'], kac_strength=float(params['kac_strength']))
        seed = int(params['seed'])
        result = run_metropolis(model, int(params['L']), sweeps, warmup, seed, config=context.config)
        predicted = lp_pressure(model.lam, model.h_ext, config=context.config).minimizer_m
        deviation = abs(result.mean_magnetization - predicted)
        summary = {
            'lam': model.lam,
            'h_ext': model.h_ext,
            'gamma': model.gamma,
            'kernel_shape': model.kernel_shape,
            'kac_strength': model.kac_strength,
            'L': result.L,
            'sweeps': result.sweeps,
            'warmup': result.warmup,
            'mean_magnetization': result.mean_magnetization,
            'stderr': result.stderr,
            'predicted_m': predicted,
            'deviation': deviation,
            'acceptance_rate': result.acceptance_rate,
            'rng_algorithm': result.rng_algorithm,
            'batch_means': result.batch_means,
        }
        return ExperimentResult(
            experiment_name=self.name,
            summary=to_jsonable(summary),
            table=Table(columns=['sweep', 'magnetization', 'energy'], rows=[list(row) for row in result.trace_rows()]),
            acceptance={'within_0.05_of_prediction': deviation <= 0.05},
            seeds={'seed': seed},
        )


class GammaSweepExperiment(CacheableExperiment):
    """Metropolis runs at fixed L/range ratio for a list of kernel ranges"""

    command = 'gamma-sweep'
    description = 'Monte Carlo magnetization against the Lebowitz-Penrose prediction as gamma shrinks'
    defaults = {'lam': None, 'h_ext': 0.0, 'gammas': '0.125,0.0625', 'sweeps': 2000, 'warmup': None,
                'seed': 0, 'ratio': 8, 'workers': 1, 'kernel_shape': 'raised_cosine', 'kac_strength': 1.0}
    required = ('lam',)

    def __init__(self):
        super().__init__(priority=55)

    def validate(self, context: ExperimentContext):
        params = context.params
        _check_model(params)
        for gamma in float_list(params['gammas'], 'gammas'):
            build_kernel(gamma, params['kernel_shape'])
        require_int(params, 'ratio', 3)
        require_int(params, 'workers', 1)
        _check_sweeps(params, context.config.batch_count)

    def run(self, context: ExperimentContext) -> ExperimentResult:
        params = context.params
        sweeps, warmup = _check_sweeps(params, context.config.batch_count)
        gammas = float_list(params['gammas'], 'gammas')
        model = ModelParams(lam=float(params['lam']), h_ext=float(params['h_ext']), gamma=max(gammas),
                            kernel_shape=params['kernel_shape'], kac_strength=float(params['kac_strength']))
        rows = gamma_sweep(model, gammas, sweeps, warmup, int(params['seed']), int(params['ratio']),
                           int(params['workers']), context.config)

        finest, coarsest = rows[0], rows[-1]
        combined = math.hypot(finest.stderr, coarsest.stderr)
        return ExperimentResult(
            experiment_name=self.name,
            summary=to_jsonable({
                'lam': model.lam,
                'h_ext': model.h_ext,
                'ratio': int(params['ratio']),
                'sweeps': sweeps,
                'warmup': warmup,
                'predicted_m': rows[0].predicted,
            }),
            table=Table(columns=['gamma', 'L', 'mean_magnetization', 'stderr', 'predicted', 'deviation', 'seed'],
                        rows=[[r.gamma, r.L, r.mean_magnetization, r.stderr, r.predicted, r.deviation, r.seed]
                              for r in rows]),
            acceptance={'deviation_not_growing': finest.deviation <= coarsest.deviation + 3 * combined},
            seeds={f"gamma={r.gamma!r}": r.seed for r in rows},
        )

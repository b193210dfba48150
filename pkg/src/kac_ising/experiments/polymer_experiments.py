"""
Cluster-expansion experiments: coefficients of log Z* and the K-P condition
"""

import math

from ..base import (CacheableExperiment, ExperimentContext, ExperimentResult, Table,
                    require_finite, require_int, require_nonnegative, to_jsonable)
from ..errors import DomainError
from ..polymer import (cluster_coefficients, coefficient_decay_report, default_b, kp_check,
                       long_range_decay, max_lambda_kp)

SIZE_CONVENTIONS = ('bonds', 'sites')


class ClusterExpandExperiment(CacheableExperiment):
    """Truncated coefficients A_N of log Z* on an ell-ring"""

    command = 'cluster-expand'
    description = 'cluster coefficients of log Z*, their decay and the pair coefficients'
    defaults = {'lam': None, 'ell': 8, 'degree': 6, 'b': None}
    required = ('lam',)

    def __init__(self):
        super().__init__(priority=90)

    def validate(self, context: ExperimentContext):
        params = context.params
        require_nonnegative(params, 'lam')
        require_int(params, 'ell', 3)
        require_int(params, 'degree', 0)
        if params['b'] is not None:
            require_finite(params, 'b')

    def run(self, context: ExperimentContext) -> ExperimentResult:
        params = context.params
        lam = float(params['lam'])
        coeffs = cluster_coefficients(lam, int(params['ell']), int(params['degree']), context.config)
        b = default_b(lam) if params['b'] is None else float(params['b'])
        decay = coefficient_decay_report(coeffs, b) if math.isfinite(b) else []
        pairs = long_range_decay(coeffs)

        rows = []
        for key, value in sorted(coeffs.entries.items(), key=lambda kv: (sum(kv[0]), kv[0])):
            sites = [i for i, power in enumerate(key) if power]
            rows.append([' '.join(map(str, sites)), ' '.join(str(key[i]) for i in sites), sum(key), value])

        totals = [row.total for row in decay]
        summary = {
            'lam': lam,
            'ell': coeffs.ring_length,
            'degree': coeffs.max_total_degree,
            'a0': coeffs.a0,
            'b': b,
            'alpha': {str(d): value for d, value in pairs['alpha'].items()},
            'alpha_fit_c': pairs['c'],
            'decay': [{'M': row.M, 'total': row.total, 'bound': row.bound, 'within': row.within} for row in decay],
        }
        return ExperimentResult(
            experiment_name=self.name,
            summary=to_jsonable(summary),
            table=Table(columns=['sites', 'powers', 'degree', 'value'], rows=rows),
            acceptance={
                'odd_coefficients_absent': all(sum(key) % 2 == 0 for key in coeffs.entries),
                'decay_strictly_decreasing': all(b2 < a2 for a2, b2 in zip(totals, totals[1:])),
            },
            document=coeffs.to_json(),
        )


class KPCheckExperiment(CacheableExperiment):
    """Kotecky-Preiss sum at one lambda and the largest lambda where it holds"""

    command = 'kp-check'
    description = 'Kotecky-Preiss condition and its threshold coupling'
    defaults = {'lam': None, 'b': None, 'size_convention': 'bonds'}
    required = ('lam',)

    def __init__(self):
        super().__init__(priority=85)

    def validate(self, context: ExperimentContext):
        params = context.params
        require_nonnegative(params, 'lam')
        if params['b'] is not None:
            require_finite(params, 'b')
        if params['size_convention'] not in SIZE_CONVENTIONS:
            raise DomainError(f"size_convention must be one of {SIZE_CONVENTIONS}, "
                              f"got {params['size_convention']!r}")

    def run(self, context: ExperimentContext) -> ExperimentResult:
        params = context.params
        lam = float(params['lam'])
        b = None if params['b'] is None else float(params['b'])
        report = kp_check(lam, b, params['size_convention'])
        threshold = max_lambda_kp(params['size_convention'], context.config)
        return ExperimentResult(
            experiment_name=self.name,
            summary=to_jsonable({
                'lam': lam,
                'b': report.b,
                'size_convention': report.size_convention,
                'lhs_max': report.lhs_max,
                'rhs': report.rhs,
                'ratio': report.ratio,
                'holds': report.holds,
                'max_lambda_kp': threshold,
            }),
            table=Table(columns=['lambda', 'b', 'lhs', 'rhs', 'holds'],
                        rows=[[lam, report.b, report.lhs_max, report.rhs, report.holds]]),
            acceptance={'kp_holds': report.holds},
        )

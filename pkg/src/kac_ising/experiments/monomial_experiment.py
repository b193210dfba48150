"""
Exact decomposition of a monomial into a convex combination of powers minus gradient terms
"""

from ..base import CacheableExperiment, ExperimentContext, ExperimentResult, Table, int_list
from ..errors import DomainError
from ..monomial import (
    MultiIndex,
    coefficient_bound_report,
    decompose,
    decomposition_to_json,
    fraction_text,
    verify_identity,
)


class DecomposeExperiment(CacheableExperiment):
    """
    Exact rational decomposition of one monomial

    Rows list the weights p_i and every gradient coefficient d_ij; the JSON
    document carries the same data as fractions.
    """

    command = 'decompose'
    description = 'gradient-squared decomposition of prod u_i^n_i with exact rationals'
    defaults = {'powers': None, 'canonical': False, 'bound_u': 1.0}
    required = ('powers',)

    def __init__(self):
        super().__init__(priority=80)

    def validate(self, context: ExperimentContext):
        powers = int_list(context.params['powers'], 'powers')
        MultiIndex.coerce(powers)
        if sum(powers) < 2:
            raise DomainError(f"total degree must be at least 2, got {sum(powers)}")
        bound_u = float(context.params['bound_u'])
        if not (0 < bound_u <= 1):
            raise DomainError(f"bound_u must lie in (0, 1], got {bound_u}")

    def run(self, context: ExperimentContext) -> ExperimentResult:
        powers = tuple(int_list(context.params['powers'], 'powers'))
        dec = decompose(powers, canonical=bool(context.params['canonical']))
        verified = verify_identity(powers, dec)
        bound = coefficient_bound_report(powers, dec, float(context.params['bound_u']))

        rows = [['p', i + 1, '', '', fraction_text(p)] for i, p in enumerate(dec.p)]
        for (i, j), terms in sorted(dec.d.items()):
            for monomial_powers, coeff in sorted(terms.items(), reverse=True):
                rows.append(['d', i + 1, j + 1, ' '.join(map(str, monomial_powers)), fraction_text(coeff)])

        return ExperimentResult(
            experiment_name=self.name,
            summary={
                'powers': list(powers),
                'canonical': dec.canonical,
                'identity_verified': verified,
                'coefficient_bound_ratio': bound,
                'bound_u': float(context.params['bound_u']),
            },
            table=Table(columns=['kind', 'i', 'j', 'powers', 'coeff'], rows=rows),
            acceptance={
                'identity_verified': verified,
                'weights_sum_to_one': sum(dec.p) == 1,
                'gradient_coefficients_nonpositive': all(c <= 0 for terms in dec.d.values() for c in terms.values()),
            },
            document=decomposition_to_json(dec),
        )

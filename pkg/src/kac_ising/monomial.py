"""
Exact gradient-squared decomposition of monomials

Any monomial u_1^{n_1} ... u_k^{n_k} of degree N >= 2 is rewritten as

    sum_i p_i u_i^N + sum_{i<j} d_{i,j}(u) (u_i - u_j)^2

with (p_i) a probability vector and every d_{i,j} a polynomial of degree
N - 2 with non-positive coefficients. The data come from an absorbing random
walk on the exponent of the active variable, solved in exact rationals.
"""

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from .errors import DomainError, InvalidInputError

logger = logging.getLogger(__name__)

State = Tuple[int, int]
Monomial = Tuple[int, ...]


@dataclass(frozen=True)
class MultiIndex:
    """Exponents (n_1, ..., n_k), all positive"""
    n: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'n', tuple(int(v) for v in self.n))
        if not self.n:
            raise DomainError("a multi-index needs at least one exponent")
        if any(v < 1 for v in self.n):
            raise DomainError(f"exponents must be positive, got {self.n}")

    @classmethod
    def coerce(cls, n) -> 'MultiIndex':
        return n if isinstance(n, MultiIndex) else cls(tuple(n))

    @property
    def k(self) -> int:
        return len(self.n)

    @property
    def total(self) -> int:
        return sum(self.n)

    def partial_sum(self, j: int) -> int:
        """N_j = n_1 + ... + n_j, with j counted from 1"""
        return sum(self.n[:j])


@dataclass
class AbsorbingChain:
    """
    Walk through components 1..k-1; component i lives on the exponent range of stage i+1

    Components below k-1 hold only the interior positions 1..N_{i+1}-1; leaving
    one at either end lands on (i+1, N_{i+1}). The last component keeps both
    ends as traps.
    """
    multi_index: MultiIndex
    states: List[State]
    transition: Dict[Tuple[State, State], Fraction]
    start: State
    traps: Tuple[State, State]

    def index(self) -> Dict[State, int]:
        return {state: i for i, state in enumerate(self.states)}

    def transient_states(self) -> List[State]:
        return [s for s in self.states if s not in self.traps]

    def matrix(self) -> sympy.Matrix:
        idx = self.index()
        size = len(self.states)
        mat = sympy.zeros(size, size)
        for (a, b), prob in self.transition.items():
            mat[idx[a], idx[b]] = sympy.Rational(prob.numerator, prob.denominator)
        return mat

    def row_sums(self) -> Dict[State, Fraction]:
        sums = {state: Fraction(0) for state in self.states}
        for (a, _), prob in self.transition.items():
            sums[a] += prob
        return sums


@dataclass
class GradDecomposition:
    """Probability weights p and gradient coefficients d_{i,j}, 0-based variable indices"""
    n: Tuple[int, ...]
    p: List[Fraction]
    d: Dict[Tuple[int, int], Dict[Monomial, Fraction]] = field(default_factory=dict)
    trivial: bool = False
    canonical: bool = False


def build_chain(n) -> Optional[AbsorbingChain]:
    """
    Absorbing chain of the decomposition; None for a single variable, which needs no chain

    The chain serves simulation and inspection. decompose solves each stage
    walk on its own, since the chain merges both exits of a stage into the
    entry of the next one; for two variables the two agree exactly.
    """
    n = MultiIndex.coerce(n)
    if n.k == 1:
        return None
    if n.total < 2:
        raise DomainError(f"decomposition needs total degree >= 2, got {n.total}")

    k = n.k
    half = Fraction(1, 2)
    states: List[State] = []
    transition: Dict[Tuple[State, State], Fraction] = {}
    last = k - 1

    for i in range(1, k):
        top = n.partial_sum(i + 1)
        positions = range(0, top + 1) if i == last else range(1, top)
        states.extend((i, x) for x in positions)

    for i in range(1, k):
        top = n.partial_sum(i + 1)
        if i == last:
            for x in range(1, top):
                transition[((i, x), (i, x - 1))] = half
                transition[((i, x), (i, x + 1))] = half
            transition[((i, 0), (i, 0))] = Fraction(1)
            transition[((i, top), (i, top))] = Fraction(1)
            continue
        entry = (i + 1, top)
        for x in range(1, top):
            for step in (-1, 1):
                y = x + step
                target = entry if y in (0, top) else (i, y)
                transition[((i, x), target)] = transition.get(((i, x), target), Fraction(0)) + half

    traps = ((last, 0), (last, n.partial_sum(k)))
    return AbsorbingChain(multi_index=n, states=states, transition=transition,
                          start=(1, n.partial_sum(1)), traps=traps)


def _to_fraction(value) -> Fraction:
    value = sympy.nsimplify(value) if not isinstance(value, sympy.Rational) else value
    return Fraction(int(value.p), int(value.q))


def _fundamental_solves(chain: AbsorbingChain) -> Tuple[sympy.Matrix, sympy.Matrix, List[State]]:
    """(I - Q) restricted to transient states, absorption block R, transient order"""
    transient = chain.transient_states()
    t_idx = {s: i for i, s in enumerate(transient)}
    size = len(transient)
    eye_minus_q = sympy.eye(size)
    absorbing = sympy.zeros(size, 2)
    for (a, b), prob in chain.transition.items():
        if a not in t_idx:
            continue
        rational = sympy.Rational(prob.numerator, prob.denominator)
        if b in t_idx:
            eye_minus_q[t_idx[a], t_idx[b]] -= rational
        else:
            absorbing[t_idx[a], chain.traps.index(b)] += rational
    return eye_minus_q, absorbing, transient


def absorption_probabilities(chain: AbsorbingChain) -> Dict[State, Fraction]:
    """Exact probability of ending in each trap from the start state"""
    eye_minus_q, absorbing, transient = _fundamental_solves(chain)
    solution = eye_minus_q.LUsolve(absorbing)
    row = transient.index(chain.start)
    return {trap: _to_fraction(solution[row, col]) for col, trap in enumerate(chain.traps)}


def occupation_counts(chain: AbsorbingChain) -> Dict[State, Fraction]:
    """Exact expected number of visits to each transient state, start included"""
    eye_minus_q, _, transient = _fundamental_solves(chain)
    unit = sympy.zeros(len(transient), 1)
    unit[transient.index(chain.start), 0] = 1
    visits = eye_minus_q.T.LUsolve(unit)
    return {state: _to_fraction(visits[i, 0]) for i, state in enumerate(transient)}


def _stage_walk(start: int, top: int) -> Tuple[Fraction, List[Fraction]]:
    """
    Symmetric walk on 0..top from `start`, absorbed at both ends

    Returns (probability of leaving at top, expected visits to 1..top-1).
    """
    size = top - 1
    eye_minus_q = sympy.eye(size)
    exit_top = sympy.zeros(size, 1)
    for x in range(1, top):
        row = x - 1
        if x - 1 >= 1:
            eye_minus_q[row, row - 1] -= sympy.Rational(1, 2)
        if x + 1 <= top - 1:
            eye_minus_q[row, row + 1] -= sympy.Rational(1, 2)
        else:
            exit_top[row, 0] = sympy.Rational(1, 2)
    top_prob = eye_minus_q.LUsolve(exit_top)[start - 1, 0]
    unit = sympy.zeros(size, 1)
    unit[start - 1, 0] = 1
    visits = eye_minus_q.T.LUsolve(unit)
    return _to_fraction(top_prob), [_to_fraction(visits[i, 0]) for i in range(size)]


def _decompose_ordered(n: MultiIndex) -> GradDecomposition:
    k, total = n.k, n.total
    # probability that variable l is the active one when stage j starts
    active: Dict[int, Fraction] = {0: Fraction(1)}
    d: Dict[Tuple[int, int], Dict[Monomial, Fraction]] = {}

    for j in range(1, k):
        start, top = n.partial_sum(j), n.partial_sum(j + 1)
        stay, visits = _stage_walk(start, top)
        tail = n.n[j + 1:]
        for l, weight in active.items():
            terms: Dict[Monomial, Fraction] = {}
            for m in range(1, top):
                powers = [0] * k
                powers[l] = m - 1
                powers[j] = top - m - 1
                for r, power in enumerate(tail, start=j + 1):
                    powers[r] = power
                coeff = -Fraction(1, 2) * weight * visits[m - 1]
                if coeff:
                    key = tuple(powers)
                    terms[key] = terms.get(key, Fraction(0)) + coeff
            if terms:
                d[(l, j)] = terms
        switch = 1 - stay
        active = {l: weight * stay for l, weight in active.items()}
        active[j] = switch
        logger.debug(f"  → stage {j}: stay probability {stay}")

    p = [active.get(i, Fraction(0)) for i in range(k)]
    return GradDecomposition(n=n.n, p=p, d=d)


def decompose(n, canonical: bool = False) -> GradDecomposition:
    """
    Exact decomposition M_n(u) = sum p_i u_i^N + sum d_{i,j}(u)(u_i - u_j)^2

    Variables are processed in the given order. With canonical=True they are
    processed by increasing exponent (ties keep their order) and the result is
    mapped back to the original variable positions, pair keys as (min, max).
    """
    n = MultiIndex.coerce(n)
    if n.total < 2:
        raise DomainError(f"decomposition needs total degree >= 2, got {n.total}")
    if n.k == 1:
        return GradDecomposition(n=n.n, p=[Fraction(1)], d={}, trivial=True, canonical=canonical)
    if not canonical:
        return _decompose_ordered(n)

    order = sorted(range(n.k), key=lambda i: n.n[i])
    inner = _decompose_ordered(MultiIndex(tuple(n.n[i] for i in order)))
    p = [Fraction(0)] * n.k
    for position, original in enumerate(order):
        p[original] = inner.p[position]
    d: Dict[Tuple[int, int], Dict[Monomial, Fraction]] = {}
    for (a, b), terms in inner.d.items():
        key = tuple(sorted((order[a], order[b])))
        target = d.setdefault(key, {})
        for powers, coeff in terms.items():
            remapped = [0] * n.k
            for position, original in enumerate(order):
                remapped[original] = powers[position]
            remapped = tuple(remapped)
            target[remapped] = target.get(remapped, Fraction(0)) + coeff
    return GradDecomposition(n=n.n, p=p, d=d, canonical=True)


def _rational(value: Fraction) -> sympy.Rational:
    return sympy.Rational(value.numerator, value.denominator)


def verify_identity(n, dec: GradDecomposition) -> bool:
    """Expand both sides as exact rational polynomials and compare"""
    n = MultiIndex.coerce(n)
    u = sympy.symbols(f'u1:{n.k + 1}')
    lhs = sympy.Integer(1)
    for var, power in zip(u, n.n):
        lhs *= var ** power
    rhs = sympy.Integer(0)
    for var, weight in zip(u, dec.p):
        rhs += _rational(weight) * var ** n.total
    for (i, j), terms in dec.d.items():
        poly = sympy.Integer(0)
        for powers, coeff in terms.items():
            monomial = sympy.Integer(1)
            for var, power in zip(u, powers):
                monomial *= var ** power
            poly += _rational(coeff) * monomial
        rhs += poly * (u[i] - u[j]) ** 2
    return sympy.Poly(lhs - rhs, *u).is_zero


def coefficient_bound_report(n, dec: GradDecomposition, U: float) -> float:
    """
    max_{i<j} sup_{|u| <= U} |d_{i,j}(u)| / (U^(N-2) N^3)

    Coefficients share one sign, so the sup sits at the vertex u = (U, ..., U).
    """
    n = MultiIndex.coerce(n)
    if not (0 < U <= 1):
        raise DomainError(f"U must lie in (0, 1], got {U}")
    if not dec.d:
        return 0.0
    degree = n.total - 2
    worst = max(sum(abs(c) for c in terms.values()) for terms in dec.d.values())
    sup = float(worst) * U ** degree
    return sup / (U ** degree * n.total ** 3)


def simulate_chain(chain: AbsorbingChain, runs: int, seed: int) -> Dict[State, float]:
    """Monte Carlo estimate of the trap probabilities, all runs advanced together"""
    if runs < 1:
        raise InvalidInputError(f"runs must be positive, got {runs}")
    idx = chain.index()
    size = len(chain.states)
    dense = np.zeros((size, size))
    for (a, b), prob in chain.transition.items():
        dense[idx[a], idx[b]] = float(prob)
    cumulative = np.cumsum(dense, axis=1)
    trap_ids = np.array([idx[t] for t in chain.traps])

    rng = np.random.default_rng(seed)
    current = np.full(runs, idx[chain.start])
    alive = ~np.isin(current, trap_ids)
    while alive.any():
        draws = rng.random(alive.sum())
        rows = cumulative[current[alive]]
        current[alive] = np.minimum((draws[:, None] >= rows).sum(axis=1), size - 1)
        alive = ~np.isin(current, trap_ids)
    return {trap: float(np.mean(current == idx[trap])) for trap in chain.traps}


def fraction_text(value: Fraction) -> str:
    """numerator/denominator, the text form of every exact weight"""
    return f"{value.numerator}/{value.denominator}"


def decomposition_to_json(dec: GradDecomposition) -> str:
    """Rationals as "num/den"; variable indices counted from 1"""
    pairs = []
    for (i, j), terms in sorted(dec.d.items()):
        pairs.append({
            'i': i + 1,
            'j': j + 1,
            'terms': [{'powers': list(powers), 'coeff': fraction_text(coeff)}
                      for powers, coeff in sorted(terms.items(), reverse=True)],
        })
    return json.dumps({
        'n': list(dec.n),
        'p': [fraction_text(v) for v in dec.p],
        'd': pairs,
    }, indent=2)

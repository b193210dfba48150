"""
Truncated multivariate power series with float coefficients

Monomials are exponent tuples of fixed length; every product drops terms
whose total degree exceeds the truncation order.
"""

import math
from collections import defaultdict
from typing import Dict, Iterator, Sequence, Tuple

from .errors import DomainError

Monomial = Tuple[int, ...]


class TruncatedSeries:
    """Sparse polynomial in nvars variables, truncated at total degree max_degree"""

    def __init__(self, nvars: int, max_degree: int, terms: Dict[Monomial, float] = None):
        self.nvars = nvars
        self.max_degree = max_degree
        self.terms: Dict[Monomial, float] = {}
        for key, value in (terms or {}).items():
            if sum(key) <= max_degree and value != 0.0:
                self.terms[key] = value

    @classmethod
    def constant(cls, nvars: int, max_degree: int, value: float) -> 'TruncatedSeries':
        return cls(nvars, max_degree, {(0,) * nvars: value})

    @property
    def zero_key(self) -> Monomial:
        return (0,) * self.nvars

    def constant_term(self) -> float:
        return self.terms.get(self.zero_key, 0.0)

    def __len__(self):
        return len(self.terms)

    def __iter__(self) -> Iterator[Tuple[Monomial, float]]:
        return iter(self.terms.items())

    def _by_degree(self) -> Dict[int, list]:
        buckets = defaultdict(list)
        for key, value in self.terms.items():
            buckets[sum(key)].append((key, value))
        return buckets

    def __add__(self, other: 'TruncatedSeries') -> 'TruncatedSeries':
        out = dict(self.terms)
        for key, value in other.terms.items():
            out[key] = out.get(key, 0.0) + value
        return TruncatedSeries(self.nvars, self.max_degree, out)

    def scale(self, factor: float) -> 'TruncatedSeries':
        return TruncatedSeries(self.nvars, self.max_degree, {k: v * factor for k, v in self.terms.items()})

    def __mul__(self, other: 'TruncatedSeries') -> 'TruncatedSeries':
        left, right = self._by_degree(), other._by_degree()
        out: Dict[Monomial, float] = defaultdict(float)
        for deg_a, terms_a in left.items():
            for deg_b, terms_b in right.items():
                if deg_a + deg_b > self.max_degree:
                    continue
                for key_a, value_a in terms_a:
                    for key_b, value_b in terms_b:
                        key = tuple(x + y for x, y in zip(key_a, key_b))
                        out[key] += value_a * value_b
        return TruncatedSeries(self.nvars, self.max_degree, out)

    def log(self) -> 'TruncatedSeries':
        """log of a series with positive constant term: log c0 + sum (-1)^(k+1) (P/c0)^k / k"""
        c0 = self.constant_term()
        if c0 <= 0:
            raise DomainError(f"log needs a positive constant term, got {c0}")
        rest = TruncatedSeries(self.nvars, self.max_degree,
                               {k: v / c0 for k, v in self.terms.items() if k != self.zero_key})
        min_degree = min((sum(k) for k in rest.terms), default=self.max_degree + 1)
        result = TruncatedSeries.constant(self.nvars, self.max_degree, math.log(c0))
        if not rest.terms:
            return result
        power = rest
        k = 1
        while power.terms and k * min_degree <= self.max_degree:
            result = result + power.scale((-1) ** (k + 1) / k)
            power = power * rest
            k += 1
        return result

    def evaluate(self, u: Sequence[float]) -> float:
        total = 0.0
        for key, value in self.terms.items():
            term = value
            for x, power in zip(u, key):
                if power:
                    term *= x ** power
            total += term
        return total

    def partial(self, index: int) -> 'TruncatedSeries':
        """d/du_index, keeping the same truncation order"""
        out = {}
        for key, value in self.terms.items():
            power = key[index]
            if power:
                lowered = key[:index] + (power - 1,) + key[index + 1:]
                out[lowered] = value * power
        return TruncatedSeries(self.nvars, self.max_degree, out)

"""
Polymer gas and cluster expansion of the normalized ring partition function

    Z* = Z / prod_i (e^{h_i} + e^{-h_i}) = E[ prod_i e^{lam s_i s_{i+1}} ]

under the product measure with single-site weights (1 + s*u_i)/2. Expanding
e^{lam s s'} = 1 + (cosh lam - 1) + sinh lam * s s' over ring bonds gives a
gas of polymers: maximal arcs of chosen bonds, each bond labelled S or X.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import DomainError, InvalidInputError, SizeError
from .series import Monomial, TruncatedSeries

logger = logging.getLogger(__name__)

S_PAIR = 'S'
X_PAIR = 'X'


@dataclass(frozen=True)
class Polymer:
    """
    Arc of consecutive ring bonds (start, start+1), ..., with an S/X label per bond

    n_bonds == ell is the full ring; otherwise the arc covers n_bonds + 1 sites.
    """
    ell: int
    start: int
    labels: Tuple[str, ...]

    @property
    def n_bonds(self) -> int:
        return len(self.labels)

    @property
    def full_ring(self) -> bool:
        return self.n_bonds == self.ell

    @property
    def bonds(self) -> List[Tuple[int, int]]:
        return [((self.start + k) % self.ell, (self.start + k + 1) % self.ell) for k in range(self.n_bonds)]

    @property
    def sites(self) -> frozenset:
        if self.full_ring:
            return frozenset(range(self.ell))
        return frozenset((self.start + k) % self.ell for k in range(self.n_bonds + 1))

    @property
    def s_pairs(self) -> List[Tuple[int, int]]:
        return [bond for bond, label in zip(self.bonds, self.labels) if label == S_PAIR]

    @property
    def x_pairs(self) -> List[Tuple[int, int]]:
        return [bond for bond, label in zip(self.bonds, self.labels) if label == X_PAIR]

    @property
    def x_sites(self) -> frozenset:
        """Sites lying in exactly one X-pair"""
        degree: Dict[int, int] = {}
        for a, b in self.x_pairs:
            degree[a] = degree.get(a, 0) + 1
            degree[b] = degree.get(b, 0) + 1
        return frozenset(site for site, count in degree.items() if count % 2 == 1)

    @property
    def size(self) -> int:
        """Number of sites in the support"""
        return len(self.sites)


@dataclass
class KPReport:
    """Kotecky-Preiss check against a single-pair polymer"""
    holds: bool
    lhs_max: float
    rhs: float
    ratio: float
    b: float
    size_convention: str


@dataclass
class CoeffMap:
    """
    Cluster coefficients A_N of log Z*, keyed by full exponent tuples N

    Every rotation of a key is stored; look coefficients up through
    coefficient(), which reduces sites modulo the ring length.
    """
    entries: Dict[Monomial, float]
    max_total_degree: int
    ring_length: int
    lam: float = 0.0

    @property
    def a0(self) -> float:
        return self.entries.get((0,) * self.ring_length, 0.0)

    def coefficient(self, sites: Sequence[int], powers: Optional[Sequence[int]] = None) -> float:
        key = [0] * self.ring_length
        for site, power in zip(sites, powers or [1] * len(sites)):
            key[site % self.ring_length] += power
        return self.entries.get(tuple(key), 0.0)

    def support_diameter(self, key: Monomial) -> int:
        """Bonds in the shortest ring arc containing the support of N"""
        occupied = [i for i, power in enumerate(key) if power]
        if len(occupied) <= 1:
            return 0
        gaps = [occupied[k + 1] - occupied[k] for k in range(len(occupied) - 1)]
        gaps.append(occupied[0] + self.ring_length - occupied[-1])
        return self.ring_length - max(gaps)

    def norm(self, key: Monomial) -> int:
        """max(|N|, diameter of the support)"""
        return max(sum(key), self.support_diameter(key))

    def as_series(self) -> TruncatedSeries:
        return TruncatedSeries(self.ring_length, self.max_total_degree, self.entries)

    def evaluate(self, u: Sequence[float]) -> float:
        return self.as_series().evaluate(u)

    def to_json(self) -> str:
        rows = []
        for key, value in sorted(self.entries.items(), key=lambda kv: (sum(kv[0]), kv[0])):
            sites = [i for i, power in enumerate(key) if power]
            rows.append({'sites': sites, 'powers': [key[i] for i in sites], 'value': value})
        return json.dumps({
            'lambda': self.lam,
            'ring_length': self.ring_length,
            'max_total_degree': self.max_total_degree,
            'entries': rows,
        }, indent=2)


def _check_lambda(lam: float):
    if not math.isfinite(lam):
        raise InvalidInputError(f"lambda must be finite, got {lam}")
    if lam < 0:
        raise DomainError(f"lambda must be non-negative, got {lam}")


def _check_tanh_fields(u: Sequence[float]) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1)
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("tanh fields must be finite")
    if np.any(np.abs(u) >= 1.0):
        raise DomainError("tanh fields must satisfy |u_i| < 1")
    return u


def _spin_table(ell: int) -> np.ndarray:
    """All 2^ell configurations, site k spin = 1 - 2 * bit k of the row index"""
    index = np.arange(2 ** ell)
    bits = (index[:, None] >> np.arange(ell)[None, :]) & 1
    return 1.0 - 2.0 * bits


def _bond_energy(spins: np.ndarray) -> np.ndarray:
    return np.sum(spins * np.roll(spins, -1, axis=1), axis=1)


def z_star_enumerate(lam: float, u: Sequence[float], config: SolverConfig = DEFAULT_CONFIG) -> float:
    """Normalized ring partition function by direct sum over 2^ell spin configurations"""
    _check_lambda(lam)
    u = _check_tanh_fields(u)
    ell = u.size
    if ell < 2:
        raise DomainError(f"a ring needs at least 2 sites, got {ell}")
    if ell > config.max_enumeration_ring:
        raise SizeError(f"direct enumeration limited to ell <= {config.max_enumeration_ring}, got {ell}")
    spins = _spin_table(ell)
    site_weights = np.prod(0.5 * (1.0 + spins * u[None, :]), axis=1)
    return float(np.sum(site_weights * np.exp(lam * _bond_energy(spins))))


def enumerate_polymers(ell: int) -> List[Polymer]:
    """Every polymer on the ell-ring: arcs of 1..ell-1 bonds from each start, then the full ring"""
    if ell < 3:
        raise DomainError(f"polymer rings need ell >= 3, got {ell}")
    polymers = []
    for n_bonds in range(1, ell):
        for start in range(ell):
            for labels in product((S_PAIR, X_PAIR), repeat=n_bonds):
                polymers.append(Polymer(ell=ell, start=start, labels=labels))
    for labels in product((S_PAIR, X_PAIR), repeat=ell):
        polymers.append(Polymer(ell=ell, start=0, labels=labels))
    return polymers


def polymer_weight(polymer: Polymer, lam: float, u: Optional[Sequence[float]] = None) -> float:
    """
    w = sinh(lam)^|X-pairs| * (cosh(lam) - 1)^|S-pairs| * prod_{x in X} u_x

    With u omitted every u_x is 1 (the weight w_1). The full ring labelled
    all-X has no singly covered site and weighs sinh(lam)^ell.
    """
    weight = math.sinh(lam) ** len(polymer.x_pairs) * (math.cosh(lam) - 1.0) ** len(polymer.s_pairs)
    if u is not None:
        for site in polymer.x_sites:
            weight *= u[site]
    return weight


def _arc_weight(sinh_l: float, cosh_m1: float, u_arc: Sequence[float]) -> float:
    """
    Sum of polymer weights over all labellings of an open arc

    u_arc lists the tanh fields of the n_bonds + 1 covered sites. The
    recursion carries whether the previous bond was X, which fixes the parity
    at the shared site.
    """
    n_bonds = len(u_arc) - 1
    # after the first bond: state 0 = last bond S, state 1 = last bond X
    acc = [cosh_m1, sinh_l * u_arc[0]]
    for k in range(1, n_bonds):
        site_u = u_arc[k]
        acc = [
            acc[0] * cosh_m1 + acc[1] * site_u * cosh_m1,
            acc[0] * site_u * sinh_l + acc[1] * sinh_l,
        ]
    return acc[0] + acc[1] * u_arc[n_bonds]


def _ring_weight(sinh_l: float, cosh_m1: float, u: Sequence[float]) -> float:
    """Sum of polymer weights over all labellings of the full ring"""
    ell = len(u)
    total = 0.0
    for first in (0, 1):
        acc = [cosh_m1, 0.0] if first == 0 else [0.0, sinh_l]
        for k in range(1, ell):
            site_u = u[k]
            acc = [
                acc[0] * cosh_m1 + acc[1] * site_u * cosh_m1,
                acc[0] * site_u * sinh_l + acc[1] * sinh_l,
            ]
        # close the ring at site 0
        total += acc[first] + acc[1 - first] * u[0]
    return total


def support_weights(lam: float, u: Sequence[float]) -> Dict[int, float]:
    """Aggregate polymer weight per support, keyed by the bitmask of covered sites"""
    ell = len(u)
    sinh_l, cosh_m1 = math.sinh(lam), math.cosh(lam) - 1.0
    weights: Dict[int, float] = {}
    for n_bonds in range(1, ell):
        for start in range(ell):
            sites = [(start + k) % ell for k in range(n_bonds + 1)]
            mask = 0
            for site in sites:
                mask |= 1 << site
            weights[mask] = weights.get(mask, 0.0) + _arc_weight(sinh_l, cosh_m1, [u[s] for s in sites])
    full = (1 << ell) - 1
    weights[full] = weights.get(full, 0.0) + _ring_weight(sinh_l, cosh_m1, u)
    return weights


def z_star_polymer(lam: float, u: Sequence[float], config: SolverConfig = DEFAULT_CONFIG) -> float:
    """
    Polymer-gas partition function: sum over site-disjoint polymer collections

    Recursion on the set of free sites: the lowest free site is either left
    uncovered or covered by one polymer whose support lies in the free set.
    """
    _check_lambda(lam)
    u = _check_tanh_fields(u)
    ell = u.size
    if ell < 3:
        raise DomainError(f"polymer rings need ell >= 3, got {ell}")
    if ell > config.max_polymer_ring:
        raise SizeError(f"polymer enumeration limited to ell <= {config.max_polymer_ring}, got {ell}")

    weights = support_weights(lam, u.tolist())
    by_site: List[List[Tuple[int, float]]] = [[] for _ in range(ell)]
    for mask, weight in weights.items():
        lowest = (mask & -mask).bit_length() - 1
        by_site[lowest].append((mask, weight))

    @lru_cache(maxsize=None)
    def gas(free: int) -> float:
        if free == 0:
            return 1.0
        lowest_bit = free & -free
        lowest = lowest_bit.bit_length() - 1
        total = gas(free & ~lowest_bit)
        # polymers whose lowest site is not `lowest` would cover a site below it, already removed
        for mask, weight in by_site[lowest]:
            if mask & free == mask:
                total += weight * gas(free & ~mask)
        return total

    return gas((1 << ell) - 1)


def default_b(lam: float) -> float:
    """Decay rate b with e^b = lam^(-5/12)"""
    if lam <= 0:
        return math.inf
    return (5.0 / 12.0) * math.log(1.0 / lam)


def kp_check(lam: float, b: Optional[float] = None, size_convention: str = 'bonds') -> KPReport:
    """
    Kotecky-Preiss sum over polymers incompatible with a single-pair polymer

    With u = 1 the labellings of an arc of L bonds sum to (e^lam - 1)^L, and
    L + 2 arcs of L bonds touch a fixed pair on the line. Writing
    q = e^{1+b}(e^lam - 1):

        bonds: sum_L (L+2) q^L            against 2
        sites: e^{1+b} sum_L (L+2) q^L    against 2

    The right side is the site count of the pair polymer in both conventions,
    so the 'bonds' check weighs polymers by bonds on the left and by sites on
    the right. That mixed bound is the one the threshold of max_lambda_kp is
    quoted for; 'sites' is the uniform convention. q >= 1 makes the series
    diverge.
    """
    _check_lambda(lam)
    if size_convention not in ('bonds', 'sites'):
        raise DomainError(f"size_convention must be 'bonds' or 'sites', got '{size_convention}'")
    if b is None:
        b = default_b(lam)
    if b < 0:
        raise DomainError(f"b must be non-negative, got {b}")
    rhs = 2.0

    if lam == 0:
        return KPReport(holds=True, lhs_max=0.0, rhs=rhs, ratio=0.0, b=b, size_convention=size_convention)

    ratio = math.exp(1.0 + b) * math.expm1(lam)
    if ratio >= 1.0:
        logger.debug(f"  → K-P series diverges at lam={lam}: ratio {ratio:.4f}")
        return KPReport(holds=False, lhs_max=math.inf, rhs=rhs, ratio=ratio, b=b, size_convention=size_convention)

    lhs = ratio / (1.0 - ratio) ** 2 + 2.0 * ratio / (1.0 - ratio)
    if size_convention == 'sites':
        lhs *= math.exp(1.0 + b)
    return KPReport(holds=lhs <= rhs, lhs_max=lhs, rhs=rhs, ratio=ratio, b=b, size_convention=size_convention)


def max_lambda_kp(size_convention: str = 'bonds', config: SolverConfig = DEFAULT_CONFIG) -> float:
    """Largest lam at which kp_check holds with e^b = lam^(-5/12)"""
    def margin(lam: float) -> float:
        report = kp_check(lam, size_convention=size_convention)
        return report.rhs - report.lhs_max if math.isfinite(report.lhs_max) else -report.rhs

    lo, hi = 1e-12, 1.0
    while margin(hi) >= 0:
        lo, hi = hi, 2.0 * hi
    xtol = config.kp_root_tolerance * 1e-3
    root = brentq(margin, lo, hi, xtol=xtol)
    # brentq may land just past the boundary
    while margin(root) < 0:
        root -= xtol
    logger.debug(f"  → K-P threshold ({size_convention}) at {root:.9g}, bracket [{lo:.3g}, {hi:.3g}]")
    return root


def _walsh_hadamard(values: np.ndarray, ell: int) -> np.ndarray:
    """sum_x (-1)^{popcount(x & S)} values[x] for every subset mask S"""
    arr = values.reshape((2,) * ell)
    for axis in range(ell):
        first, second = np.take(arr, 0, axis=axis), np.take(arr, 1, axis=axis)
        arr = np.stack((first + second, first - second), axis=axis)
    return arr.reshape(-1)


def multiaffine_coefficients(lam: float, ell: int) -> np.ndarray:
    """Coefficients c_S of Z* = sum_S c_S prod_{i in S} u_i, indexed by subset bitmask"""
    spins = _spin_table(ell)
    boltzmann = np.exp(lam * _bond_energy(spins))
    return _walsh_hadamard(boltzmann, ell) / 2.0 ** ell


def cluster_coefficients(lam: float, ell: int, max_degree: int,
                         config: SolverConfig = DEFAULT_CONFIG) -> CoeffMap:
    """
    Coefficients of log Z* as a power series in u, truncated at total degree max_degree

    Z* is multi-affine in u; its coefficients come from a Walsh-Hadamard
    transform of the Boltzmann weights. Z* is even in u, so odd subsets carry
    only rounding noise and are dropped.
    """
    _check_lambda(lam)
    if ell < 3:
        raise DomainError(f"polymer rings need ell >= 3, got {ell}")
    if ell > config.max_series_ring:
        raise SizeError(f"cluster series limited to ell <= {config.max_series_ring}, got {ell}")
    if max_degree < 0 or max_degree > config.max_series_degree:
        raise SizeError(f"truncation order limited to [0, {config.max_series_degree}], got {max_degree}")

    coeffs = multiaffine_coefficients(lam, ell)
    scale = abs(coeffs[0])
    terms: Dict[Monomial, float] = {}
    worst_odd = 0.0
    for mask, value in enumerate(coeffs):
        key = tuple((mask >> i) & 1 for i in range(ell))
        if sum(key) % 2:
            worst_odd = max(worst_odd, abs(value))
            continue
        if sum(key) <= max_degree:
            terms[key] = float(value)
    if worst_odd > 1e-12 * scale:
        logger.warning(f"Odd multi-affine coefficients reached {worst_odd:.3e}, expected rounding noise")

    log_series = TruncatedSeries(ell, max_degree, terms).log()
    logger.debug(f"  → cluster_coefficients(lam={lam}, ell={ell}, degree={max_degree}): {len(log_series)} terms")
    return CoeffMap(entries=dict(log_series.terms), max_total_degree=max_degree, ring_length=ell, lam=lam)


@dataclass
class DecayRow:
    M: int
    total: float
    bound: float

    @property
    def within(self) -> bool:
        return self.total <= self.bound


def coefficient_decay_report(coeffs: CoeffMap, b: float, site: int = 0) -> List[DecayRow]:
    """
    For M = 2..max_degree: sum of |A_N| over N touching `site` with norm >= M, against e^{-bM}

    M = 1 is skipped: every non-constant coefficient has |N| >= 2, so its
    row repeats the M = 2 row.
    """
    rows = []
    touching = [(coeffs.norm(key), abs(value)) for key, value in coeffs.entries.items() if key[site] > 0]
    for M in range(2, coeffs.max_total_degree + 1):
        total = math.fsum(value for norm, value in touching if norm >= M)
        rows.append(DecayRow(M=M, total=total, bound=math.exp(-b * M)))
    return rows


def long_range_decay(coeffs: CoeffMap, lam: Optional[float] = None) -> Dict[str, object]:
    """
    Pair coefficients alpha_d (of u_0 u_d) and the fitted c in |alpha_d| <= c (lam e)^d

    Returns {'alpha': {d: alpha_d}, 'c': fitted constant}.
    """
    lam = coeffs.lam if lam is None else lam
    alpha = {d: coeffs.coefficient([0, d]) for d in range(1, coeffs.ring_length // 2 + 1)}
    if lam <= 0:
        return {'alpha': alpha, 'c': 0.0}
    base = lam * math.e
    fitted = max(abs(value) / base ** d for d, value in alpha.items())
    return {'alpha': alpha, 'c': fitted}

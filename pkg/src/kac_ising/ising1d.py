"""
Exact thermodynamics of the vertical reference system

The reference system is what remains of the layered model once the Kac
interaction is removed: independent vertical Ising chains with nearest
neighbor coupling lambda, temperature fixed to 1. Everything here is exact:
finite rings through products of 2x2 transfer matrices, infinite chains
through the largest eigenvalue, and the canonical free energy by Legendre
transform of the pressure.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import DomainError, InvalidInputError

logger = logging.getLogger(__name__)

# Spin values in transfer-matrix index order
SPINS = np.array([1.0, -1.0])
SIGMA_Z = np.diag(SPINS)

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class Coupling:
    """Vertical nearest-neighbor coupling strength lambda >= 0"""
    lam: float

    def __post_init__(self):
        if not math.isfinite(self.lam):
            raise InvalidInputError(f"coupling must be finite, got {self.lam}")
        if self.lam < 0:
            raise DomainError(f"coupling must be non-negative, got {self.lam}")


@dataclass
class FieldVector:
    """Per-layer magnetic fields h_1..h_ell on a ring"""
    h: np.ndarray

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.h)):
            raise InvalidInputError("field entries must be finite")
        if self.h.size < 2:
            raise DomainError(f"a ring needs at least 2 sites, got {self.h.size}")

    @classmethod
    def from_tanh(cls, u: ArrayLike) -> 'FieldVector':
        """Build fields from the tanh coordinates u_i = tanh(h_i)"""
        u = np.asarray(u, dtype=float).reshape(-1)
        if not np.all(np.isfinite(u)):
            raise InvalidInputError("tanh coordinates must be finite")
        if np.any(np.abs(u) >= 1.0):
            raise DomainError("tanh coordinates must satisfy |u_i| < 1")
        return cls(np.arctanh(u))

    @classmethod
    def homogeneous(cls, h: float, ell: int) -> 'FieldVector':
        return cls(np.full(int(ell), float(h)))

    @property
    def ell(self) -> int:
        return int(self.h.size)

    @property
    def u(self) -> np.ndarray:
        return np.tanh(self.h)


@dataclass
class RingPartition:
    """Log partition function of the ring with its exact first derivatives"""
    log_z: float
    magnetizations: np.ndarray
    correlations_nn: np.ndarray = field(repr=False)


def _coerce_fields(fields: Union[FieldVector, ArrayLike]) -> FieldVector:
    return fields if isinstance(fields, FieldVector) else FieldVector(fields)


def _scaled_site_matrices(lam: float, h: np.ndarray) -> Tuple[np.ndarray, float]:
    """Site matrices exp(lam*s*s' + h_i*s) divided by their largest entry"""
    exponents = lam * np.outer(SPINS, SPINS)[None, :, :] + h[:, None, None] * SPINS[None, :, None]
    shifts = lam + np.abs(h)
    mats = np.exp(exponents - shifts[:, None, None])
    return mats, float(np.sum(shifts))


def _cyclic_products(mats: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Normalized products T_i T_{i+1} ... T_{i+d-1} for every start i and length d

    Returns (products, logs) with products[i, d] of unit max entry and
    logs[i, d] the log of the factored-out scale.
    """
    ell = mats.shape[0]
    products = np.empty((ell, ell + 1, 2, 2))
    logs = np.zeros((ell, ell + 1))
    products[:, 0] = np.eye(2)
    starts = np.arange(ell)
    for d in range(1, ell + 1):
        step = products[:, d - 1] @ mats[(starts + d - 1) % ell]
        scale = step.max(axis=(1, 2))
        products[:, d] = step / scale[:, None, None]
        logs[:, d] = logs[:, d - 1] + np.log(scale)
    return products, logs


def ring_log_z(coupling: Coupling, fields: Union[FieldVector, ArrayLike]) -> RingPartition:
    """
    Exact log partition function of the periodic chain in site-dependent fields

    Z = Tr(T_1 ... T_ell) with T_i[s, s'] = exp(lam*s*s' + h_i*s). Prefix and
    suffix products are kept normalized so that long rings do not overflow;
    magnetizations and bond correlations come from matrix ratios, not from
    finite differences.
    """
    fields = _coerce_fields(fields)
    h, ell = fields.h, fields.ell
    mats, base = _scaled_site_matrices(coupling.lam, h)

    prefix = np.empty((ell + 1, 2, 2))
    prefix_log = np.zeros(ell + 1)
    prefix[0] = np.eye(2)
    for k in range(ell):
        step = prefix[k] @ mats[k]
        scale = step.max()
        prefix[k + 1] = step / scale
        prefix_log[k + 1] = prefix_log[k] + math.log(scale)

    suffix = np.empty((ell + 1, 2, 2))
    suffix[ell] = np.eye(2)
    for k in range(ell - 1, -1, -1):
        step = mats[k] @ suffix[k + 1]
        suffix[k] = step / step.max()

    log_z = math.log(np.trace(prefix[ell])) + prefix_log[ell] + base

    # rest[i] = T_{i+1} ... T_ell T_1 ... T_{i-1}, up to a positive scale
    rest = suffix[1:] @ prefix[:ell]
    weighted = mats @ rest
    norm = np.trace(weighted, axis1=1, axis2=2)
    magnetizations = np.trace(SIGMA_Z @ weighted, axis1=1, axis2=2) / norm
    correlations = np.trace(SIGMA_Z @ mats @ SIGMA_Z @ rest, axis1=1, axis2=2) / norm

    return RingPartition(
        log_z=float(log_z),
        magnetizations=magnetizations,
        correlations_nn=correlations,
    )


def ring_susceptibility(coupling: Coupling, fields: Union[FieldVector, ArrayLike]) -> np.ndarray:
    """
    Exact ell x ell matrix chi_ij = dm_i/dh_j = <s_i s_j> - m_i m_j

    Symmetric and positive semi-definite; chi_ii = 1 - m_i^2.
    """
    fields = _coerce_fields(fields)
    ell = fields.ell
    mats, _ = _scaled_site_matrices(coupling.lam, fields.h)
    products, _ = _cyclic_products(mats)

    full = products[:, ell]
    norm = np.trace(full, axis1=1, axis2=2)
    m = np.trace(SIGMA_Z @ full, axis1=1, axis2=2) / norm

    two_point = np.eye(ell)
    for i in range(ell):
        for d in range(1, ell):
            j = (i + d) % ell
            head = products[i, d]
            tail = products[j, ell - d]
            num = np.trace(SIGMA_Z @ head @ SIGMA_Z @ tail)
            den = np.trace(head @ tail)
            two_point[i, j] = num / den
    chi = two_point - np.outer(m, m)
    return 0.5 * (chi + chi.T)


class ReferenceSystem(ABC):
    """Translation-invariant vertical reference system seen through its pressure"""

    name = 'reference'

    def __init__(self, coupling: Coupling):
        self.coupling = coupling

    @property
    def lam(self) -> float:
        return self.coupling.lam

    @abstractmethod
    def pressure(self, h: ArrayLike) -> np.ndarray:
        """Pressure per site p(h)"""

    @abstractmethod
    def magnetization(self, h: ArrayLike) -> np.ndarray:
        """dp/dh"""

    @abstractmethod
    def susceptibility(self, h: ArrayLike) -> np.ndarray:
        """d^2p/dh^2"""

    def field_bound(self) -> float:
        """Bound on |f'(m) - atanh(m)|, used to bracket the Legendre inversion"""
        return 2.0 * self.lam + 1.0

    def __repr__(self):
        return f"{self.__class__.__name__}(lam={self.lam})"


class ChainReference(ReferenceSystem):
    """Infinite nearest-neighbor chain, from the largest transfer-matrix eigenvalue"""

    name = 'chain'

    def pressure(self, h: ArrayLike) -> np.ndarray:
        h = np.abs(np.asarray(h, dtype=float))
        a = math.exp(-4.0 * self.lam)
        q = np.exp(-2.0 * h)
        # log(cosh h + sqrt(sinh^2 h + a)) with e^{|h|} factored out
        inner = 0.5 * (1.0 + q) + np.sqrt((0.5 * (1.0 - q)) ** 2 + a * q)
        return self.lam + h + np.log(inner)

    def magnetization(self, h: ArrayLike) -> np.ndarray:
        t = np.tanh(np.asarray(h, dtype=float))
        a = math.exp(-4.0 * self.lam)
        return t / np.sqrt(t * t + a * (1.0 - t * t))

    def susceptibility(self, h: ArrayLike) -> np.ndarray:
        t = np.tanh(np.asarray(h, dtype=float))
        a = math.exp(-4.0 * self.lam)
        sech2 = 1.0 - t * t
        return a * sech2 / (t * t + a * sech2) ** 1.5


class DimerReference(ReferenceSystem):
    """Independent vertical pairs: every other bond of the chain removed"""

    name = 'dimer'

    def field_bound(self) -> float:
        return self.lam + 1.0

    @staticmethod
    def _sech2h(h: np.ndarray) -> np.ndarray:
        q = np.exp(-2.0 * np.abs(2.0 * h))
        return 2.0 * np.sqrt(q) / (1.0 + q)

    def pressure(self, h: ArrayLike) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        x = np.abs(2.0 * h)
        log_cosh = x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0)
        return 0.5 * (math.log(2.0) + np.logaddexp(self.lam + log_cosh, -self.lam))

    def magnetization(self, h: ArrayLike) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        e_plus, e_minus = math.exp(self.lam), math.exp(-self.lam)
        return e_plus * np.tanh(2.0 * h) / (e_plus + e_minus * self._sech2h(h))

    def susceptibility(self, h: ArrayLike) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        e_plus, e_minus = math.exp(self.lam), math.exp(-self.lam)
        sech = self._sech2h(h)
        return 2.0 * e_plus * (e_plus * sech * sech + e_minus * sech) / (e_plus + e_minus * sech) ** 2


REFERENCE_SYSTEMS = {
    ChainReference.name: ChainReference,
    DimerReference.name: DimerReference,
}


def make_reference(coupling: Coupling, reference: Union[str, ReferenceSystem] = 'chain') -> ReferenceSystem:
    """Resolve a reference-system name into an instance"""
    if isinstance(reference, ReferenceSystem):
        return reference
    try:
        return REFERENCE_SYSTEMS[reference](coupling)
    except KeyError:
        raise DomainError(f"Unknown reference system '{reference}', expected one of {sorted(REFERENCE_SYSTEMS)}")


def _check_magnetization(m: np.ndarray):
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("magnetization must be finite")
    if np.any(np.abs(m) >= 1.0):
        raise DomainError("magnetization must satisfy |m| < 1")


def field_of_magnetization(reference: ReferenceSystem, m: ArrayLike,
                           config: SolverConfig = DEFAULT_CONFIG) -> np.ndarray:
    """
    Vectorized inverse of h -> p'(h)

    Bisection on the bracket atanh(m) -/+ field_bound, then Newton polish.
    The target is strictly increasing in h so the bracket always holds.
    """
    m = np.asarray(m, dtype=float)
    _check_magnetization(m)

    center = np.arctanh(m)
    width = reference.field_bound()
    lo, hi = center - width, center + width

    for _ in range(config.inversion_bisection_steps):
        mid = 0.5 * (lo + hi)
        below = reference.magnetization(mid) < m
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)

    h = 0.5 * (lo + hi)
    for _ in range(config.inversion_newton_steps):
        residual = reference.magnetization(h) - m
        chi = reference.susceptibility(h)
        safe = chi > 0
        h = np.where(safe, h - residual / np.where(safe, chi, 1.0), h)

    residual = np.max(np.abs(reference.magnetization(h) - m), initial=0.0)
    if residual > config.inversion_tolerance:
        logger.debug(f"  → Legendre inversion residual {residual:.2e} near |m| = {np.max(np.abs(m)):.6f}")
    return h


def pressure(coupling: Coupling, h: float) -> float:
    """Thermodynamic-limit pressure of the chain, log of the largest eigenvalue"""
    return float(ChainReference(coupling).pressure(h))


def magnetization_of_field(coupling: Coupling, h: float) -> float:
    """dp/dh from the eigenvalue formula"""
    return float(ChainReference(coupling).magnetization(h))


def free_energy_derivative(coupling: Coupling, m: float, reference: Union[str, ReferenceSystem] = 'chain',
                           config: SolverConfig = DEFAULT_CONFIG) -> float:
    """f'(m): the unique field whose equilibrium magnetization is m"""
    ref = make_reference(coupling, reference)
    return float(field_of_magnetization(ref, np.asarray([m]), config)[0])


def free_energy_canonical(coupling: Coupling, m: float, reference: Union[str, ReferenceSystem] = 'chain',
                          config: SolverConfig = DEFAULT_CONFIG) -> float:
    """Free energy density at fixed magnetization, f(m) = sup_h {h m - p(h)}"""
    ref = make_reference(coupling, reference)
    h = field_of_magnetization(ref, np.asarray([m]), config)[0]
    return float(h * m - ref.pressure(h))


def free_energy_curve(reference: ReferenceSystem, m: ArrayLike,
                      config: SolverConfig = DEFAULT_CONFIG) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized (f(m), f'(m)) on a grid of magnetizations"""
    m = np.asarray(m, dtype=float)
    h = field_of_magnetization(reference, m, config)
    return h * m - reference.pressure(h), h


def entropy(m: ArrayLike) -> np.ndarray:
    """Entropy S(m) of a free Ising spin with mean m; S(+-1) = 0"""
    m = np.asarray(m, dtype=float)
    if np.any(np.abs(m) > 1.0):
        raise DomainError("entropy is defined for |m| <= 1")
    plus, minus = 0.5 * (1.0 + m), 0.5 * (1.0 - m)
    with np.errstate(divide='ignore', invalid='ignore'):
        terms = np.where(plus > 0, plus * np.log(plus), 0.0) + np.where(minus > 0, minus * np.log(minus), 0.0)
    return -terms


def entropy_series(m: ArrayLike, order: int = 40) -> np.ndarray:
    """Even Taylor series of -S(m) = -log 2 + sum_k m^(2k+2) / ((2k+1)(2k+2))"""
    m = np.asarray(m, dtype=float)
    total = np.full_like(m, -math.log(2.0))
    for k in range(order):
        total = total + m ** (2 * k + 2) / ((2 * k + 1) * (2 * k + 2))
    return total

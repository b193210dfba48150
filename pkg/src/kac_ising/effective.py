"""
Effective Hamiltonian of a coarse-grained block and the equivalence of ensembles

A block has ell layers; layer i carries magnetization m_i, and the
vertical reference system sees auxiliary fields h_i = atanh(u_i). The
effective Hamiltonian, as a function of the tanh coordinates u, is

    H(u) = -sum_i [m_i^2/2 - h_i m_i + h_ext m_i] - log Z_{ell,h} + A_0

with m_i the exact ring magnetizations in the fields h. Its minimizers are
homogeneous in the small-coupling regime, and its minimum per site
reproduces the Lebowitz-Penrose pressure.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import ConvergenceError, DomainError, InvalidInputError, SizeError
from .ising1d import Coupling, ring_log_z, ring_susceptibility
from .phase import magnetization_cap, threshold_h_star
from .polymer import CoeffMap, cluster_coefficients

logger = logging.getLogger(__name__)


@dataclass
class UVector:
    """Tanh coordinates u with their fields, from the u <-> m inversion"""
    u: np.ndarray
    h: np.ndarray
    residual: float = 0.0
    iterations: int = 0
    contraction: float = 0.0

    @property
    def ring_length(self) -> int:
        return int(self.u.size)


@dataclass
class EffEnergy:
    value: float
    gradient: np.ndarray
    magnetizations: np.ndarray = field(repr=False)


@dataclass
class EffMinimum:
    """Outcome of the multistart minimization of H"""
    argmin: np.ndarray
    value: float
    spread: float
    per_site: float
    minima: List[Tuple[float, np.ndarray]] = field(default_factory=list, repr=False)
    global_minima: List[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def max_global_spread(self) -> float:
        return max(float(np.ptp(u)) for u in self.global_minima)


@dataclass
class EnsembleGap:
    """Grand-canonical minus multi-canonical pressure of an ell x ell box"""
    ell: int
    gap: float
    phi: float
    grand: float
    h: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class FieldBox:
    """Search box: |m_i| <= m_plus, |h_i| <= h_plus, |u_i| <= u_plus"""
    m_plus: float
    h_plus: float
    u_plus: float


def field_box(coupling: Coupling, config: SolverConfig = DEFAULT_CONFIG) -> FieldBox:
    m_plus = magnetization_cap(threshold_h_star(), config)
    h_plus = math.atanh(m_plus) + 2.0 * coupling.lam
    return FieldBox(m_plus=m_plus, h_plus=h_plus, u_plus=math.tanh(h_plus))


def _check_u(u) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1)
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("u must be finite")
    if np.any(np.abs(u) >= 1.0):
        raise DomainError("u must satisfy |u_i| < 1")
    if u.size < 2:
        raise DomainError(f"a ring needs at least 2 layers, got {u.size}")
    return u


def forward_magnetization(coupling: Coupling, u) -> np.ndarray:
    """Exact layer magnetizations of the ring in the fields atanh(u)"""
    u = _check_u(u)
    return ring_log_z(coupling, np.arctanh(u)).magnetizations


def contraction_norm(coupling: Coupling, u) -> float:
    """Row-sum norm of d(m - u)/du = chi diag(1/(1-u^2)) - I"""
    u = _check_u(u)
    chi = ring_susceptibility(coupling, np.arctanh(u))
    jacobian = chi / (1.0 - u * u)[None, :] - np.eye(u.size)
    return float(np.max(np.sum(np.abs(jacobian), axis=1)))


def u_from_m(coupling: Coupling, m: Sequence[float], m_plus: Optional[float] = None,
             check_contraction: bool = True, config: SolverConfig = DEFAULT_CONFIG) -> UVector:
    """
    Unique tanh fields u whose ring magnetizations equal m

    Damped Newton in h started from u = m, the Jacobian being the exact
    susceptibility matrix; a step is halved until the sup residual drops.

    Raises:
        DomainError: some |m_i| exceeds m_plus, or the contraction certificate fails
        ConvergenceError: no convergence within config.inversion_max_iterations
    """
    m = np.asarray(m, dtype=float).reshape(-1)
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("m must be finite")
    if m_plus is None:
        m_plus = field_box(coupling, config).m_plus
    if np.any(np.abs(m) > m_plus):
        raise DomainError(f"layer magnetizations must satisfy |m_i| <= {m_plus:.9f}")

    h = np.arctanh(m)
    current = ring_log_z(coupling, h).magnetizations
    residual = float(np.max(np.abs(current - m)))
    iterations = 0
    while residual > config.inversion_residual:
        if iterations >= config.inversion_max_iterations:
            raise ConvergenceError(
                f"u_from_m did not converge in {iterations} iterations (residual {residual:.3e})",
                iterations=iterations, residual=residual)
        iterations += 1
        chi = ring_susceptibility(coupling, h)
        step = np.linalg.solve(chi, m - current)
        scale = 1.0
        for _ in range(60):
            trial = h + scale * step
            trial_m = ring_log_z(coupling, trial).magnetizations
            trial_residual = float(np.max(np.abs(trial_m - m)))
            if trial_residual < residual:
                break
            scale *= 0.5
        else:
            # no decrease available at double precision
            logger.debug(f"  → u_from_m stalled at residual {residual:.3e}")
            break
        h, current, residual = trial, trial_m, trial_residual

    if residual > config.inversion_residual and residual > 1e-10:
        raise ConvergenceError(f"u_from_m stalled at residual {residual:.3e}",
                               iterations=iterations, residual=residual)

    u = np.tanh(h)
    norm = contraction_norm(coupling, u)
    logger.debug(f"  → u_from_m: {iterations} Newton steps, residual {residual:.2e}, contraction {norm:.4f}")
    if check_contraction and norm >= 1.0:
        raise DomainError(f"contraction norm {norm:.4f} >= 1: coupling {coupling.lam} outside the inversion regime")
    return UVector(u=u, h=h, residual=residual, iterations=iterations, contraction=norm)


@lru_cache(maxsize=256)
def a0_constant(lam: float, ell: int, config: SolverConfig = DEFAULT_CONFIG) -> float:
    """Constant term of log Z*: log(cosh^ell lam + sinh^ell lam)"""
    if 3 <= ell <= config.max_series_ring:
        return cluster_coefficients(lam, ell, 0, config).a0
    c, t = math.cosh(lam), math.tanh(lam)
    return ell * math.log(c) + math.log1p(t ** ell)


def eff_energy(coupling: Coupling, h_ext: float, u, include_a0: bool = True,
               config: SolverConfig = DEFAULT_CONFIG) -> EffEnergy:
    """
    H(u) and its exact gradient

    With chi the ring susceptibility, dH/dh = -chi (m - h + h_ext), and
    dH/du_j = dH/dh_j / (1 - u_j^2).
    """
    u = _check_u(u)
    h = np.arctanh(u)
    ring = ring_log_z(coupling, h)
    m = ring.magnetizations
    value = -float(np.sum(0.5 * m * m - h * m + h_ext * m)) - ring.log_z
    if include_a0:
        value += a0_constant(coupling.lam, u.size, config)
    chi = ring_susceptibility(coupling, h)
    grad_h = -chi @ (m - h + h_ext)
    return EffEnergy(value=value, gradient=grad_h / (1.0 - u * u), magnetizations=m)


def homogeneous_minimum(coupling: Coupling, h_ext: float, ell: int, include_a0: bool = True,
                        config: SolverConfig = DEFAULT_CONFIG) -> Tuple[float, float]:
    """Minimum of H over homogeneous u, as (u*, H/ell)"""
    u_plus = field_box(coupling, config).u_plus

    def per_site(x: float) -> float:
        return eff_energy(coupling, h_ext, np.full(ell, x), include_a0, config).value / ell

    grid = np.linspace(-u_plus, u_plus, 401)
    values = np.array([per_site(x) for x in grid])
    best = int(np.argmin(values))
    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)]
    result = minimize_scalar(per_site, bounds=(lo, hi), method='bounded', options={'xatol': 1e-12})
    if result.fun <= values[best]:
        return float(result.x), float(result.fun)
    return float(grid[best]), float(values[best])


def _stationarity_polish(coupling: Coupling, h_ext: float, h: np.ndarray, h_plus: float,
                         config: SolverConfig) -> np.ndarray:
    """Newton on m(h) - h + h_ext = 0 with Jacobian chi - I"""
    for _ in range(config.stationarity_newton_steps):
        m = ring_log_z(coupling, h).magnetizations
        residual = m - h + h_ext
        if np.max(np.abs(residual)) < 1e-14:
            break
        jacobian = ring_susceptibility(coupling, h) - np.eye(h.size)
        try:
            h = h - np.linalg.solve(jacobian, residual)
        except np.linalg.LinAlgError:
            break
        if np.any(np.abs(h) > h_plus):
            break
    return h


def minimize_eff(coupling: Coupling, h_ext: float, ell: int, restarts: Optional[int] = None,
                 include_a0: bool = True, seed: int = 0, config: SolverConfig = DEFAULT_CONFIG) -> EffMinimum:
    """
    Multistart L-BFGS-B minimization of H over the box |u_i| <= u_plus

    Half of the starts are homogeneous, symmetric about 0 and excluding it;
    the rest perturb a homogeneous start by uniform noise. Every local
    minimum is polished on the stationarity equation and duplicates within
    config.distinct_minimum_tolerance are merged.
    """
    if ell < 3:
        raise DomainError(f"ell must be at least 3, got {ell}")
    restarts = config.multistart_restarts if restarts is None else restarts
    if restarts < 2:
        raise InvalidInputError(f"restarts must be at least 2, got {restarts}")
    box = field_box(coupling, config)
    u_plus = box.u_plus
    rng = np.random.default_rng(seed)

    half = max(1, restarts // 2)
    levels = np.linspace(0.05, 0.9, max(1, half // 2))
    homogeneous = np.concatenate((levels, -levels))
    starts = [np.full(ell, x) for x in homogeneous]
    while len(starts) < restarts:
        center = rng.choice(homogeneous)
        noise = rng.uniform(-config.perturbation_amplitude, config.perturbation_amplitude, ell)
        starts.append(np.clip(center + noise, -0.95 * u_plus, 0.95 * u_plus))

    def objective(x):
        energy = eff_energy(coupling, h_ext, x, include_a0, config)
        return energy.value, energy.gradient

    minima: List[Tuple[float, np.ndarray]] = []
    for start in starts:
        result = minimize(objective, start, jac=True, method='L-BFGS-B',
                          bounds=[(-u_plus, u_plus)] * ell,
                          options={'gtol': config.lbfgs_gtol, 'ftol': 1e-15, 'maxiter': 2000})
        u = np.asarray(result.x)
        value = float(result.fun)
        h = _stationarity_polish(coupling, h_ext, np.arctanh(u), box.h_plus, config)
        if np.all(np.abs(h) <= box.h_plus):
            polished = np.tanh(h)
            polished_value = eff_energy(coupling, h_ext, polished, include_a0, config).value
            if polished_value <= value + 1e-12 * max(1.0, abs(value)):
                u, value = polished, polished_value
        if all(np.max(np.abs(u - other)) > config.distinct_minimum_tolerance for _, other in minima):
            minima.append((value, u))

    minima.sort(key=lambda item: item[0])
    best_value, best_u = minima[0]
    tolerance = config.tie_tolerance * max(1.0, abs(best_value))
    global_minima = [u for value, u in minima if value <= best_value + tolerance]
    logger.debug(f"  → minimize_eff(lam={coupling.lam}, h_ext={h_ext}, ell={ell}): "
                 f"{len(minima)} distinct minima, {len(global_minima)} global")
    return EffMinimum(
        argmin=best_u,
        value=best_value,
        spread=float(np.ptp(best_u)),
        per_site=best_value / ell,
        minima=minima,
        global_minima=global_minima,
    )


def psi_series(coeffs: CoeffMap, u) -> np.ndarray:
    """m_i - u_i = (1 - u_i^2) d log Z*/du_i from the truncated cluster series"""
    u = np.asarray(u, dtype=float).reshape(-1)
    series = coeffs.as_series()
    return np.array([(1.0 - u[i] ** 2) * series.partial(i).evaluate(u) for i in range(u.size)])


def xi(u):
    """(atanh u - u)(1 - u^2)"""
    u = np.asarray(u, dtype=float)
    return (np.arctanh(u) - u) * (1.0 - u * u)


def xi_prime(u):
    u = np.asarray(u, dtype=float)
    return 3.0 * u * u - 2.0 * u * np.arctanh(u)


def theta(a, b, diagonal_tolerance: float = 1e-7):
    """Divided difference (xi(a) - xi(b)) / (a - b), the derivative on the diagonal"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(np.abs(a) >= 1.0) or np.any(np.abs(b) >= 1.0):
        raise DomainError("theta needs |u| < 1")
    close = np.abs(a - b) < diagonal_tolerance
    with np.errstate(divide='ignore', invalid='ignore'):
        quotient = (xi(a) - xi(b)) / (a - b)
    result = np.where(close, xi_prime(0.5 * (a + b)), quotient)
    return float(result) if result.ndim == 0 else result


@dataclass
class ThetaScan:
    grid_max: float
    argmax: Tuple[float, float]
    diagonal_max: float
    diagonal_argmax: float


def theta_grid_max(resolution: int = 2001, bound: float = 0.999) -> ThetaScan:
    """Maximum of theta on a resolution x resolution grid over (-bound, bound)^2"""
    if not (0 < bound < 1):
        raise DomainError(f"bound must lie in (0, 1), got {bound}")
    grid = np.linspace(-bound, bound, resolution)
    best, best_at = -np.inf, (0.0, 0.0)
    for a in grid:
        row = theta(np.full_like(grid, a), grid)
        j = int(np.argmax(row))
        if row[j] > best:
            best, best_at = float(row[j]), (float(a), float(grid[j]))
    diagonal = xi_prime(grid)
    k = int(np.argmax(diagonal))
    return ThetaScan(grid_max=best, argmax=best_at, diagonal_max=float(diagonal[k]), diagonal_argmax=float(grid[k]))


def layer_sum_weights(coupling: Coupling, ell: int, config: SolverConfig = DEFAULT_CONFIG) -> np.ndarray:
    """
    Multi-canonical table of an ell x ell box

    W[n_1, ..., n_ell] sums the vertical Boltzmann weights of all boxes whose
    layer i holds n_i plus spins. Columns are independent vertical rings, so
    the table is built one column at a time over partial plus-counts.
    """
    if ell < 2:
        raise DomainError(f"ell must be at least 2, got {ell}")
    if ell > config.max_gap_box:
        raise SizeError(f"box enumeration limited to ell <= {config.max_gap_box}, got {ell}")

    columns = []
    for bits in product((1, 0), repeat=ell):
        spins = np.where(np.array(bits) == 1, 1.0, -1.0)
        weight = math.exp(coupling.lam * float(np.sum(spins * np.roll(spins, -1))))
        columns.append((bits, weight))

    table = np.zeros((ell + 1,) * ell)
    table[(0,) * ell] = 1.0
    for _ in range(ell):
        updated = np.zeros_like(table)
        for bits, weight in columns:
            target = tuple(slice(1, None) if bit else slice(None) for bit in bits)
            source = tuple(slice(None, -1) if bit else slice(None) for bit in bits)
            updated[target] += weight * table[source]
        table = updated
    return table


def _plus_counts(ell: int, m: np.ndarray) -> Tuple[int, ...]:
    sums = ell * m
    rounded = np.rint(sums)
    if np.any(np.abs(sums - rounded) > 1e-9):
        raise DomainError(f"ell * m_i must be integers, got {sums.tolist()}")
    rounded = rounded.astype(int)
    if np.any(np.abs(rounded) > ell) or np.any((rounded + ell) % 2):
        raise DomainError(f"layer sums {rounded.tolist()} are not reachable with {ell} spins per layer")
    return tuple(int(v) for v in (rounded + ell) // 2)


def multicanonical_free_energy(coupling: Coupling, ell: int, m: Sequence[float],
                               table: Optional[np.ndarray] = None,
                               config: SolverConfig = DEFAULT_CONFIG) -> float:
    """phi_ell(m) = -(1/ell^2) log W[n(m)]"""
    m = np.asarray(m, dtype=float).reshape(-1)
    if m.size != ell:
        raise DomainError(f"expected {ell} layer magnetizations, got {m.size}")
    counts = _plus_counts(ell, m)
    if table is None:
        table = layer_sum_weights(coupling, ell, config)
    return -math.log(table[counts]) / ell ** 2


def ensemble_gap(coupling: Coupling, ell: int, m: Sequence[float],
                 config: SolverConfig = DEFAULT_CONFIG) -> EnsembleGap:
    """
    (1/ell)[log Z_{ell,h} - sum h_i m_i] + phi_ell(m), with h conjugate to m

    The first term is the grand-canonical pressure of the box at the fields
    reproducing m; the second is minus the multi-canonical one.
    """
    if ell > config.max_gap_box:
        raise SizeError(f"box enumeration limited to ell <= {config.max_gap_box}, got {ell}")
    m = np.asarray(m, dtype=float).reshape(-1)
    if m.size != ell:
        raise DomainError(f"expected {ell} layer magnetizations, got {m.size}")
    _plus_counts(ell, m)
    if np.any(np.abs(m) >= 1.0):
        raise DomainError("layer magnetizations must satisfy |m_i| < 1 to have finite conjugate fields")

    phi = multicanonical_free_energy(coupling, ell, m, config=config)
    inversion = u_from_m(coupling, m, m_plus=1.0, check_contraction=False, config=config)
    log_z = ring_log_z(coupling, inversion.h).log_z
    grand = (log_z - float(np.dot(inversion.h, m))) / ell
    gap = grand + phi
    logger.debug(f"  → ensemble_gap(ell={ell}): grand {grand:.12f}, phi {phi:.12f}, gap {gap:.3e}")
    return EnsembleGap(ell=ell, gap=gap, phi=phi, grand=grand, h=inversion.h)


@dataclass
class CoarseGrainedPressure:
    value: float
    argmax: np.ndarray


def coarse_grained_pressure(coupling: Coupling, h_ext: float, ell: int, m_plus: Optional[float] = None,
                            config: SolverConfig = DEFAULT_CONFIG) -> CoarseGrainedPressure:
    """
    (1/ell^2) log Z_max of one box

    Maximum over reachable layer magnetizations with |m_i| <= m_plus of
    (1/ell) sum_i (m_i^2/2 + h_ext m_i) - phi_ell(m).
    """
    table = layer_sum_weights(coupling, ell, config)
    levels = (2.0 * np.arange(ell + 1) - ell) / ell
    grids = np.meshgrid(*([levels] * ell), indexing='ij')
    mean_field = sum(0.5 * g * g + h_ext * g for g in grids) / ell
    with np.errstate(divide='ignore'):
        values = mean_field + np.log(table) / ell ** 2
    if m_plus is not None:
        allowed = np.ones_like(values, dtype=bool)
        for g in grids:
            allowed &= np.abs(g) <= m_plus + 1e-12
        values = np.where(allowed, values, -np.inf)
    flat = int(np.argmax(values))
    index = np.unravel_index(flat, values.shape)
    return CoarseGrainedPressure(value=float(values[index]), argmax=levels[list(index)])

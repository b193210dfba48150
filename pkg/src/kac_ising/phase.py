"""
Variational phase diagram of the layered Kac model

In the Lebowitz-Penrose limit the pressure is

    P(lam, h_ext) = -inf_m { -h_ext*m - m^2/2 + f_lam(m) }

with f_lam the canonical free energy of the vertical reference system.
This module locates the infimum, builds the convex envelope of
g(m) = -m^2/2 + f_lam(m), solves the mean-field equation and evaluates the
large-field thresholds used by the uniqueness and homogeneity arguments.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import ConvergenceError, DomainError, InvalidInputError
from .ising1d import Coupling, ReferenceSystem, field_of_magnetization, free_energy_curve, make_reference

logger = logging.getLogger(__name__)

# Closest admissible magnetization to +-1 used as a bracket end
EDGE = 1.0 - 1e-12


@dataclass
class PhasePoint:
    """Lebowitz-Penrose pressure at (lam, h_ext) together with its minimizers"""
    lam: float
    h_ext: float
    minimizer_m: float
    pressure_lp: float
    degenerate: bool
    minimizers: List[float] = field(default_factory=list)


@dataclass
class EnvelopeCurve:
    """g(m) on a grid, its convex envelope and the coexistence plateau if any"""
    grid_m: np.ndarray
    g_values: np.ndarray
    envelope_values: np.ndarray
    flat_interval: Optional[Tuple[float, float]] = None

    def rows(self):
        """(m, g, envelope) rows for tabular output"""
        return zip(self.grid_m.tolist(), self.g_values.tolist(), self.envelope_values.tolist())


class MeanFieldFunctional:
    """
    g(m) = -m^2/2 + f(m) and its derivative for one reference system

    All evaluations are vectorized over m through the Legendre inversion
    of the reference pressure.
    """

    def __init__(self, lam: float, reference: Union[str, ReferenceSystem] = 'chain',
                 config: SolverConfig = DEFAULT_CONFIG):
        _check_lambda(lam)
        self.coupling = Coupling(float(lam))
        self.reference = make_reference(self.coupling, reference)
        self.config = config

    def g(self, m) -> np.ndarray:
        f, _ = free_energy_curve(self.reference, m, self.config)
        return -0.5 * np.asarray(m) ** 2 + f

    def g_and_slope(self, m) -> Tuple[np.ndarray, np.ndarray]:
        m = np.asarray(m, dtype=float)
        f, f_prime = free_energy_curve(self.reference, m, self.config)
        return -0.5 * m ** 2 + f, -m + f_prime

    def slope(self, m: float) -> float:
        """g'(m) = -m + f'(m) at a single point"""
        return float(-m + field_of_magnetization(self.reference, np.asarray([m]), self.config)[0])

    def grid(self, step: float) -> np.ndarray:
        """Uniform grid on (-1, 1) closed by the two edge points"""
        count = int(round(2.0 / step))
        interior = np.linspace(-1.0, 1.0, count + 1)[1:-1]
        return np.concatenate(([-EDGE], interior, [EDGE]))


def _check_lambda(lam: float):
    if not math.isfinite(lam):
        raise InvalidInputError(f"lambda must be finite, got {lam}")
    if lam < 0:
        raise DomainError(f"lambda must be non-negative, got {lam}")


def _polish_root(func: Callable[[float], float], lo: float, hi: float, xtol: float) -> Optional[float]:
    """brentq on [lo, hi] if the bracket changes sign, else None"""
    f_lo, f_hi = func(lo), func(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0:
        return None
    return brentq(func, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def lp_pressure(lam: float, h_ext: float, reference: Union[str, ReferenceSystem] = 'chain',
                config: SolverConfig = DEFAULT_CONFIG) -> PhasePoint:
    """
    Lebowitz-Penrose pressure and every global minimizer of the variational problem

    Grid scan at config.minimization_grid_step, each local minimum of the
    sampled functional polished by a root solve of its derivative. Minimizers
    within config.tie_tolerance of the best value are all reported.
    """
    if not math.isfinite(h_ext):
        raise InvalidInputError(f"h_ext must be finite, got {h_ext}")
    functional = MeanFieldFunctional(lam, reference, config)
    grid = functional.grid(config.minimization_grid_step)
    g_values, _ = functional.g_and_slope(grid)
    phi = g_values - h_ext * grid

    def slope(m: float) -> float:
        return functional.slope(m) - h_ext

    def value(m: float) -> float:
        return float(functional.g(np.asarray([m]))[0]) - h_ext * m

    n = grid.size
    left = np.concatenate(([np.inf], phi[:-1]))
    right = np.concatenate((phi[1:], [np.inf]))
    local = np.flatnonzero((phi <= left) & (phi <= right))

    candidates = []
    for i in local:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, n - 1)]
        root = _polish_root(slope, lo, hi, config.polish_xtol)
        if root is None:
            root = float(grid[i])
            logger.debug(f"  → no sign change around m = {root:.6f}, keeping grid point")
        candidates.append((value(root), root))

    best = min(v for v, _ in candidates)
    minimizers: List[float] = []
    for v, m in sorted(candidates, key=lambda c: c[1]):
        if v <= best + config.tie_tolerance and all(abs(m - other) > 1e-7 for other in minimizers):
            minimizers.append(float(m))

    logger.debug(f"  → lp_pressure(lam={lam}, h_ext={h_ext}): {len(local)} local minima, "
                 f"{len(minimizers)} global")
    return PhasePoint(
        lam=float(lam),
        h_ext=float(h_ext),
        minimizer_m=max(minimizers),
        pressure_lp=float(-best),
        degenerate=len(minimizers) > 1,
        minimizers=minimizers,
    )


def _lower_hull(x: np.ndarray, y: np.ndarray) -> List[int]:
    """Monotone-chain lower hull of points sorted by x; returns vertex indices"""
    hull: List[int] = []
    for k in range(x.size):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            cross = (x[j] - x[i]) * (y[k] - y[i]) - (y[j] - y[i]) * (x[k] - x[i])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(k)
    return hull


def convex_envelope(lam: float, grid_step: float = 1e-3, reference: Union[str, ReferenceSystem] = 'chain',
                    config: SolverConfig = DEFAULT_CONFIG) -> EnvelopeCurve:
    """
    Convex envelope of g(m) = -m^2/2 + f(m) on a uniform grid

    The coexistence plateau is the hull segment over m = 0 whose slope
    vanishes and which actually bridges over a non-convex stretch of g.
    Its endpoints are refined off-grid by solving g'(m) = 0.
    """
    if not (0 < grid_step <= 1e-2):
        raise DomainError(f"grid_step must lie in (0, 1e-2], got {grid_step}")
    functional = MeanFieldFunctional(lam, reference, config)
    grid = functional.grid(grid_step)
    g_values = functional.g(grid)

    hull = _lower_hull(grid, g_values)
    envelope = np.interp(grid, grid[hull], g_values[hull])
    envelope = np.minimum(envelope, g_values)

    flat_interval = None
    for a, b in zip(hull[:-1], hull[1:]):
        if not (grid[a] <= 0.0 <= grid[b]):
            continue
        slope = (g_values[b] - g_values[a]) / (grid[b] - grid[a])
        bridged = b - a > 1 and np.max(g_values[a:b + 1] - envelope[a:b + 1]) > config.flat_gap_tolerance
        if abs(slope) < config.flat_slope_tolerance and bridged:
            lo = _polish_root(functional.slope, max(grid[a] - 2 * grid_step, -EDGE),
                              min(grid[a] + 2 * grid_step, 0.0), config.polish_xtol)
            hi = _polish_root(functional.slope, max(grid[b] - 2 * grid_step, 0.0),
                              min(grid[b] + 2 * grid_step, EDGE), config.polish_xtol)
            flat_interval = (float(grid[a] if lo is None else lo), float(grid[b] if hi is None else hi))
            logger.debug(f"  → coexistence plateau [{flat_interval[0]:.9f}, {flat_interval[1]:.9f}]")
        break

    return EnvelopeCurve(grid_m=grid, g_values=g_values, envelope_values=envelope, flat_interval=flat_interval)


def spontaneous_magnetization(lam: float, reference: Union[str, ReferenceSystem] = 'chain',
                              config: SolverConfig = DEFAULT_CONFIG) -> float:
    """Positive minimizer of g(m); 0 when the minimum sits at m = 0"""
    _check_lambda(lam)
    if lam == 0:
        return 0.0
    point = lp_pressure(lam, 0.0, reference, config)
    return max(0.0, max(abs(m) for m in point.minimizers))


def _edge_root(functional: MeanFieldFunctional, h_ext: float, lo: float, hi: float,
               config: SolverConfig) -> float:
    """Root of x = h_ext + m(x) for x in [lo, hi], returned as m clipped to [-EDGE, EDGE]"""

    def equation(x: float) -> float:
        return x - h_ext - float(functional.reference.magnetization(np.asarray([x]))[0])

    x = _polish_root(equation, lo, hi, config.polish_xtol)
    if x is None:
        raise ConvergenceError(f"no field-side root of the mean-field equation in [{lo}, {hi}]")
    m = float(functional.reference.magnetization(np.asarray([x]))[0])
    return min(max(m, -EDGE), EDGE)


def mean_field_solve(lam: float, h_ext: float, reference: Union[str, ReferenceSystem] = 'chain',
                     config: SolverConfig = DEFAULT_CONFIG) -> List[float]:
    """All roots of h_ext + m = f'(m) in (-1, 1), in increasing order"""
    if not math.isfinite(h_ext):
        raise InvalidInputError(f"h_ext must be finite, got {h_ext}")
    functional = MeanFieldFunctional(lam, reference, config)
    grid = functional.grid(config.root_scan_step)
    _, slopes = functional.g_and_slope(grid)
    residual = h_ext - slopes

    def equation(m: float) -> float:
        return h_ext - functional.slope(m)

    roots: List[float] = [float(m) for m in grid[residual == 0.0]]
    crossings = np.flatnonzero(residual[:-1] * residual[1:] < 0)
    for i in crossings:
        roots.append(float(brentq(equation, grid[i], grid[i + 1], xtol=config.polish_xtol,
                                  rtol=4 * np.finfo(float).eps)))

    # residual -> +inf at m = -1 and -inf at m = +1: a wrong sign at an edge
    # point leaves a root beyond it, solved in the field x = f'(m) instead
    edge_fields = slopes[[0, -1]] + grid[[0, -1]]
    if residual[-1] > 0:
        roots.append(_edge_root(functional, h_ext, edge_fields[1], h_ext + 1.0, config))
    if residual[0] < 0:
        roots.append(_edge_root(functional, h_ext, h_ext - 1.0, edge_fields[0], config))
    roots.sort()
    logger.debug(f"  → mean_field_solve(lam={lam}, h_ext={h_ext}): {len(roots)} roots")
    return roots


def _sech_squared(x: float) -> float:
    q = math.exp(-2.0 * abs(x))
    return 4.0 * q / (1.0 + q) ** 2


def dobrushin_ratio(lam: float, h_ext: float) -> float:
    """Single-site influence bound (1 + 2 lam) / cosh^2(h_ext - 1 - 2 lam); unique regime below 1/4"""
    return (1.0 + 2.0 * lam) * _sech_squared(h_ext - 1.0 - 2.0 * lam)


def threshold_h_star(branch: str = 'large') -> float:
    """
    Root of 3 / cosh^2(h - 3) = 1/4

    The large root is the field above which the influence bound stays under
    1/4 for every lam <= 1; branch='small' exposes the other root.
    """
    offset = math.acosh(math.sqrt(12.0))
    if branch == 'large':
        return 3.0 + offset
    if branch == 'small':
        return 3.0 - offset
    raise DomainError(f"branch must be 'large' or 'small', got '{branch}'")


def threshold_h0() -> float:
    """Low-field threshold h_0 = (1/2 - 3/8) / 4"""
    return 0.25 * (0.5 - 0.375)


def cap_root(h_star: float, config: SolverConfig = DEFAULT_CONFIG) -> float:
    """The m* solving atanh(m) - m = h_star"""
    if not math.isfinite(h_star):
        raise InvalidInputError(f"h_star must be finite, got {h_star}")
    if h_star <= 0:
        raise DomainError(f"h_star must be positive, got {h_star}")
    # in x = atanh(m) the equation x - tanh(x) = h_star has its root in (0, h_star + 1]
    x = brentq(lambda t: t - math.tanh(t) - h_star, 0.0, h_star + 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return math.tanh(x)


def magnetization_cap(h_star: float, config: SolverConfig = DEFAULT_CONFIG) -> float:
    """
    Search-box bound m_+ = m* + margin, kept strictly below 1

    Args:
        h_star: positive field threshold
        config: supplies the margin (cap_margin)

    Returns:
        m_+ with m* < m_+ < 1
    """
    m_star = cap_root(h_star, config)
    return min(m_star + config.cap_margin, 1.0 - 0.5 * (1.0 - m_star))

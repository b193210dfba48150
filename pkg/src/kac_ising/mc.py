"""
Metropolis Monte Carlo of the layered Kac-Ising model

The lattice is L x L and periodic. Row i of the spin array is layer i;
within a layer spins interact through the Kac kernel, and each spin is
coupled to the spins directly above and below it with strength lambda.

    H = -1/2 sum_i sum_{x != y} J(x, y) s(i, x) s(i, y)
        - lambda sum_{i, x} s(i, x) s(i + 1, x) - h_ext sum s

Running Kac sums K(i, x) = sum_y J(x, y) s(i, y) are kept for every site
and updated on each accepted flip.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import DomainError, InvalidInputError
from .phase import lp_pressure

logger = logging.getLogger(__name__)

KERNEL_SHAPES = ('raised_cosine', 'box')
RNG_ALGORITHM = 'Philox'


@dataclass(frozen=True)
class ModelParams:
    """Physical knobs of one simulation"""
    lam: float
    h_ext: float
    gamma: float
    kernel_shape: str = 'raised_cosine'
    kac_strength: float = 1.0

    def __post_init__(self):
        for name in ('lam', 'h_ext', 'gamma', 'kac_strength'):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} must be finite")
        if self.lam < 0:
            raise DomainError(f"lambda must be nonnegative, got {self.lam}")
        if self.kac_strength < 0:
            raise DomainError(f"kac_strength must be nonnegative, got {self.kac_strength}")


@dataclass(frozen=True)
class KacKernel:
    """
    J(0, y) for |y| <= range, stored at index y + range

    The self term is zero and the row sums to one.
    """
    gamma: float
    range: int
    weights: np.ndarray = field(repr=False)
    c_gamma: float
    shape: str = 'raised_cosine'

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.range, self.range + 1)

    def weight(self, y: int) -> float:
        if abs(y) > self.range:
            return 0.0
        return float(self.weights[y + self.range])


def _shape_function(shape: str, s: np.ndarray) -> np.ndarray:
    if shape == 'raised_cosine':
        return np.where(np.abs(s) < 1.0, 0.5 * (1.0 + np.cos(np.pi * s)), 0.0)
    if shape == 'box':
        return np.where(np.abs(s) < 1.0, 0.5, 0.0)
    raise DomainError(f"unknown kernel shape {shape!r}, expected one of {KERNEL_SHAPES}")


def build_kernel(gamma: float, shape: str = 'raised_cosine') -> KacKernel:
    """
    Discretized Kac kernel c_gamma * gamma * phi(gamma y) for y != 0

    phi is the raised cosine (1 + cos(pi s))/2 on |s| < 1, or the uniform
    density 1/2 there. c_gamma is fixed by a compensated sum so the row sum
    is one to within an ulp.
    """
    if not math.isfinite(gamma):
        raise InvalidInputError(f"gamma must be finite, got {gamma}")
    if not (0.0 < gamma <= 0.5):
        raise DomainError(f"gamma must lie in (0, 1/2], got {gamma}")
    reach = int(math.floor(1.0 / gamma))
    positive = _shape_function(shape, gamma * np.arange(1, reach + 1))
    total = 2.0 * math.fsum(positive)
    half = positive / total
    weights = np.concatenate((half[::-1], [0.0], half))
    return KacKernel(gamma=gamma, range=reach, weights=weights, c_gamma=1.0 / (gamma * total), shape=shape)


@dataclass
class SpinLattice:
    """L x L array of +-1 spins, periodic in both directions; row i is layer i"""
    spins: np.ndarray

    def __post_init__(self):
        spins = np.asarray(self.spins)
        if spins.ndim != 2 or spins.shape[0] != spins.shape[1]:
            raise DomainError(f"spin lattice must be square, got shape {spins.shape}")
        if not np.all(np.abs(spins) == 1):
            raise DomainError("spins must be +1 or -1")
        self.spins = spins.astype(np.int8)

    @property
    def L(self) -> int:
        return int(self.spins.shape[0])

    @property
    def magnetization(self) -> float:
        return float(np.mean(self.spins, dtype=np.float64))

    @classmethod
    def aligned(cls, L: int, sign: int = 1) -> 'SpinLattice':
        return cls(np.full((L, L), 1 if sign >= 0 else -1, dtype=np.int8))

    @classmethod
    def random(cls, L: int, rng: np.random.Generator) -> 'SpinLattice':
        return cls(np.where(rng.random((L, L)) < 0.5, 1, -1).astype(np.int8))

    def flipped(self) -> 'SpinLattice':
        return SpinLattice(-self.spins)


def _check_lattice_fits(lattice: SpinLattice, kernel: KacKernel):
    if lattice.L < 2 * kernel.range + 1:
        raise DomainError(f"L = {lattice.L} is smaller than the kernel support {2 * kernel.range + 1}")


def kac_sums(lattice: SpinLattice, kernel: KacKernel, kac_strength: float = 1.0) -> np.ndarray:
    """K(i, x) = sum_y J(x, y) s(i, y) for every site"""
    spins = lattice.spins.astype(np.float64)
    total = np.zeros_like(spins)
    for y, w in zip(kernel.offsets, kernel.weights):
        if w:
            total += w * np.roll(spins, -y, axis=1)
    return kac_strength * total


def local_field(lattice: SpinLattice, kernel: KacKernel, lam: float, h_ext: float,
                site: Tuple[int, int], kac_strength: float = 1.0) -> float:
    """Field on site (x, i): Kac sum in layer i + lambda (up + down) + h_ext"""
    x, i = site
    L = lattice.L
    spins = lattice.spins
    kac = math.fsum(w * spins[i, (x + y) % L] for y, w in zip(kernel.offsets, kernel.weights) if w)
    vertical = int(spins[(i + 1) % L, x]) + int(spins[(i - 1) % L, x])
    return kac_strength * kac + lam * vertical + h_ext


def energy_change(lattice: SpinLattice, kernel: KacKernel, lam: float, h_ext: float,
                  site: Tuple[int, int], kac_strength: float = 1.0) -> float:
    x, i = site
    return 2.0 * float(lattice.spins[i, x]) * local_field(lattice, kernel, lam, h_ext, site, kac_strength)


def total_energy(lattice: SpinLattice, kernel: KacKernel, lam: float, h_ext: float,
                 kac_strength: float = 1.0) -> float:
    """Direct evaluation of the Hamiltonian"""
    spins = lattice.spins.astype(np.float64)
    kac = kac_sums(lattice, kernel, kac_strength)
    vertical = float(np.sum(spins * np.roll(spins, -1, axis=0)))
    return -0.5 * float(np.sum(spins * kac)) - lam * vertical - h_ext * float(np.sum(spins))


@njit(nogil=True, cache=True)
def _metropolis_sweep(spins, kac, offsets, weights, lam, h_ext, rows, cols, uniforms):
    """One sweep of proposals; returns (energy change, magnetization change, accepted)"""
    L = spins.shape[0]
    d_energy = 0.0
    d_mag = 0
    accepted = 0
    for n in range(rows.shape[0]):
        i = rows[n]
        x = cols[n]
        s = spins[i, x]
        up = spins[(i + 1) % L, x]
        down = spins[(i - 1 + L) % L, x]
        d_h = 2.0 * s * (kac[i, x] + lam * (up + down) + h_ext)
        if d_h <= 0.0 or uniforms[n] < math.exp(-d_h):
            spins[i, x] = -s
            delta = -2.0 * s
            for k in range(offsets.shape[0]):
                w = weights[k]
                if w != 0.0:
                    target = (x - offsets[k] + L) % L
                    kac[i, target] += w * delta
            d_energy += d_h
            d_mag -= 2 * s
            accepted += 1
    return d_energy, d_mag, accepted


@dataclass
class McResult:
    mean_magnetization: float
    stderr: float
    energy_trace: np.ndarray = field(repr=False)
    magnetization_trace: np.ndarray = field(repr=False)
    sweeps: int
    warmup: int
    seed: int
    L: int
    acceptance_rate: float
    batch_means: np.ndarray = field(repr=False)
    final_spins: np.ndarray = field(repr=False)
    rng_algorithm: str = RNG_ALGORITHM
    wall_time: float = 0.0

    def trace_rows(self):
        """(sweep, magnetization, energy) for every measured sweep"""
        first = self.warmup + 1
        for k, (m, e) in enumerate(zip(self.magnetization_trace, self.energy_trace)):
            yield first + k, float(m), float(e)


def _streams(seed: int, batch_count: int) -> List[np.random.Generator]:
    """Independent Philox streams: initial state, warmup, then one per batch"""
    children = np.random.SeedSequence(seed).spawn(2 + batch_count)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def run_metropolis(params: ModelParams, L: int, sweeps: int, warmup: int, seed: int,
                   initial: Optional[SpinLattice] = None, config: SolverConfig = DEFAULT_CONFIG) -> McResult:
    """
    Single-spin-flip Metropolis at temperature one

    A sweep is L^2 proposals at uniformly drawn sites. The chain starts
    aligned with h_ext (random when h_ext = 0) unless an initial lattice is
    given. Magnetization and energy are recorded after every sweep past the
    warmup; the standard error comes from config.batch_count batch means,
    each batch drawing from its own Philox stream.
    """
    if sweeps <= warmup or warmup < 0:
        raise InvalidInputError(f"need 0 <= warmup < sweeps, got warmup={warmup}, sweeps={sweeps}")
    batch_count = config.batch_count
    measured = sweeps - warmup
    if measured < batch_count:
        raise InvalidInputError(f"need at least {batch_count} measured sweeps, got {measured}")

    kernel = build_kernel(params.gamma, params.kernel_shape)
    streams = _streams(seed, batch_count)
    if initial is None:
        if params.h_ext > 0:
            lattice = SpinLattice.aligned(L, 1)
        elif params.h_ext < 0:
            lattice = SpinLattice.aligned(L, -1)
        else:
            lattice = SpinLattice.random(L, streams[0])
    else:
        if initial.L != L:
            raise DomainError(f"initial lattice has L = {initial.L}, expected {L}")
        lattice = SpinLattice(initial.spins.copy())
    _check_lattice_fits(lattice, kernel)

    spins = lattice.spins
    offsets = kernel.offsets.astype(np.int64)
    weights = params.kac_strength * kernel.weights
    lam, h_ext = float(params.lam), float(params.h_ext)
    n_sites = L * L

    started = time.time()
    energy = total_energy(lattice, kernel, lam, h_ext, params.kac_strength)
    magnetization = int(np.sum(spins, dtype=np.int64))
    accepted_total = 0

    def sweep(rng: np.random.Generator, kac: np.ndarray) -> Tuple[float, int, int]:
        rows = rng.integers(0, L, n_sites)
        cols = rng.integers(0, L, n_sites)
        uniforms = rng.random(n_sites)
        return _metropolis_sweep(spins, kac, offsets, weights, lam, h_ext, rows, cols, uniforms)

    kac = kac_sums(lattice, kernel, params.kac_strength)
    for _ in range(warmup):
        d_energy, d_mag, accepted = sweep(streams[1], kac)
        energy += d_energy
        magnetization += d_mag
        accepted_total += accepted

    energy_trace = np.empty(measured)
    magnetization_trace = np.empty(measured)
    batch_sizes = [len(chunk) for chunk in np.array_split(np.arange(measured), batch_count)]
    batch_means = np.empty(batch_count)
    position = 0
    for b, size in enumerate(batch_sizes):
        rng = streams[2 + b]
        kac = kac_sums(lattice, kernel, params.kac_strength)
        for _ in range(size):
            d_energy, d_mag, accepted = sweep(rng, kac)
            energy += d_energy
            magnetization += d_mag
            accepted_total += accepted
            energy_trace[position] = energy
            magnetization_trace[position] = magnetization / n_sites
            position += 1
        batch_means[b] = float(np.mean(magnetization_trace[position - size:position]))

    mean = float(np.mean(magnetization_trace))
    stderr = float(np.std(batch_means, ddof=1) / math.sqrt(batch_count))
    wall_time = time.time() - started
    logger.debug(f"  → run_metropolis(L={L}, gamma={params.gamma}, sweeps={sweeps}): "
                 f"m = {mean:.5f} +- {stderr:.5f} in {wall_time:.2f}s")
    return McResult(
        mean_magnetization=mean,
        stderr=stderr,
        energy_trace=energy_trace,
        magnetization_trace=magnetization_trace,
        sweeps=sweeps,
        warmup=warmup,
        seed=seed,
        L=L,
        acceptance_rate=accepted_total / (sweeps * n_sites),
        batch_means=batch_means,
        final_spins=spins.copy(),
        wall_time=wall_time,
    )


@dataclass
class GammaRow:
    gamma: float
    L: int
    mean_magnetization: float
    stderr: float
    predicted: float
    seed: int

    @property
    def deviation(self) -> float:
        return abs(self.mean_magnetization - self.predicted)


def gamma_sweep(params: ModelParams, gammas: Sequence[float], sweeps: int, warmup: int, seed: int,
                ratio: int = 8, workers: int = 1, config: SolverConfig = DEFAULT_CONFIG) -> List[GammaRow]:
    """
    Metropolis runs at L = ratio * range for each gamma

    Each run gets its own seed spawned from `seed`, so the rows do not
    depend on `workers`. The prediction is the Lebowitz-Penrose minimizer.
    """
    if ratio < 3:
        raise DomainError(f"ratio must be at least 3 so the kernel fits the lattice, got {ratio}")
    if workers < 1:
        raise InvalidInputError(f"workers must be positive, got {workers}")
    ordered = sorted(float(g) for g in gammas)
    kernels = [build_kernel(g, params.kernel_shape) for g in ordered]
    children = np.random.SeedSequence(seed).spawn(len(ordered))
    seeds = [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]
    predicted = lp_pressure(params.lam, params.h_ext, config=config).minimizer_m

    def one(k: int) -> GammaRow:
        L = ratio * kernels[k].range
        run_params = ModelParams(lam=params.lam, h_ext=params.h_ext, gamma=ordered[k],
                                 kernel_shape=params.kernel_shape, kac_strength=params.kac_strength)
        result = run_metropolis(run_params, L, sweeps, warmup, seeds[k], config=config)
        return GammaRow(gamma=ordered[k], L=L, mean_magnetization=result.mean_magnetization,
                        stderr=result.stderr, predicted=predicted, seed=seeds[k])

    if workers == 1:
        return [one(k) for k in range(len(ordered))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(len(ordered))))

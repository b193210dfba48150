"""
Tests for the Kac kernel, the lattice bookkeeping and the Metropolis sampler
"""

import math

import numpy as np
import pytest

from kac_ising.errors import DomainError, InvalidInputError
from kac_ising.mc import (
    ModelParams,
    SpinLattice,
    build_kernel,
    energy_change,
    gamma_sweep,
    kac_sums,
    local_field,
    run_metropolis,
    total_energy,
)
from kac_ising.phase import lp_pressure, mean_field_solve


@pytest.mark.parametrize("gamma", [1 / 2, 1 / 8, 1 / 16, 1 / 64, 0.3])
@pytest.mark.parametrize("shape", ["raised_cosine", "box"])
def test_kernel_rows_sum_to_one(gamma, shape):
    kernel = build_kernel(gamma, shape)
    assert abs(math.fsum(kernel.weights) - 1.0) <= 2 * np.finfo(float).eps
    assert kernel.weight(0) == 0.0
    np.testing.assert_array_equal(kernel.weights, kernel.weights[::-1])
    assert np.all(kernel.weights >= 0)


def test_kernel_support():
    kernel = build_kernel(1 / 8)
    assert kernel.range == 8
    assert kernel.weight(8) == 0.0
    assert kernel.weight(9) == 0.0
    assert kernel.weight(7) > 0.0


def test_kernel_normalizer_tends_to_one():
    coarse, fine = build_kernel(1 / 8), build_kernel(1 / 64)
    assert abs(fine.c_gamma - 1) < abs(coarse.c_gamma - 1)
    assert coarse.c_gamma == pytest.approx(1.0 / (1.0 - 1 / 8), rel=1e-12)


def test_kernel_domain():
    for gamma in (0.0, 0.6, -0.1):
        with pytest.raises(DomainError):
            build_kernel(gamma)
    with pytest.raises(InvalidInputError):
        build_kernel(float('nan'))
    with pytest.raises(DomainError):
        build_kernel(0.25, shape='gaussian')


def test_lattice_validation():
    with pytest.raises(DomainError):
        SpinLattice(np.zeros((4, 4)))
    with pytest.raises(DomainError):
        SpinLattice(np.ones((4, 5)))
    assert SpinLattice.aligned(6, -1).magnetization == -1.0


def test_local_field_on_aligned_lattices():
    kernel = build_kernel(1 / 4)
    lam, h_ext = 0.2, 0.1
    plus, minus = SpinLattice.aligned(12, 1), SpinLattice.aligned(12, -1)
    for site in [(0, 0), (5, 11), (11, 3)]:
        assert local_field(plus, kernel, lam, h_ext, site) == pytest.approx(1 + 2 * lam + h_ext, abs=1e-15)
        assert local_field(minus, kernel, lam, h_ext, site) == pytest.approx(-1 - 2 * lam + h_ext, abs=1e-15)


def test_local_field_flip_symmetry():
    kernel = build_kernel(1 / 4)
    lattice = SpinLattice.random(12, np.random.default_rng(0))
    for site in [(0, 0), (3, 7), (11, 11)]:
        assert local_field(lattice, kernel, 0.3, 0.0, site) == -local_field(lattice.flipped(), kernel, 0.3, 0.0, site)


def test_kac_sums_match_local_field():
    kernel = build_kernel(1 / 4)
    lattice = SpinLattice.random(10, np.random.default_rng(1))
    sums = kac_sums(lattice, kernel)
    for x, i in [(0, 0), (4, 9), (9, 2)]:
        assert sums[i, x] == pytest.approx(local_field(lattice, kernel, 0.0, 0.0, (x, i)), abs=1e-14)


def test_energy_change_matches_direct_difference():
    rng = np.random.default_rng(12)
    for shape in ("raised_cosine", "box"):
        kernel = build_kernel(1 / 4, shape)
        lam, h_ext = 0.25, -0.15
        for _ in range(20):
            lattice = SpinLattice.random(11, rng)
            x, i = (int(v) for v in rng.integers(0, 11, 2))
            before = total_energy(lattice, kernel, lam, h_ext)
            flipped = SpinLattice(lattice.spins.copy())
            flipped.spins[i, x] *= -1
            after = total_energy(flipped, kernel, lam, h_ext)
            assert energy_change(lattice, kernel, lam, h_ext, (x, i)) == pytest.approx(after - before, abs=1e-10)


def test_aligned_energy():
    kernel = build_kernel(1 / 4)
    L, lam, h_ext = 9, 0.2, 0.1
    expected = -L * L * (0.5 + lam + h_ext)
    assert total_energy(SpinLattice.aligned(L), kernel, lam, h_ext) == pytest.approx(expected, rel=1e-13)


def test_run_is_reproducible():
    params = ModelParams(lam=0.2, h_ext=0.1, gamma=1 / 4)
    first = run_metropolis(params, 16, 100, 20, seed=7)
    second = run_metropolis(params, 16, 100, 20, seed=7)
    np.testing.assert_array_equal(first.magnetization_trace, second.magnetization_trace)
    np.testing.assert_array_equal(first.energy_trace, second.energy_trace)
    assert first.mean_magnetization == second.mean_magnetization
    assert first.stderr == second.stderr
    assert first.rng_algorithm == 'Philox'
    other = run_metropolis(params, 16, 100, 20, seed=8)
    assert not np.array_equal(first.magnetization_trace, other.magnetization_trace)


def test_energy_bookkeeping():
    params = ModelParams(lam=0.3, h_ext=0.05, gamma=1 / 4)
    result = run_metropolis(params, 16, 200, 50, seed=3)
    kernel = build_kernel(params.gamma)
    final = total_energy(SpinLattice(result.final_spins), kernel, params.lam, params.h_ext)
    assert result.energy_trace[-1] == pytest.approx(final, rel=1e-6)
    assert result.magnetization_trace[-1] == pytest.approx(float(np.mean(result.final_spins)), abs=1e-15)
    assert 0 < result.acceptance_rate < 1


def test_flip_symmetry_of_trajectories():
    params = ModelParams(lam=0.1, h_ext=0.0, gamma=1 / 4)
    start = SpinLattice.random(12, np.random.default_rng(99))
    up = run_metropolis(params, 12, 80, 10, seed=5, initial=start)
    down = run_metropolis(params, 12, 80, 10, seed=5, initial=start.flipped())
    np.testing.assert_array_equal(up.magnetization_trace, -down.magnetization_trace)
    np.testing.assert_array_equal(up.energy_trace, down.energy_trace)


def test_independent_spins_follow_tanh():
    params = ModelParams(lam=0.0, h_ext=0.5, gamma=1 / 4, kac_strength=0.0)
    result = run_metropolis(params, 16, 2000, 200, seed=11)
    assert result.stderr > 0
    assert abs(result.mean_magnetization - math.tanh(0.5)) <= 3 * result.stderr


def test_large_field_matches_mean_field_root():
    lam, h_ext = 0.2, 5.0
    result = run_metropolis(ModelParams(lam=lam, h_ext=h_ext, gamma=1 / 8), 32, 300, 50, seed=2)
    roots = mean_field_solve(lam, h_ext)
    assert len(roots) == 1
    assert abs(result.mean_magnetization - roots[0]) <= 0.02


def test_run_argument_checks():
    params = ModelParams(lam=0.1, h_ext=0.1, gamma=1 / 4)
    with pytest.raises(InvalidInputError):
        run_metropolis(params, 16, 10, 10, seed=0)
    with pytest.raises(InvalidInputError):
        run_metropolis(params, 16, 40, 20, seed=0)
    with pytest.raises(DomainError):
        run_metropolis(params, 8, 100, 10, seed=0)
    with pytest.raises(DomainError):
        ModelParams(lam=-0.1, h_ext=0.0, gamma=0.25)


def test_gamma_sweep_is_independent_of_workers():
    params = ModelParams(lam=0.2, h_ext=0.1, gamma=1 / 4)
    serial = gamma_sweep(params, [1 / 4, 1 / 3], sweeps=80, warmup=10, seed=4)
    threaded = gamma_sweep(params, [1 / 3, 1 / 4], sweeps=80, warmup=10, seed=4, workers=2)
    assert [row.gamma for row in serial] == [1 / 4, 1 / 3]
    assert [row.mean_magnetization for row in serial] == [row.mean_magnetization for row in threaded]
    assert serial[0].L == 8 * 4
    assert serial[0].predicted == lp_pressure(0.2, 0.1).minimizer_m


@pytest.mark.slow
def test_magnetization_matches_lebowitz_penrose():
    params = ModelParams(lam=0.2, h_ext=0.1, gamma=1 / 16)
    result = run_metropolis(params, 128, 20_000, 2_000, seed=2024)
    predicted = lp_pressure(0.2, 0.1).minimizer_m
    assert abs(result.mean_magnetization - predicted) <= 0.05


@pytest.mark.slow
def test_deviation_shrinks_with_gamma():
    params = ModelParams(lam=0.2, h_ext=0.1, gamma=1 / 8)
    coarse, fine = gamma_sweep(params, [1 / 8, 1 / 16], sweeps=4000, warmup=500, seed=6, workers=2)[::-1]
    combined = math.hypot(coarse.stderr, fine.stderr)
    assert fine.deviation <= coarse.deviation + 3 * combined


@pytest.mark.slow
def test_no_magnetization_without_coupling_or_field():
    params = ModelParams(lam=0.0, h_ext=0.0, gamma=1 / 8)
    result = run_metropolis(params, 32, 4000, 500, seed=13)
    assert abs(result.mean_magnetization) <= 3 * result.stderr + 5e-3

"""
Tests for the variational phase diagram
"""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from kac_ising.errors import DomainError
from kac_ising.phase import (
    cap_root,
    convex_envelope,
    dobrushin_ratio,
    lp_pressure,
    magnetization_cap,
    mean_field_solve,
    spontaneous_magnetization,
    threshold_h0,
    threshold_h_star,
)


def test_free_layers_pressure():
    point = lp_pressure(0.0, 0.0)
    assert point.pressure_lp == pytest.approx(math.log(2.0), abs=1e-10)
    assert point.minimizer_m == pytest.approx(0.0, abs=1e-9)
    assert not point.degenerate


def test_free_layers_in_field():
    point = lp_pressure(0.0, 0.5)
    m = brentq(lambda x: 0.5 + x - math.atanh(x), 0.1, 0.999)
    assert point.minimizer_m == pytest.approx(m, abs=1e-10)
    entropy = -(0.5 * (1 + m) * math.log(0.5 * (1 + m)) + 0.5 * (1 - m) * math.log(0.5 * (1 - m)))
    assert point.pressure_lp == pytest.approx(0.5 * m + 0.5 * m * m + entropy, abs=1e-10)


def test_symmetric_minimizers_at_zero_field():
    point = lp_pressure(0.01, 0.0)
    assert point.degenerate
    assert len(point.minimizers) == 2
    assert point.minimizers[0] == pytest.approx(-point.minimizers[1], abs=1e-9)
    assert point.minimizer_m == pytest.approx(math.sqrt(0.06), rel=0.05)


@pytest.mark.parametrize("lam", [0.0, 0.02])
def test_pressure_derivative_is_magnetization(lam):
    step = 1e-4
    for h_ext in (0.05, 0.3, 1.0):
        fd = (lp_pressure(lam, h_ext + step).pressure_lp - lp_pressure(lam, h_ext - step).pressure_lp) / (2 * step)
        assert fd == pytest.approx(lp_pressure(lam, h_ext).minimizer_m, abs=1e-5)


def test_envelope_without_coupling_is_g():
    curve = convex_envelope(0.0, 1e-3)
    assert curve.flat_interval is None
    np.testing.assert_allclose(curve.envelope_values, curve.g_values, atol=1e-9)


def test_envelope_plateau():
    curve = convex_envelope(0.01, 1e-3)
    assert curve.flat_interval is not None
    lo, hi = curve.flat_interval
    assert lo == pytest.approx(-hi, abs=1e-9)
    assert hi == pytest.approx(math.sqrt(0.06), rel=0.05)
    assert hi == pytest.approx(lp_pressure(0.01, 1e-9).minimizer_m, abs=1e-6)

    assert np.all(curve.envelope_values <= curve.g_values)
    outside = (curve.grid_m < lo) | (curve.grid_m > hi)
    np.testing.assert_allclose(curve.envelope_values[outside], curve.g_values[outside], atol=1e-9)
    assert np.all(np.diff(curve.envelope_values, 2) >= -1e-12)


def test_envelope_grid_step_domain():
    with pytest.raises(DomainError):
        convex_envelope(0.01, 0.05)
    with pytest.raises(DomainError):
        convex_envelope(0.01, 0.0)


def test_spontaneous_magnetization_scaling():
    assert spontaneous_magnetization(0.0) == 0.0
    ratio_3 = spontaneous_magnetization(1e-3) / math.sqrt(6e-3)
    ratio_4 = spontaneous_magnetization(1e-4) / math.sqrt(6e-4)
    assert abs(ratio_3 - 1) <= 0.05
    assert abs(ratio_4 - 1) < abs(ratio_3 - 1)


def test_spontaneous_magnetization_monotone():
    lams = [0.0, 1e-4, 1e-3, 5e-3, 0.01, 0.02, 0.05]
    values = [spontaneous_magnetization(lam) for lam in lams]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_dimer_spontaneous_magnetization():
    m_s = spontaneous_magnetization(1e-3, reference='dimer')
    assert m_s == pytest.approx(math.sqrt(3e-3), rel=0.05)


def test_mean_field_roots():
    roots = mean_field_solve(0.0, 0.0)
    assert len(roots) == 1
    assert roots[0] == pytest.approx(0.0, abs=1e-12)

    roots = mean_field_solve(0.0, 5.0)
    assert len(roots) == 1
    expected = brentq(lambda x: 5.0 + math.tanh(x) - x, 5.0, 7.0, xtol=1e-15)
    assert roots[0] == pytest.approx(math.tanh(expected), abs=1e-12)

    roots = mean_field_solve(0.01, 0.0)
    assert len(roots) == 3
    m_s = spontaneous_magnetization(0.01)
    assert roots[0] == pytest.approx(-m_s, abs=1e-6)
    assert roots[1] == pytest.approx(0.0, abs=1e-9)
    assert roots[2] == pytest.approx(m_s, abs=1e-6)


def test_mean_field_unique_above_threshold():
    assert len(mean_field_solve(0.1, 5.0)) == 1


@pytest.mark.parametrize("h_ext", [10.0, 14.0, 20.0, 40.0])
def test_mean_field_unique_for_large_fields(h_ext):
    roots = mean_field_solve(0.1, h_ext)
    assert len(roots) == 1
    assert 0.0 < roots[0] < 1.0
    assert roots[0] == pytest.approx(1.0, abs=1e-9)

    mirrored = mean_field_solve(0.1, -h_ext)
    assert len(mirrored) == 1
    assert mirrored[0] == pytest.approx(-1.0, abs=1e-9)


def test_mean_field_large_field_dimer_reference():
    roots = mean_field_solve(0.05, 25.0, reference='dimer')
    assert len(roots) == 1
    assert roots[0] == pytest.approx(1.0, abs=1e-9)


def test_dobrushin_ratio():
    assert dobrushin_ratio(0.1, 5.0) == pytest.approx(1.2 / math.cosh(3.8) ** 2, rel=1e-12)
    assert dobrushin_ratio(0.1, 5.0) < 0.25
    assert dobrushin_ratio(0.0, 1.0) == pytest.approx(1.0)
    fields = np.linspace(1.5, 6.0, 40)
    ratios = [dobrushin_ratio(0.2, h) for h in fields]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))


def test_dobrushin_regime_above_h_star():
    h_star = threshold_h_star()
    for lam in np.linspace(0.0, 1.0, 11):
        for h in np.linspace(h_star + 1e-6, h_star + 20.0, 50):
            assert dobrushin_ratio(lam, h) < 0.25


def test_threshold_h_star():
    h_star = threshold_h_star()
    assert 3.0 / math.cosh(h_star - 3.0) ** 2 == pytest.approx(0.25, abs=1e-12)
    assert h_star == pytest.approx(4.925, abs=1e-3)
    assert dobrushin_ratio(1.0, h_star) == pytest.approx(0.25, abs=1e-12)
    small = threshold_h_star('small')
    assert 3.0 / math.cosh(small - 3.0) ** 2 == pytest.approx(0.25, abs=1e-12)
    assert small < h_star
    with pytest.raises(DomainError):
        threshold_h_star('medium')


def test_threshold_h0():
    h0 = threshold_h0()
    assert h0 == 0.03125
    assert 4 * h0 + 0.375 == 0.5
    assert h0 < threshold_h_star()


def test_magnetization_cap():
    for h in (1e-6, 0.01, 0.5):
        m = cap_root(h)
        assert math.atanh(m) - m - h == pytest.approx(0.0, abs=1e-12)
    assert cap_root(1e-9) < 2e-3

    h_star = threshold_h_star()
    m = cap_root(h_star)
    assert m > 0.99
    assert math.atanh(m) - m - h_star == pytest.approx(0.0, abs=1e-9)

    m_plus = magnetization_cap(h_star)
    assert m < m_plus < 1.0
    assert magnetization_cap(0.1) == pytest.approx(cap_root(0.1) + 0.01)

    with pytest.raises(DomainError):
        magnetization_cap(0.0)

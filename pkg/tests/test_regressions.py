import math

import numpy as np
import pytest
import scipy.stats

from spinres.errors import DomainError, RankDeficiencyError
from spinres.fit.regressions import arrhenius_fit, fit_spin_dispersion, linear_fit
from spinres.models.species import CONSTANTS


def test_linear_fit_matches_scipy():
    rng = np.random.default_rng(1)
    x = np.linspace(0.0, 10.0, 25)
    y = 1.5 * x - 4.0 + rng.standard_normal(x.size)
    fit = linear_fit(x, y)
    reference = scipy.stats.linregress(x, y)
    assert fit.value("slope") == pytest.approx(reference.slope)
    assert fit.value("intercept") == pytest.approx(reference.intercept)
    assert fit.error("slope") == pytest.approx(reference.stderr)
    assert fit.error("intercept") == pytest.approx(reference.intercept_stderr)


def test_linear_fit_input_errors():
    with pytest.raises(DomainError):
        linear_fit([1.0], [2.0])
    with pytest.raises(DomainError):
        linear_fit([1.0, 2.0], [2.0])
    with pytest.raises(DomainError):
        linear_fit([1.0, math.nan], [2.0, 3.0])


def test_spin_dispersion_from_scattered_points():
    rng = np.random.default_rng(12)
    B = np.array([0.30, 0.35, 0.40, 0.45, 0.50])
    omega = 26.8e9 * B - 2 * 37e6 + 10e6 * rng.standard_normal(B.size)
    fit = fit_spin_dispersion(list(zip(B, omega)))
    assert fit.names == ("gamma_e", "D")
    assert abs(fit.value("gamma_e") - 26.8e9) <= 0.2e9
    assert abs(fit.value("D") - 37e6) <= 50e6


def test_spin_dispersion_from_two_exact_points():
    points = [(0.40, 28e9 * 0.40 - 4.02e6), (0.45, 28e9 * 0.45 - 4.02e6)]
    fit = fit_spin_dispersion(points)
    assert fit.value("gamma_e") == pytest.approx(28e9, rel=1e-12)
    assert fit.value("D") == pytest.approx(2.01e6, rel=1e-6)
    assert fit.residual_norm == pytest.approx(0.0, abs=1e-3)
    np.testing.assert_array_equal(fit.covariance, np.zeros((2, 2)))


def test_spin_dispersion_needs_distinct_fields():
    with pytest.raises(RankDeficiencyError):
        fit_spin_dispersion([(0.45, 12.6e9), (0.45, 12.7e9), (0.45, 12.5e9)])


def test_arrhenius_slope_gives_the_activation_energy():
    T = np.array([10.0, 20.0, 40.0, 80.0, 160.0])
    ratio = 0.8 * np.exp(-46.77 / T)
    fit = arrhenius_fit(list(zip(T, ratio)))
    assert fit.value("slope_K") == pytest.approx(-46.77, rel=1e-9)
    assert fit.value("activation_energy_meV") == pytest.approx(4.03, rel=0.005)


def test_arrhenius_recovers_an_exact_exponential():
    energy_mev = 5.0
    slope = -energy_mev * 1e-3 * CONSTANTS.e / CONSTANTS.kB
    assert slope == pytest.approx(-58.03, abs=0.01)
    T = np.linspace(5.0, 100.0, 12)
    fit = arrhenius_fit(list(zip(T, np.exp(slope / T))))
    assert fit.value("slope_K") == pytest.approx(slope, rel=1e-9)
    assert fit.value("activation_energy_meV") == pytest.approx(energy_mev, rel=1e-9)
    assert fit.value("intercept") == pytest.approx(0.0, abs=1e-9)


def test_constant_ratio_has_no_activation_energy():
    fit = arrhenius_fit([(10.0, 0.5), (20.0, 0.5), (30.0, 0.5)])
    assert fit.value("slope_K") == pytest.approx(0.0, abs=1e-9)
    assert fit.value("activation_energy_meV") == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize(
    "points", [[(10.0, 0.5), (20.0, 0.0)], [(0.0, 0.5), (20.0, 0.4)]]
)
def test_arrhenius_rejects_non_positive_values(points):
    with pytest.raises(DomainError):
        arrhenius_fit(points)

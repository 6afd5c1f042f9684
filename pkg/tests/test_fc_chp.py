import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fcp2p import fc_chp
from fcp2p.errors import DomainError, ValidationError
from fcp2p.fc_chp import FuelCellCurve, LinearFit, ThermalParams

CURVE = FuelCellCurve()  # k_e=4, eta_e 0.20 -> 0.39, k_hr=4, eta_hr 0.25 -> 0.37, 0.7 kW
THERMAL = ThermalParams()


def test_efficiency_endpoints_exact():
    assert fc_chp.eta_electric(CURVE, 0.0) == pytest.approx(0.20, abs=1e-15)
    assert fc_chp.eta_electric(CURVE, 0.7) == pytest.approx(0.39, abs=1e-15)
    assert fc_chp.eta_heat(CURVE, 0.0) == pytest.approx(0.25, abs=1e-15)
    assert fc_chp.eta_heat(CURVE, 0.7) == pytest.approx(0.37, abs=1e-15)


def test_eta_electric_midpoint():
    b = 0.19 / (1 - math.exp(-4))
    expected = b + 0.20 - b * math.exp(-2)
    assert fc_chp.eta_electric(CURVE, 0.35) == pytest.approx(expected, rel=1e-14)
    assert fc_chp.eta_electric(CURVE, 0.35) == pytest.approx(0.36732, abs=1e-4)


def test_eta_heat_matches_reimplementation():
    curve = FuelCellCurve(k_hr=3.1, eta_hr_0=0.3, eta_hr_max=0.45)
    p = np.linspace(0, 0.7, 11)
    b = (0.45 - 0.3) / (1 - np.exp(-3.1))
    assert_allclose(fc_chp.eta_heat(curve, p), b + 0.3 - b * np.exp(-3.1 * p / 0.7), rtol=1e-14)


@pytest.mark.parametrize("p", [-0.01, 0.71, float("nan")])
def test_power_out_of_domain(p):
    with pytest.raises(DomainError):
        fc_chp.eta_electric(CURVE, p)


@pytest.mark.parametrize("kwargs", [
    dict(eta_e_0=0.4, eta_e_max=0.39),
    dict(k_e=0.0),
    dict(p_fc_hw_min=0.7),
    dict(eta_g2h=1.2),
    dict(eta_hr_max=1.0),
])
def test_curve_validation(kwargs):
    with pytest.raises(ValidationError):
        FuelCellCurve(**kwargs)


def test_thermal_validation():
    with pytest.raises(ValidationError):
        ThermalParams(t_ht=10.0, t_cn=15.0)
    with pytest.raises(ValidationError):
        ThermalParams(dt=0.0)


def test_efficiencies_strictly_increasing():
    p = np.linspace(0, 0.7, 500)
    assert np.all(np.diff(fc_chp.eta_electric(CURVE, p)) > 0)
    assert np.all(np.diff(fc_chp.eta_heat(CURVE, p)) > 0)


def test_gas_energy_exact():
    assert fc_chp.gas_energy(CURVE, THERMAL, 0.0) == 0.0
    # 0.7 * 0.5 * 3.6 / (0.39 * 0.95)
    assert fc_chp.gas_energy(CURVE, THERMAL, 0.7) == pytest.approx(3.4008, abs=1e-4)


def test_gas_energy_linearized_reference_fit():
    fit = LinearFit(2.042, 0.06323, (0.21, 0.7))
    assert fc_chp.gas_energy(CURVE, THERMAL, 0.7, "linearized", fit) == pytest.approx(2.8281, abs=1e-4)


def test_linearized_needs_fit():
    with pytest.raises(ValidationError):
        fc_chp.gas_energy(CURVE, THERMAL, 0.5, "linearized")


def test_gas_cost():
    assert fc_chp.gas_cost(THERMAL, 0.0) == 0.0
    assert fc_chp.gas_cost(THERMAL, 2.0) == pytest.approx(2 * 1.2237)
    with pytest.raises(DomainError):
        fc_chp.gas_cost(THERMAL, -1.0)


def test_unit_gas_cost_pair():
    assert fc_chp.unit_gas_cost(CURVE, THERMAL, 0.39) == pytest.approx(11.89, abs=5e-3)
    # the efficiency product that prices a kWh at 20.31 JPY
    prod = THERMAL.p_gas * THERMAL.xi_e / 20.31
    assert prod == pytest.approx(0.21689, abs=2e-5)


def test_hot_water_reference_fit():
    zeta = THERMAL.zeta(0.95)
    assert zeta == pytest.approx(9.0527, abs=1e-4)
    fit = LinearFit(0.9439, 0.006502, (0.21, 0.7))
    assert fc_chp.hot_water_charged(CURVE, THERMAL, 0.7, "linearized", fit) == pytest.approx(6.041, abs=1e-3)
    assert fc_chp.hot_water_charged(CURVE, THERMAL, 0.0) == 0.0


def test_hot_water_fit_residual_bound():
    fits = fc_chp.fit_curves(CURVE)
    zeta = THERMAL.zeta(CURVE.eta_g2h)
    exact = fc_chp.hot_water_charged(CURVE, THERMAL, 0.7)
    lin = fc_chp.hot_water_charged(CURVE, THERMAL, 0.7, "linearized", fits.hot_water)
    assert abs(exact - lin) <= zeta * fits.hot_water.max_abs_residual + 1e-12


def test_fit_exact_line():
    x = np.linspace(0.1, 0.7, 9)
    fit = fc_chp.fit_linearization(np.column_stack([x, 2 * x + 1]))
    assert fit.alpha == pytest.approx(2.0, abs=1e-12)
    assert fit.beta == pytest.approx(1.0, abs=1e-12)
    assert fit.max_abs_residual < 1e-12


def test_fit_degenerate():
    with pytest.raises(ValidationError):
        fc_chp.fit_linearization([(0.3, 1.0), (0.3, 2.0)])
    with pytest.raises(ValidationError):
        fc_chp.fit_linearization([(0.3, 1.0)])


def test_fit_matches_normal_equations():
    rng = np.random.default_rng(7)
    for _ in range(20):
        x = rng.uniform(0, 1, 30)
        y = rng.normal(size=30)
        fit = fc_chp.fit_linearization(np.column_stack([x, y]))
        n, sx, sy = len(x), x.sum(), y.sum()
        sxx, sxy = (x * x).sum(), (x * y).sum()
        alpha = (n * sxy - sx * sy) / (n * sxx - sx * sx)
        beta = (sy - alpha * sx) / n
        assert_allclose([fit.alpha, fit.beta], [alpha, beta], atol=1e-10)


def test_linearized_gas_is_affine_exact_is_not():
    fit = fc_chp.fit_curves(CURVE).gas
    p1, p2 = 0.1, 0.6
    mid = 0.5 * (p1 + p2)
    lin = lambda p: fc_chp.gas_energy(CURVE, THERMAL, p, "linearized", fit)
    ex = lambda p: fc_chp.gas_energy(CURVE, THERMAL, p)
    assert lin(mid) == pytest.approx(0.5 * (lin(p1) + lin(p2)), rel=1e-13)
    assert abs(ex(mid) - 0.5 * (ex(p1) + ex(p2))) > 1e-4


@settings(max_examples=50, deadline=None)
@given(k=st.floats(0.5, 8), e0=st.floats(0.1, 0.3), de=st.floats(0.02, 0.3),
       h0=st.floats(0.1, 0.3), dh=st.floats(0.0, 0.3))
def test_endpoint_identity_any_curve(k, e0, de, h0, dh):
    curve = FuelCellCurve(k_e=k, eta_e_0=e0, eta_e_max=e0 + de, k_hr=k, eta_hr_0=h0,
                          eta_hr_max=h0 + dh)
    assert_allclose(fc_chp.eta_electric(curve, np.array([0.0, 0.7])), [e0, e0 + de], atol=1e-14)
    assert_allclose(fc_chp.eta_heat(curve, np.array([0.0, 0.7])), [h0, h0 + dh], atol=1e-14)


def test_default_fits_quality():
    fits = fc_chp.fit_curves(CURVE)
    assert fits.gas.fit_range == pytest.approx((0.21, 0.7))
    assert fc_chp.max_relative_error(fits.gas, fc_chp.gas_ratio_samples(CURVE)) < 0.05
    assert fc_chp.max_relative_error(fits.hot_water, fc_chp.hot_water_ratio_samples(CURVE)) < 0.05

"""
SOFC-CHP unit model.

Exponential power / heat-recovery efficiency curves, gas energy and cost,
hot water charged to the storage tank, and the affine fits used to make the
per-step dispatch problem convex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Optional

import numpy as np

from fcp2p.errors import DomainError, ValidationError

Mode = Literal["exact", "linearized"]

# relative slack when checking 0 <= p <= p_fc_max
_P_TOL = 1e-12


@dataclass(frozen=True)
class FuelCellCurve:
    """Efficiency-curve parameters and hardware limits of one FC-CHP unit.

    Efficiencies follow ``eta(p) = a - b * exp(-k * p / p_fc_max)`` with
    ``b = (eta_max - eta_0) / (1 - exp(-k))`` and ``a = b + eta_0``.
    """

    k_e: float = 4.0
    eta_e_0: float = 0.20
    eta_e_max: float = 0.39
    k_hr: float = 4.0
    eta_hr_0: float = 0.25
    eta_hr_max: float = 0.37
    p_fc_max: float = 0.7
    p_fc_hw_min: float = 0.05
    eta_g2h: float = 0.95

    def __post_init__(self):
        problems = []
        if not 0 < self.eta_e_0 < self.eta_e_max < 1:
            problems.append("need 0 < eta_e_0 < eta_e_max < 1")
        if not (0 < self.eta_hr_0 and self.eta_hr_max < 1):
            problems.append("need 0 < eta_hr_0 and eta_hr_max < 1")
        if self.k_e <= 0 or self.k_hr <= 0:
            problems.append("curve rates k_e, k_hr must be positive")
        if not 0 <= self.p_fc_hw_min < self.p_fc_max:
            problems.append("need 0 <= p_fc_hw_min < p_fc_max")
        if not 0 < self.eta_g2h <= 1:
            problems.append("need 0 < eta_g2h <= 1")
        if problems:
            raise ValidationError("invalid FuelCellCurve: " + "; ".join(problems))

    @property
    def b_e(self) -> float:
        return (self.eta_e_max - self.eta_e_0) / (1.0 - math.exp(-self.k_e))

    @property
    def a_e(self) -> float:
        return self.b_e + self.eta_e_0

    @property
    def b_hr(self) -> float:
        return (self.eta_hr_max - self.eta_hr_0) / (1.0 - math.exp(-self.k_hr))

    @property
    def a_hr(self) -> float:
        return self.b_hr + self.eta_hr_0


@dataclass(frozen=True)
class ThermalParams:
    """Time step, unit conversions, tank temperatures and gas price."""

    dt: float = 0.5  # h
    xi_e: float = 3.6  # MJ/kWh
    q_w: float = 0.004186  # MJ/(l degC)
    t_ht: float = 65.0
    t_cn: float = 15.0
    p_gas: float = 1.2237  # JPY/MJ

    def __post_init__(self):
        problems = []
        if self.dt <= 0:
            problems.append("dt must be positive")
        if self.xi_e <= 0:
            problems.append("xi_e must be positive")
        if self.q_w <= 0:
            problems.append("q_w must be positive")
        if self.t_ht <= self.t_cn:
            problems.append("need t_ht > t_cn")
        if self.p_gas < 0:
            problems.append("p_gas must be nonnegative")
        if problems:
            raise ValidationError("invalid ThermalParams: " + "; ".join(problems))

    def zeta(self, eta_g2h: float) -> float:
        """Litres of hot water per kWh of (eta_hr/eta_e)-weighted FC output."""
        return self.dt * self.xi_e / (self.q_w * (self.t_ht - self.t_cn) * eta_g2h)


@dataclass(frozen=True)
class LinearFit:
    """Affine approximation ``alpha * p + beta`` of a nonlinear FC quantity."""

    alpha: float
    beta: float
    fit_range: tuple[float, float]
    max_abs_residual: float = 0.0

    def __post_init__(self):
        lo, hi = self.fit_range
        if not lo < hi:
            raise ValidationError(f"fit_range lower must be < upper, got {self.fit_range}")
        if self.max_abs_residual < 0:
            raise ValidationError("max_abs_residual must be >= 0")

    def __call__(self, p):
        return self.alpha * p + self.beta

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "fit_range": list(self.fit_range),
            "max_abs_residual": self.max_abs_residual,
        }


def _check_power(curve: FuelCellCurve, p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    slack = _P_TOL * curve.p_fc_max
    if np.any(~np.isfinite(arr)) or np.any(arr < -slack) or np.any(arr > curve.p_fc_max + slack):
        raise DomainError(f"FC power {p!r} outside [0, {curve.p_fc_max}] kW")
    return arr


def _scalar_or_array(value: np.ndarray, like):
    return float(value) if np.ndim(like) == 0 else value


def eta_electric(curve: FuelCellCurve, p):
    """Electric efficiency at output power `p` (kW); accepts scalars or arrays."""
    arr = _check_power(curve, p)
    val = curve.a_e - curve.b_e * np.exp(-curve.k_e * arr / curve.p_fc_max)
    return _scalar_or_array(val, p)


def eta_heat(curve: FuelCellCurve, p):
    """Heat-recovery efficiency at output power `p` (kW)."""
    arr = _check_power(curve, p)
    val = curve.a_hr - curve.b_hr * np.exp(-curve.k_hr * arr / curve.p_fc_max)
    return _scalar_or_array(val, p)


def _require_fit(mode: Mode, fit: Optional[LinearFit]) -> None:
    if mode == "linearized" and fit is None:
        raise ValidationError("linearized mode needs a LinearFit")
    if mode not in ("exact", "linearized"):
        raise ValidationError(f"unknown mode {mode!r}")


def gas_energy(curve: FuelCellCurve, thermal: ThermalParams, p, mode: Mode = "exact",
               fit: Optional[LinearFit] = None):
    """
    Gas energy (MJ) drawn by the FC over one step at output `p` kW.

    Parameters
    ----------
    curve, thermal :
        Unit and environment parameters.
    p : float or ndarray
        FC output power in ``[0, p_fc_max]``.
    mode : {"exact", "linearized"}
        ``exact`` uses ``p / eta_electric(p)``; ``linearized`` replaces that
        ratio with ``fit.alpha * p + fit.beta``.
    fit : LinearFit, optional
        Required in linearized mode.
    """
    _require_fit(mode, fit)
    arr = _check_power(curve, p)
    scale = thermal.dt * thermal.xi_e / curve.eta_g2h
    if mode == "exact":
        val = arr * scale / (curve.a_e - curve.b_e * np.exp(-curve.k_e * arr / curve.p_fc_max))
    else:
        val = (fit.alpha * arr + fit.beta) * scale
    return _scalar_or_array(val, p)


def gas_cost(thermal: ThermalParams, energy):
    """Cost in JPY of `energy` MJ of gas."""
    if np.any(np.asarray(energy) < 0):
        raise DomainError("gas energy must be nonnegative")
    return thermal.p_gas * energy


def unit_gas_cost(curve: FuelCellCurve, thermal: ThermalParams, eta_e: float) -> float:
    """JPY per kWh of electricity at electric efficiency `eta_e`."""
    return thermal.p_gas * thermal.xi_e / (eta_e * curve.eta_g2h)


def gas_slope(fit: LinearFit, thermal: ThermalParams, eta_g2h: float) -> float:
    """JPY per kW of extra FC output over one step under the linearized gas model."""
    return thermal.p_gas * fit.alpha * thermal.dt * thermal.xi_e / eta_g2h


def hot_water_charged(curve: FuelCellCurve, thermal: ThermalParams, p, mode: Mode = "exact",
                      fit: Optional[LinearFit] = None):
    """Litres of hot water charged to the tank over one step at output `p` kW."""
    _require_fit(mode, fit)
    arr = _check_power(curve, p)
    zeta = thermal.zeta(curve.eta_g2h)
    if mode == "exact":
        e = curve.a_e - curve.b_e * np.exp(-curve.k_e * arr / curve.p_fc_max)
        h = curve.a_hr - curve.b_hr * np.exp(-curve.k_hr * arr / curve.p_fc_max)
        val = zeta * h / e * arr
    else:
        val = zeta * (fit.alpha * arr + fit.beta)
    return _scalar_or_array(val, p)


def fit_linearization(samples: Iterable[tuple[float, float]]) -> LinearFit:
    """Ordinary least-squares line through ``(power, value)`` samples.

    Raises ValidationError when fewer than two distinct abscissae are given.
    """
    pts = np.asarray(list(samples), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValidationError("need at least two (power, value) samples")
    x, y = pts[:, 0], pts[:, 1]
    if np.ptp(x) == 0:
        raise ValidationError("degenerate samples: all power values are equal")
    design = np.column_stack([x, np.ones_like(x)])
    (alpha, beta), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = np.abs(design @ np.array([alpha, beta]) - y).max()
    return LinearFit(float(alpha), float(beta), (float(x.min()), float(x.max())), float(resid))


def default_fit_range(curve: FuelCellCurve) -> tuple[float, float]:
    return (0.3 * curve.p_fc_max, curve.p_fc_max)


def gas_ratio_samples(curve: FuelCellCurve, fit_range=None, num: int = 200) -> np.ndarray:
    """Samples of ``p / eta_electric(p)`` over `fit_range`."""
    lo, hi = fit_range or default_fit_range(curve)
    p = np.linspace(lo, hi, num)
    return np.column_stack([p, p / eta_electric(curve, p)])


def hot_water_ratio_samples(curve: FuelCellCurve, fit_range=None, num: int = 200) -> np.ndarray:
    """Samples of ``eta_heat(p) / eta_electric(p) * p`` over `fit_range`."""
    lo, hi = fit_range or default_fit_range(curve)
    p = np.linspace(lo, hi, num)
    return np.column_stack([p, eta_heat(curve, p) / eta_electric(curve, p) * p])


@dataclass(frozen=True)
class CurveFits:
    gas: LinearFit  # p / eta_e(p)  ~ alpha_fc p + beta_fc
    hot_water: LinearFit  # eta_hr/eta_e * p  ~ alpha_wt p + beta_wt


def fit_curves(curve: FuelCellCurve, fit_range=None, num: int = 200) -> CurveFits:
    """Both linearizations of `curve` over `fit_range` (default ``[0.3 p_max, p_max]``)."""
    return CurveFits(
        gas=fit_linearization(gas_ratio_samples(curve, fit_range, num)),
        hot_water=fit_linearization(hot_water_ratio_samples(curve, fit_range, num)),
    )


def max_relative_error(fit: LinearFit, samples: np.ndarray) -> float:
    """Worst fit error as a fraction of the sampled quantity's range."""
    x, y = samples[:, 0], samples[:, 1]
    span = np.ptp(y)
    err = np.abs(fit(x) - y).max()
    return float(err / span) if span > 0 else float(err)

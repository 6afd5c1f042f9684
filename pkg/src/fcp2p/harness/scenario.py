"""
Scenario files: per-dwelling cost coefficients, FC hardware, thermal and
ADMM settings, optional per-step trading graphs.

Format (YAML)::

    name: canonical_6house
    gamma: 0.5                      # trading implementation rate, b_hat = b_tilde + gamma
    sign_constraint: componentwise  # or "total"
    fit_range: [0.21, 0.7]          # optional, default [0.3 p_max, p_max]
    thermal: {dt: 0.5, p_gas: 1.2237}
    curve: {p_fc_max: 0.7}          # defaults for every dwelling
    admm: {rho: 10, kappa: 0.5}
    dwellings:
      - a: 10
        b_tilde: {buyer: 12.2, seller: 27.5}   # or one number for both roles
        c: 0
        curve: {k_e: 4.5}                      # optional per-dwelling override
    adjacency:                      # optional, 1-based house ids per step
      8: [[1, 3], [2, 4]]
    surcharge:                      # optional d_ij, 1-based
      - {from: 1, to: 3, d: 0.2}
    reference: {unit_gas_cost_low: 11.89, unit_gas_cost_high: 20.31}
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from fcp2p import fc_chp
from fcp2p.admm.params import AdmmParams, validate_params
from fcp2p.errors import ValidationError
from fcp2p.fc_chp import FuelCellCurve, ThermalParams
from fcp2p.market import MarketStep, build_market_step

_TOP_KEYS = {"name", "gamma", "sign_constraint", "fit_range", "thermal", "curve", "admm",
             "dwellings", "adjacency", "surcharge", "reference"}
_DWELLING_KEYS = {"a", "b_tilde", "c", "curve", "label"}


@dataclass(frozen=True)
class DwellingConfig:
    a: float
    b_tilde_buyer: float
    b_tilde_seller: float
    c: float = 0.0
    curve: FuelCellCurve = field(default_factory=FuelCellCurve)
    label: str = ""


@dataclass(frozen=True)
class Scenario:
    dwellings: tuple[DwellingConfig, ...]
    name: str = "scenario"
    gamma: float = 0.0
    thermal: ThermalParams = field(default_factory=ThermalParams)
    admm: AdmmParams = field(default_factory=AdmmParams)
    sign_constraint: str = "componentwise"
    fit_range: Optional[tuple[float, float]] = None
    adjacency: dict = field(default_factory=dict)  # step -> 0-based edge list
    surcharge: dict = field(default_factory=dict)  # (i, j) -> d_ij, 0-based
    reference: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.dwellings)

    @cached_property
    def fits(self) -> tuple[fc_chp.CurveFits, ...]:
        cache: dict = {}
        out = []
        for d in self.dwellings:
            if d.curve not in cache:
                cache[d.curve] = fc_chp.fit_curves(d.curve, self.fit_range)
            out.append(cache[d.curve])
        return tuple(out)

    def b_hat(self, role: str) -> np.ndarray:
        attr = "b_tilde_buyer" if role == "buyer" else "b_tilde_seller"
        return np.array([getattr(d, attr) for d in self.dwellings]) + self.gamma

    def market_step(self, step: int, demands) -> MarketStep:
        """Build the market for 1-based `step` from one row of demands."""
        demands = np.asarray(demands, dtype=float)
        if len(demands) != self.n:
            raise ValidationError(f"step {step}: {len(demands)} demands for {self.n} dwellings")
        return build_market_step(
            step, demands, [d.curve for d in self.dwellings], self.thermal,
            [f.gas for f in self.fits], [d.a for d in self.dwellings],
            self.b_hat("buyer"), self.b_hat("seller"), [d.c for d in self.dwellings],
            adjacency=self.adjacency.get(step), surcharge=self.surcharge,
            sign_mode=self.sign_constraint,
        )

    def duplicated(self, factor: int) -> "Scenario":
        """Every dwelling repeated `factor` times (per-step graphs are dropped)."""
        if factor < 1:
            raise ValidationError("duplication factor must be >= 1")
        return Scenario(self.dwellings * factor, f"{self.name}_x{factor}", self.gamma,
                        self.thermal, self.admm, self.sign_constraint, self.fit_range,
                        {}, {}, dict(self.reference))


def _dataclass_from(cls, data, where: str, base=None):
    if data is None:
        return base if base is not None else cls()
    if not isinstance(data, dict):
        raise ValidationError(f"{where}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"{where}: unknown keys {sorted(unknown)}")
    merged = {f.name: getattr(base, f.name) for f in fields(cls)} if base is not None else {}
    merged.update({k: float(v) for k, v in data.items()})
    return cls(**merged)


def _edges(raw, n: int, where: str) -> list[tuple[int, int]]:
    out = []
    for pair in raw:
        if len(pair) != 2:
            raise ValidationError(f"{where}: edges must be [i, j] pairs")
        i, j = int(pair[0]) - 1, int(pair[1]) - 1
        if not (0 <= i < n and 0 <= j < n):
            raise ValidationError(f"{where}: house id out of range in {pair}")
        out.append((i, j))
    return out


def scenario_from_dict(data: dict) -> Scenario:
    """Validate a parsed scenario mapping; raises ValidationError with the offending key."""
    if not isinstance(data, dict):
        raise ValidationError("scenario must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown scenario keys {sorted(unknown)}")
    raw_dw = data.get("dwellings")
    if not raw_dw:
        raise ValidationError("scenario needs a non-empty 'dwellings' list")
    base_curve = _dataclass_from(FuelCellCurve, data.get("curve"), "curve")
    dwellings = []
    for k, d in enumerate(raw_dw, start=1):
        where = f"dwellings[{k}]"
        if not isinstance(d, dict) or "a" not in d or "b_tilde" not in d:
            raise ValidationError(f"{where}: needs 'a' and 'b_tilde'")
        extra = set(d) - _DWELLING_KEYS
        if extra:
            raise ValidationError(f"{where}: unknown keys {sorted(extra)}")
        bt = d["b_tilde"]
        if isinstance(bt, dict):
            if set(bt) != {"buyer", "seller"}:
                raise ValidationError(f"{where}: b_tilde mapping needs exactly buyer and seller")
            bb, bs = float(bt["buyer"]), float(bt["seller"])
        else:
            bb = bs = float(bt)
        if float(d["a"]) <= 0:
            raise ValidationError(f"{where}: a must be > 0")
        curve = _dataclass_from(FuelCellCurve, d.get("curve"), f"{where}.curve", base_curve)
        dwellings.append(DwellingConfig(float(d["a"]), bb, bs, float(d.get("c", 0.0)), curve,
                                        str(d.get("label", f"house_{k}"))))
    n = len(dwellings)

    admm_raw = data.get("admm") or {}
    admm = AdmmParams.from_dict(admm_raw)
    problems = validate_params(admm)
    if problems:
        raise ValidationError("admm: " + "; ".join(problems))

    sign = data.get("sign_constraint", "componentwise")
    if sign not in ("componentwise", "total"):
        raise ValidationError(f"sign_constraint must be componentwise or total, got {sign!r}")
    fit_range = data.get("fit_range")
    if fit_range is not None:
        if len(fit_range) != 2:
            raise ValidationError("fit_range must be [lo, hi]")
        fit_range = (float(fit_range[0]), float(fit_range[1]))

    adjacency = {int(step): _edges(edges, n, f"adjacency[{step}]")
                 for step, edges in (data.get("adjacency") or {}).items()}
    surcharge = {}
    for item in data.get("surcharge") or []:
        (i, j), = _edges([[item["from"], item["to"]]], n, "surcharge")
        surcharge[(i, j)] = float(item["d"])

    return Scenario(
        dwellings=tuple(dwellings), name=str(data.get("name", "scenario")),
        gamma=float(data.get("gamma", 0.0)),
        thermal=_dataclass_from(ThermalParams, data.get("thermal"), "thermal"),
        admm=admm, sign_constraint=sign, fit_range=fit_range, adjacency=adjacency,
        surcharge=surcharge, reference=dict(data.get("reference") or {}),
    )


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ValidationError(f"{path}: not valid YAML ({exc})") from exc
    return scenario_from_dict(data)


def canonical_scenario_path() -> Path:
    return Path(str(resources.files("fcp2p") / "data" / "canonical_6house.yaml"))


def canonical_scenario() -> Scenario:
    """The shipped 6-house scenario."""
    return load_scenario(canonical_scenario_path())

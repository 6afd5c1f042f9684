"""Day-ahead demand series: CSV I/O, the canonical 6-house day and a synthetic generator."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from fcp2p.errors import ValidationError

STEPS_PER_DAY = 48

# 1-based step -> (sellers, buyers), 1-based house ids, for the 6-house day
ROLE_TABLE: dict[int, tuple[tuple[int, ...], tuple[int, ...]]] = {}
for _steps, _sellers, _buyers in [
    ((2, 16, 32, 33, 36, 37, 38, 47), (2, 3, 4, 5, 6), (1,)),
    ((6, 27, 28), (1, 2, 4, 5, 6), (3,)),
    ((7,), (1, 4, 5, 6), (2, 3)),
    ((8,), (1, 2, 5), (3, 4, 6)),
    ((9, 10), (1, 2, 4, 5), (3, 6)),
    ((11,), (1, 2), (3, 4, 5, 6)),
    ((12,), (2,), (1, 3, 4, 5, 6)),
    ((13,), (2, 3, 5), (1, 4, 6)),
    ((14, 15), (2, 3), (1, 4, 5, 6)),
    ((17,), (2, 3, 5, 6), (1, 4)),
    ((18, 19, 20, 21), (1, 2, 3, 5, 6), (4,)),
    ((29,), (2, 4, 5, 6), (1, 3)),
    ((42, 43), (1, 3, 4, 5, 6), (2,)),
    ((44,), (1, 3, 4, 6), (2, 5)),
    ((45,), (1, 2, 3, 4, 6), (5,)),
    ((46,), (2, 3, 4, 6), (1, 5)),
]:
    for _s in _steps:
        ROLE_TABLE[_s] = (_sellers, _buyers)

# slot 8: seller capacities 492/14/168 W, buyer deficits 254/68/30 W
SLOT8_DEMAND = (0.208, 0.686, 0.954, 0.768, 0.532, 0.730)


@dataclass
class DemandSeries:
    """Per-step demand in kW, shape ``(steps, n)``; row ``k`` is step ``k + 1``."""

    demand: np.ndarray
    dt: float = 0.5
    labels: tuple = field(default=())

    def __post_init__(self):
        self.demand = np.asarray(self.demand, dtype=float)
        if self.demand.ndim != 2:
            raise ValidationError("demand must be a (steps, houses) array")
        bad = ~np.isfinite(self.demand) | (self.demand < 0)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise ValidationError(f"step {row + 1}, house {col + 1}: demand must be finite and >= 0")
        if not self.labels:
            self.labels = tuple(f"house_{k}" for k in range(1, self.n + 1))
        if len(self.labels) != self.n:
            raise ValidationError("one label per house required")

    @property
    def n(self) -> int:
        return self.demand.shape[1]

    @property
    def steps(self) -> int:
        return self.demand.shape[0]

    def at(self, step: int) -> np.ndarray:
        """Demands at 1-based `step`."""
        return self.demand[step - 1]

    def duplicated(self, factor: int) -> "DemandSeries":
        return DemandSeries(np.tile(self.demand, (1, factor)), self.dt)


def load_demand_csv(path, steps: int = STEPS_PER_DAY) -> DemandSeries:
    """
    Read ``step,house_1,...,house_n`` with one row per step.

    Raises
    ------
    ValidationError
        Wrong header, wrong row count, unparsable, negative or NaN values;
        messages name the offending data row (1-based, header excluded).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    n = len(header) - 1
    if n < 1 or header[0] != "step" or header[1:] != [f"house_{k}" for k in range(1, n + 1)]:
        raise ValidationError(f"{path}: header must be step,house_1..house_n, got {','.join(header)}")
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    if len(body) != steps:
        raise ValidationError(f"{path}: expected {steps} rows, found {len(body)}")
    data = np.empty((steps, n))
    for k, row in enumerate(body, start=1):
        if len(row) != n + 1:
            raise ValidationError(f"{path}: row {k} has {len(row)} fields, expected {n + 1}")
        try:
            step = int(row[0])
            vals = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ValidationError(f"{path}: row {k}: {exc}") from exc
        if step != k:
            raise ValidationError(f"{path}: row {k} has step {step}, expected {k}")
        for col, v in enumerate(vals, start=1):
            if not np.isfinite(v) or v < 0:
                raise ValidationError(f"{path}: row {k}, house_{col}: invalid demand {v}")
        data[k - 1] = vals
    return DemandSeries(data)


def write_demand_csv(series: DemandSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step"] + [f"house_{k}" for k in range(1, series.n + 1)])
        for k, row in enumerate(series.demand, start=1):
            w.writerow([k] + [repr(float(v)) for v in row])


def roles_at(series: DemandSeries, step: int, p_fc_max: float = 0.7):
    """1-based (sellers, buyers) at `step`."""
    d = series.at(step)
    sellers = tuple(int(k) + 1 for k in np.flatnonzero(d < p_fc_max))
    buyers = tuple(int(k) + 1 for k in np.flatnonzero(d > p_fc_max))
    return sellers, buyers


def canonical_day_demand(seed: int = 2019, p_fc_max: float = 0.7) -> DemandSeries:
    """
    Six-house day whose per-step buyer/seller sets follow :data:`ROLE_TABLE`.

    Sellers draw from ``[0.15, 0.62]`` kW and buyers from ``[0.74, 1.05]`` kW;
    steps missing from the table have sellers only. Step 8 uses
    :data:`SLOT8_DEMAND` exactly, and at step 12 the lone seller has only
    80 W to spare so some buyers must fall back on the grid.
    """
    rng = np.random.default_rng(seed)
    demand = rng.uniform(0.15, 0.62, size=(STEPS_PER_DAY, 6))
    for step, (_, buyers) in ROLE_TABLE.items():
        for h in buyers:
            demand[step - 1, h - 1] = rng.uniform(0.74, 1.05)
    demand[7] = SLOT8_DEMAND
    demand[11, 1] = p_fc_max - 0.08
    return DemandSeries(np.round(demand, 3))


def canonical_demand_path() -> Path:
    return Path(str(resources.files("fcp2p") / "data" / "canonical_day.csv"))


def generate_synthetic_demand(n: int, seed: int, peak_prob: float = 0.3,
                              p_fc_max: float = 0.7, floor: float = 0.05,
                              steps: int = STEPS_PER_DAY) -> DemandSeries:
    """
    Reproducible synthetic household demand.

    Base load per house and step is
    ``p_fc_max * (0.2 + 0.45 * shape(t) + N(0, 0.05))`` clipped to
    ``[floor, 0.95 p_fc_max]``, where ``shape`` has a morning bump around
    07:30 and a larger evening bump around 19:30. During the peak windows
    (06:00-09:00 and 17:00-22:00) each house independently exceeds rated
    power with probability `peak_prob`, drawing ``U(1.05, 1.6) * p_fc_max``.

    Parameters
    ----------
    n : int
        Number of houses.
    seed : int
    peak_prob : float
        In ``[0, 1]``; 0 keeps every demand below rated power.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    if not 0 <= peak_prob <= 1:
        raise ValidationError("peak_prob must be in [0, 1]")
    rng = np.random.default_rng(seed)
    hours = (np.arange(steps) + 0.5) * 24.0 / steps
    shape = 0.6 * np.exp(-((hours - 7.5) / 1.2) ** 2) + np.exp(-((hours - 19.5) / 1.8) ** 2)
    base = 0.2 + 0.45 * shape[:, None] + rng.normal(0.0, 0.05, size=(steps, n))
    demand = np.clip(p_fc_max * base, floor, 0.95 * p_fc_max)
    peak = ((hours >= 6) & (hours < 9)) | ((hours >= 17) & (hours < 22))
    spikes = (rng.random((steps, n)) < peak_prob) & peak[:, None]
    demand = np.where(spikes, p_fc_max * rng.uniform(1.05, 1.6, size=(steps, n)), demand)
    return DemandSeries(demand, dt=24.0 / steps)

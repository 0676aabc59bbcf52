"""Per-beam demand time series: CSV I/O and a synthetic diurnal generator."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_STEP_MINUTES = 2.0
DEFAULT_N_STEPS = 1440

# Generator shape, as fractions of peak demand and hours of the day.
BASELINE_FRACTION = 0.2
PEAK_HOURS = (9.0, 19.0)
PEAK_WIDTH_HOURS = 1.25
PHASE_JITTER_HOURS = 2.0
AMPLITUDE_RANGE = (0.5, 1.0)
NOISE_SIGMA = 0.05


class DemandParseError(ValueError):
    pass


@dataclass(frozen=True)
class DemandSeries:
    """Demand in bps, ``values[t, b]`` for timestep ``t`` and beam ``b``."""

    values: np.ndarray
    step_minutes: float = DEFAULT_STEP_MINUTES
    names: tuple = field(default=())

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.size == 0:
            raise ValueError(f"demand must be a non-empty 2-D matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("demand values must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"beam_{b}" for b in range(values.shape[1])))

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_beams(self) -> int:
        return self.values.shape[1]

    def window(self, start: int, stop: int) -> "DemandSeries":
        return DemandSeries(self.values[start:stop], self.step_minutes, self.names)


def load_csv(path, step_minutes: float = DEFAULT_STEP_MINUTES) -> DemandSeries:
    """Read a demand matrix; row = timestep, column = beam.

    A first row that does not parse as numbers is taken as a header.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DemandParseError(f"{path}: empty demand file")

    names = ()
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        names = tuple(c.strip() for c in rows[0])
        rows = rows[1:]
        if not rows:
            raise DemandParseError(f"{path}: header but no data rows")

    width = len(names) if names else len(rows[0])
    first_data_row = 2 if names else 1
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        lineno = i + first_data_row
        if len(row) != width:
            raise DemandParseError(f"{path}: row {lineno} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DemandParseError(f"{path}: row {lineno}, column {j}: malformed number {cell!r}") from None
            if not np.isfinite(v) or v < 0:
                raise DemandParseError(f"{path}: row {lineno}, column {j}: invalid demand {cell!r}")
            values[i, j] = v
    return DemandSeries(values, step_minutes, names)


def save_csv(series: DemandSeries, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(series.names)
        for row in series.values:
            # repr of a float round-trips exactly
            writer.writerow([repr(float(v)) for v in row])


def diurnal_profile(hours: np.ndarray, offsets: np.ndarray, amplitudes: np.ndarray) -> np.ndarray:
    """Noise-free demand shape, in units of peak demand, ``[t, b]``."""
    out = np.full((hours.size, offsets.shape[0]), BASELINE_FRACTION)
    for k, centre in enumerate(PEAK_HOURS):
        mu = centre + offsets[:, k]
        # wrap to the nearest daily image of the peak
        dist = (hours[:, None] - mu[None, :] + 12.0) % 24.0 - 12.0
        out += amplitudes[None, :, k] * np.exp(-0.5 * (dist / PEAK_WIDTH_HOURS) ** 2)
    return out


def generate_synthetic(n_beams: int, n_steps: int = DEFAULT_N_STEPS,
                       step_minutes: float = DEFAULT_STEP_MINUTES, seed: int = 0,
                       peak_demand: float = 1.0, noise: bool = True) -> DemandSeries:
    """Baseline plus two Gaussian-shaped busy periods per day for each beam.

    Phase offsets, amplitudes and the multiplicative noise are drawn once
    per call from ``seed``.
    """
    if n_beams < 1 or n_steps < 1:
        raise ValueError("n_beams and n_steps must be at least 1")
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-PHASE_JITTER_HOURS, PHASE_JITTER_HOURS, size=(n_beams, len(PEAK_HOURS)))
    amplitudes = rng.uniform(*AMPLITUDE_RANGE, size=(n_beams, len(PEAK_HOURS)))
    hours = np.arange(n_steps) * step_minutes / 60.0
    values = diurnal_profile(hours, offsets, amplitudes)
    # the noise draw happens regardless so the shape draws match
    factor = 1.0 + NOISE_SIGMA * rng.standard_normal(values.shape)
    if noise:
        values = values * factor
    values = np.maximum(values * peak_demand, 0.0)
    return DemandSeries(values, step_minutes)

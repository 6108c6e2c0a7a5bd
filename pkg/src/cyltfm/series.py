"""Receiver time series and the error metrics used to compare them."""
from __future__ import annotations

from dataclasses import dataclass, field

import math

import numpy as np

__all__ = [
    "ConcentrationSeries",
    "normalized_rmse",
    "peak",
    "fwhm",
    "support_width",
]


@dataclass
class ConcentrationSeries:
    """Sampled receiver signals.

    ``times`` are normalized; ``values`` has one row per observer. All
    producers in this package emit the cube quantity ``V_cube * p(x_RX)``.
    """

    times: np.ndarray
    values: np.ndarray
    names: tuple
    source: str = "tfm"
    warnings: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.names = tuple(self.names)
        if self.values.shape != (len(self.names), len(self.times)):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.names)} observers x {len(self.times)} samples"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("series contains non-finite values")

    def __getitem__(self, name) -> np.ndarray:
        try:
            return self.values[self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def select(self, name) -> "ConcentrationSeries":
        return ConcentrationSeries(self.times, self[name][None, :], (name,), self.source, list(self.warnings), dict(self.meta))


def _window(times, t_range):
    if t_range is None:
        return np.ones(len(times), dtype=bool)
    lo, hi = t_range
    eps = 1e-9 * max(abs(hi), 1.0)
    return (times >= lo - eps) & (times <= hi + eps)


def normalized_rmse(reference: ConcentrationSeries, other: ConcentrationSeries, name=None, t_range=None) -> float:
    """RMS difference on the reference time grid divided by the reference peak.

    ``other`` is linearly interpolated onto the reference samples; identical
    grids reduce to a plain pointwise comparison. ``t_range`` restricts the
    RMS window; the scale is always the peak of the whole reference, so
    windowed errors stay comparable to the full-range value. A reference
    that is zero everywhere has no scale and gives ``nan``.
    """
    name = reference.names[0] if name is None else name
    ref = reference[name]
    oth = np.interp(reference.times, other.times, other[name if name in other.names else other.names[0]])
    sel = _window(reference.times, t_range)
    err = np.sqrt(np.mean((oth[sel] - ref[sel]) ** 2))
    scale = np.max(np.abs(ref))
    return float(err / scale) if scale > 0 else math.nan


def peak(times, values):
    """``(t_peak, value)`` with parabolic refinement around the sample maximum."""
    values = np.asarray(values, dtype=float)
    i = int(np.argmax(values))
    if 0 < i < len(values) - 1:
        y0, y1, y2 = values[i - 1 : i + 2]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            shift = 0.5 * (y0 - y2) / denom
            dt = times[i + 1] - times[i]
            return times[i] + shift * dt, y1 - 0.25 * (y0 - y2) * shift
    return times[i], values[i]


def _crossing(times, values, level, i_from, step):
    i = i_from
    while 0 <= i + step < len(values):
        j = i + step
        if values[j] < level:
            a, b = values[i], values[j]
            return times[i] + (times[j] - times[i]) * (a - level) / (a - b)
        i = j
    return np.nan


def fwhm(times, values) -> float:
    """Full width at half maximum around the global peak (linear interpolation)."""
    values = np.asarray(values, dtype=float)
    i = int(np.argmax(values))
    half = 0.5 * values[i]
    return _crossing(times, values, half, i, 1) - _crossing(times, values, half, i, -1)


def support_width(times, values, level=0.01) -> float:
    """Width of the main pulse measured at ``level`` times its peak."""
    values = np.asarray(values, dtype=float)
    i = int(np.argmax(values))
    thr = level * values[i]
    return _crossing(times, values, thr, i, 1) - _crossing(times, values, thr, i, -1)

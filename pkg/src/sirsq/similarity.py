"""Similarity metrics between an observed and a simulated case series.

All three metrics operate on equal-length, uniformly sampled sequences
(one sample per day).  Observed case counts lag the simulated epidemic by
the diagnosis delay, so the series are first aligned by pairing simulated
day ``t`` with observed day ``t + shift``.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass

import numpy as np


class LengthMismatchError(ValueError):
    """The two series have different lengths."""


class ZeroVarianceError(ValueError):
    """A constant series has no defined correlation."""


class ZeroNormError(ValueError):
    """An all-zero series has no defined cosine."""


class ZeroIncrementError(ValueError):
    """A series with constant values has no defined trend correlation."""


class NoOverlapError(ValueError):
    """Alignment left fewer than two overlapping samples."""


@dataclass(frozen=True)
class CaseSeries:
    """Uniformly sampled (daily) case counts with an optional calendar anchor."""

    values: np.ndarray
    t0_label: str | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or len(values) < 2:
            raise ValueError("a case series needs at least two samples")
        if not np.isfinite(values).all():
            raise ValueError("case series values must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


def _check_lengths(x: CaseSeries, y: CaseSeries):
    if len(x) != len(y):
        raise LengthMismatchError(f"series lengths differ: {len(x)} vs {len(y)}")


def pearson(x: CaseSeries, y: CaseSeries) -> float:
    """Pearson correlation coefficient (population moments)."""
    _check_lengths(x, y)
    xv, yv = x.values, y.values
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    sx = np.sqrt((dx**2).mean())
    sy = np.sqrt((dy**2).mean())
    if sx == 0 or sy == 0:
        raise ZeroVarianceError("pearson is undefined for a constant series")
    return float((dx * dy).mean() / (sx * sy))


def cosine(x: CaseSeries, y: CaseSeries) -> float:
    """Cosine similarity of the two series as vectors."""
    _check_lengths(x, y)
    xv, yv = x.values, y.values
    nx = np.sqrt((xv**2).sum())
    ny = np.sqrt((yv**2).sum())
    if nx == 0 or ny == 0:
        raise ZeroNormError("cosine is undefined for an all-zero series")
    return float((xv * yv).sum() / (nx * ny))


def cort(x: CaseSeries, y: CaseSeries) -> float:
    """First-order temporal correlation: cosine of the day-over-day
    increment vectors, measuring agreement of the two trends."""
    _check_lengths(x, y)
    dx = np.diff(x.values)
    dy = np.diff(y.values)
    nx = np.sqrt((dx**2).sum())
    ny = np.sqrt((dy**2).sum())
    if nx == 0 or ny == 0:
        raise ZeroIncrementError("cort is undefined for a constant series")
    return float((dx * dy).sum() / (nx * ny))


def _shift_label(label: str | None, days: int) -> str | None:
    if label is None:
        return None
    try:
        anchor = datetime.date.fromisoformat(label)
    except ValueError:
        return label
    return (anchor + datetime.timedelta(days=days)).isoformat()


def align_and_shift(
    sim: CaseSeries, obs: CaseSeries, shift: int
) -> tuple[CaseSeries, CaseSeries]:
    """Align a simulated series with observations that lag it by ``shift``
    days: simulated day t is paired with observed day t + shift, and both
    series are truncated to the overlapping window.  Inputs are untouched.
    """
    if shift < 0:
        raise ValueError(f"shift must be >= 0, got {shift}")
    overlap = min(len(sim), len(obs) - shift)
    if overlap < 2:
        raise NoOverlapError(
            f"shift {shift} leaves {max(overlap, 0)} overlapping samples"
        )
    sim_out = CaseSeries(sim.values[:overlap].copy(), t0_label=sim.t0_label)
    obs_out = CaseSeries(
        obs.values[shift : shift + overlap].copy(),
        t0_label=_shift_label(obs.t0_label, shift),
    )
    return sim_out, obs_out

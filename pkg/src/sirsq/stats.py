"""Dwell-time statistics of count trajectories.

A piecewise-constant count spends ``t_n`` total time at each value ``n``
inside an observation window; those dwell times are the weights for the
stationary mean and for the count distribution.  Two standard deviations
are reported: ``std_timeweighted`` uses the same dwell weights as the mean,
while ``std_paper`` divides the root of the unweighted sum of squared
record deviations by the number of records, reproducing the normalisation
used in the source tables.  Only the time-weighted form enters invariants.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from sirsq.population import CountTrajectory, WindowSummary


class EmptyWindowError(ValueError):
    """The requested observation window is empty or out of range."""


@dataclass
class StationaryStats:
    mean: float
    std_paper: float
    std_timeweighted: float
    window: tuple[float, float]
    occupancy: dict[int, float]

    @property
    def span(self) -> float:
        return self.window[1] - self.window[0]


def _dwell_segments(traj: CountTrajectory, component: str, t_b: float, t_e: float):
    """Yield (value, dwell) pairs partitioning [t_b, t_e]."""
    values = traj.component(component)
    times = traj.times
    start = int(np.searchsorted(times, t_b, side="right") - 1)
    segments = []
    for k in range(start, len(times)):
        seg_lo = max(float(times[k]), t_b)
        seg_hi = min(float(times[k + 1]), t_e) if k + 1 < len(times) else t_e
        if seg_hi > seg_lo:
            segments.append((int(values[k]), seg_hi - seg_lo))
        if k + 1 >= len(times) or times[k + 1] >= t_e:
            break
    return segments


def stationary_stats(
    traj: CountTrajectory, component: str, t_b: float, t_e: float
) -> StationaryStats:
    """Dwell-weighted mean and deviations of one count over [t_b, t_e]."""
    if not (0.0 <= t_b < t_e <= traj.t_end):
        raise EmptyWindowError(
            f"window must satisfy 0 <= t_b < t_e <= {traj.t_end}, got [{t_b}, {t_e}]"
        )
    segments = _dwell_segments(traj, component, t_b, t_e)
    occupancy: dict[int, float] = {}
    for value, dwell in segments:
        occupancy[value] = occupancy.get(value, 0.0) + dwell
    span = t_e - t_b
    mean = sum(v * w for v, w in occupancy.items()) / span
    var_tw = sum(w * (v - mean) ** 2 for v, w in occupancy.items()) / span
    records = np.array([v for v, _ in segments], dtype=np.float64)
    n_records = len(records)
    std_paper = float(np.sqrt(((records - mean) ** 2).sum()) / n_records)
    return StationaryStats(
        mean=float(mean),
        std_paper=std_paper,
        std_timeweighted=float(np.sqrt(var_tw)),
        window=(t_b, t_e),
        occupancy=occupancy,
    )


def stats_from_occupancy(
    occupancy: np.ndarray, window: tuple[float, float]
) -> StationaryStats:
    """Dwell statistics from a per-count occupancy table (as produced by the
    compiled engine).  ``std_paper`` is not defined for aggregated occupancy
    and is reported as NaN."""
    t_b, t_e = window
    if not (t_b < t_e):
        raise EmptyWindowError(f"window must satisfy t_b < t_e, got [{t_b}, {t_e}]")
    span = t_e - t_b
    vals = np.arange(len(occupancy), dtype=np.float64)
    mean = float(occupancy @ vals / span)
    var = float(occupancy @ (vals - mean) ** 2 / span)
    occ_dict = {int(v): float(w) for v, w in enumerate(occupancy) if w > 0}
    return StationaryStats(
        mean=mean,
        std_paper=float("nan"),
        std_timeweighted=float(np.sqrt(var)),
        window=(float(t_b), float(t_e)),
        occupancy=occ_dict,
    )


@dataclass
class CountDistribution:
    """Normalised dwell-time histogram of a count, possibly pooled over
    several trajectories."""

    bins: dict[int, float]
    bin_width: int = 1

    def mode(self) -> int:
        """Lower edge of the most probable bin."""
        return max(self.bins, key=self.bins.get)

    def mean(self) -> float:
        if self.bin_width != 1:
            raise ValueError("mean is only defined for unit-width bins")
        return sum(v * m for v, m in self.bins.items())

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["count", "probability"])
            for v in sorted(self.bins):
                writer.writerow([v, repr(self.bins[v])])


def count_distribution(
    trajs, component: str, window: tuple[float, float], bin_width: int = 1
) -> CountDistribution:
    """Pooled dwell-time distribution of one count over a common window.

    ``trajs`` may contain :class:`CountTrajectory` objects,
    :class:`WindowSummary` objects, or raw occupancy arrays; dwell weights
    are pooled and normalised to total mass one.
    """
    if bin_width < 1:
        raise ValueError(f"bin_width must be >= 1, got {bin_width}")
    trajs = list(trajs)
    if not trajs:
        raise ValueError("need at least one trajectory")
    pooled: dict[int, float] = {}

    def add(value: int, dwell: float):
        b = (value // bin_width) * bin_width
        pooled[b] = pooled.get(b, 0.0) + dwell

    for traj in trajs:
        if isinstance(traj, CountTrajectory):
            for value, dwell in _dwell_segments(traj, component, window[0], window[1]):
                add(value, dwell)
        elif isinstance(traj, WindowSummary):
            for value, dwell in enumerate(traj.component_occupancy(component)):
                if dwell > 0:
                    add(int(value), float(dwell))
        else:
            for value, dwell in enumerate(np.asarray(traj)):
                if dwell > 0:
                    add(int(value), float(dwell))
    total = sum(pooled.values())
    if total <= 0:
        raise EmptyWindowError("no dwell time accumulated in the window")
    return CountDistribution(
        bins={v: w / total for v, w in pooled.items()}, bin_width=bin_width
    )


def relative_error(observed: float, theoretical: float) -> float:
    """|observed - theoretical| / |theoretical|."""
    if theoretical == 0:
        raise ZeroDivisionError("theoretical value is zero")
    return abs(observed - theoretical) / abs(theoretical)

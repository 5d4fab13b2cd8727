"""Population-level model: a continuous-time Markov chain over the
(S, I, R) compartment counts, organised as an open queueing network.

Five Poisson clocks drive the chain: external arrival into S at rate
``lambda_in``; infection at rate ``s * i * mean_degree * beta`` (moving one
individual S -> I); recovery at rate ``i * gamma`` (I -> R); and departure
out of R at rate ``r * alpha``, split so that a fraction ``revive_frac``
returns to S and the rest leaves the system.

Note that the infected count going to zero extinguishes the infection and
recovery clocks for good: arrivals keep feeding S which then grows without
bound, so the chain has no proper stationary distribution.  All stationary
quantities here describe the long-lived endemic regime before extinction.
The ``i_floor`` option of the simulator and of the truncated solver studies
exactly that regime by reflecting the infected count at a positive floor.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from sirsq.core import EpidemicParams, RandomSource


class SingularSystemError(RuntimeError):
    """The truncated generator could not be solved for a distribution."""


@dataclass(frozen=True)
class CountState:
    s: int
    i: int
    r: int

    def __post_init__(self):
        for name in ("s", "i", "r"):
            v = getattr(self, name)
            if v < 0 or v != int(v):
                raise ValueError(f"{name} must be a nonnegative integer, got {v}")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.s, self.i, self.r)


@dataclass(frozen=True)
class EventRates:
    """Instantaneous transition rates of the count chain at one state.

    ``i_up`` always equals ``s_down`` and ``r_up`` always equals ``i_down``:
    infection and recovery each move one individual between two compartments.
    ``r_down`` splits into a returning fraction (``revive_frac``) and a
    leaving fraction.
    """

    s_up: float
    s_down: float
    i_up: float
    i_down: float
    r_up: float
    r_down: float
    revive_frac: float

    @property
    def total(self) -> float:
        return self.s_up - self.revive_frac * self.r_down + self.s_down + self.i_down + self.r_down


def event_rates(state: CountState, params: EpidemicParams, mean_degree: float) -> EventRates:
    """Transition rates of the count chain at ``state``."""
    if mean_degree <= 0:
        raise ValueError(f"mean_degree must be > 0, got {mean_degree}")
    s, i, r = state.s, state.i, state.r
    infection = s * i * mean_degree * params.beta
    recovery = i * params.gamma
    departure = r * params.alpha
    inflow = params.lambda_in + params.revive_frac * params.alpha * r
    return EventRates(
        s_up=inflow,
        s_down=infection,
        i_up=infection,
        i_down=recovery,
        r_up=recovery,
        r_down=departure,
        revive_frac=params.revive_frac,
    )


@dataclass(frozen=True)
class StationaryExpectation:
    e_s: float
    e_i: float
    e_r: float

    def as_array(self) -> np.ndarray:
        return np.array([self.e_s, self.e_i, self.e_r])


def stationary_expectations(params: EpidemicParams, mean_degree: float) -> StationaryExpectation:
    """Closed-form endemic-regime expectations of the three counts.

    E[S] = gamma / (beta * mean_degree) depends only on the infection and
    recovery parameters; E[I] = lambda / (gamma * (1 - p)) and
    E[R] = lambda / (alpha * (1 - p)) depend only on throughput.
    """
    if params.beta == 0:
        raise ZeroDivisionError("beta")
    if mean_degree <= 0:
        raise ZeroDivisionError("mean_degree")
    if params.gamma == 0:
        raise ZeroDivisionError("gamma")
    if params.alpha == 0:
        raise ZeroDivisionError("alpha")
    drain = 1.0 - params.revive_frac
    return StationaryExpectation(
        e_s=params.gamma / (params.beta * mean_degree),
        e_i=params.lambda_in / (params.gamma * drain),
        e_r=params.lambda_in / (params.alpha * drain),
    )


LEGAL_MOVES = {
    (1, 0, 0),    # external arrival
    (-1, 1, 0),   # infection
    (0, -1, 1),   # recovery
    (1, 0, -1),   # departure returning to S
    (0, 0, -1),   # departure leaving the system
}


@dataclass
class CountTrajectory:
    """Piecewise-constant path of the three counts.

    ``times[0] == 0`` holds the initial state; the final state persists up to
    the horizon ``t_end`` (the first event beyond it is not recorded).
    """

    times: np.ndarray
    counts: np.ndarray
    t_end: float

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> CountState:
        s, i, r = self.counts[-1]
        return CountState(int(s), int(i), int(r))

    def component(self, which: str) -> np.ndarray:
        idx = {"s": 0, "i": 1, "r": 2}[which.lower()]
        return self.counts[:, idx]

    def state_at(self, t: float) -> np.ndarray:
        """Counts at time ``t`` (right-continuous)."""
        if t < 0 or t > self.t_end:
            raise ValueError(f"t must be in [0, {self.t_end}], got {t}")
        pos = np.searchsorted(self.times, t, side="right") - 1
        return self.counts[pos]

    def resample(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """States on the uniform grid 0, dt, 2*dt, ... up to t_end."""
        grid = np.arange(0.0, self.t_end + dt / 2, dt)
        pos = np.searchsorted(self.times, grid, side="right") - 1
        return grid, self.counts[pos]

    def validate(self):
        """Check invariants: strictly increasing times starting at 0, every
        consecutive pair of states connected by one legal move."""
        if self.times[0] != 0.0:
            raise ValueError("trajectory must start at time 0")
        if (np.diff(self.times) <= 0).any():
            raise ValueError("event times must be strictly increasing")
        if self.times[-1] > self.t_end:
            raise ValueError("events must not pass the horizon")
        moves = np.diff(self.counts, axis=0)
        for k, mv in enumerate(moves):
            if tuple(mv) not in LEGAL_MOVES:
                raise ValueError(f"illegal move {tuple(mv)} at event {k + 1}")
        if (self.counts < 0).any():
            raise ValueError("counts must be nonnegative")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["time", "s", "i", "r"])
            for t, (s, i, r) in zip(self.times, self.counts):
                writer.writerow([repr(float(t)), int(s), int(i), int(r)])

    def write_resampled_csv(self, path, dt: float):
        grid, states = self.resample(dt)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "s", "i", "r"])
            for t, (s, i, r) in zip(grid, states):
                writer.writerow([repr(float(t)), int(s), int(i), int(r)])


def simulate_gillespie(
    init: CountState,
    params: EpidemicParams,
    mean_degree: float,
    t_end: float,
    rs: RandomSource,
    i_floor: int = 0,
) -> CountTrajectory:
    """Exact event-driven simulation of the count chain, recording every event.

    Each step draws an exponential waiting time from the total rate and picks
    the event proportionally to its clock.  A total rate of zero freezes the
    trajectory until the horizon.  With ``i_floor > 0`` the recovery clock is
    suppressed once the infected count reaches the floor, simulating the
    reflected chain that the truncated solver analyses.

    This reference implementation consumes the random stream exactly like the
    compiled engine behind :func:`simulate_window`, so both produce identical
    event sequences from identical seeds.
    """
    if t_end <= 0:
        raise ValueError(f"t_end must be > 0, got {t_end}")
    lam = params.lambda_in
    bk = mean_degree * params.beta
    gamma = params.gamma
    alpha = params.alpha
    p = params.revive_frac
    t = 0.0
    s, i, r = init.as_tuple()
    times = [0.0]
    counts = [(s, i, r)]
    while True:
        inf = s * i * bk
        rec = i * gamma if i > i_floor else 0.0
        ralpha = r * alpha
        total = lam + inf + rec + ralpha
        if total <= 0.0:
            break
        u1 = rs.uniform()
        wait = -math.log1p(-u1) / total
        if t + wait > t_end:
            break
        t = t + wait
        x = rs.uniform() * total
        c = lam
        if x < c:
            s += 1
        else:
            c += inf
            if x < c:
                s -= 1
                i += 1
            else:
                c += rec
                if x < c:
                    i -= 1
                    r += 1
                else:
                    c += ralpha * p
                    if x < c:
                        r -= 1
                        s += 1
                    else:
                        r -= 1
        times.append(t)
        counts.append((s, i, r))
    return CountTrajectory(
        times=np.array(times, dtype=np.float64),
        counts=np.array(counts, dtype=np.int64),
        t_end=float(t_end),
    )


@dataclass
class MigrationEvents:
    """Arrival and departure timestamps extracted from a count simulation."""

    times: np.ndarray
    kinds: np.ndarray  # 0 = arrival, 1 = exit

    def __len__(self) -> int:
        return len(self.times)


@dataclass
class WindowSummary:
    """Dwell-time occupancy of the counts over an observation window, plus
    optional resampled states and migration events.

    ``record_sums`` / ``record_sums2`` / ``record_counts`` hold the plain
    (unweighted) first and second moments of the per-segment count records in
    the window, from which the record-normalised deviation is derived.
    """

    occupancy: np.ndarray  # (3, occ_size) dwell time per count value
    overflow: np.ndarray   # (3,) dwell time spent beyond the table
    window: tuple[float, float]
    final_state: CountState
    final_time: float
    record_sums: np.ndarray | None = None
    record_sums2: np.ndarray | None = None
    record_counts: np.ndarray | None = None
    grid_times: np.ndarray | None = None
    grid_counts: np.ndarray | None = None
    migration: MigrationEvents | None = None

    def component_occupancy(self, which: str) -> np.ndarray:
        idx = {"s": 0, "i": 1, "r": 2}[which.lower()]
        return self.occupancy[idx]

    def means(self) -> np.ndarray:
        """Time-weighted means of (S, I, R) over the window."""
        span = self.window[1] - self.window[0]
        vals = np.arange(self.occupancy.shape[1])
        return self.occupancy @ vals / span

    def std_paper(self, which: str) -> float:
        """Record-normalised deviation sqrt(sum((x - mean)^2)) / N over the
        window's per-segment records."""
        if self.record_sums is None:
            return float("nan")
        idx = {"s": 0, "i": 1, "r": 2}[which.lower()]
        n = self.record_counts[idx]
        if n == 0:
            return float("nan")
        mean = self.means()[idx]
        ss = self.record_sums2[idx] - 2 * mean * self.record_sums[idx] + n * mean**2
        return float(np.sqrt(max(ss, 0.0)) / n)


def simulate_window(
    init: CountState,
    params: EpidemicParams,
    mean_degree: float,
    t_end: float,
    window: tuple[float, float],
    rs: RandomSource,
    i_floor: int = 0,
    grid_dt: float = 0.0,
    record_migration: bool = False,
    occ_size: int = 8192,
    block_size: int = 2_000_000,
) -> WindowSummary:
    """Run the count chain to ``t_end`` with the compiled engine, accumulating
    dwell-time occupancy over ``window`` on the fly.

    Equivalent in law (and in actual event sequence, seed for seed) to
    :func:`simulate_gillespie`, but does not materialise the event list, so
    it handles hundreds of millions of events.  With ``grid_dt`` the state is
    recorded on a uniform time grid; with ``record_migration`` the arrival
    and exit event times are collected for driving network evolution.
    """
    from sirsq import _fastpath

    if t_end <= 0:
        raise ValueError(f"t_end must be > 0, got {t_end}")
    win_lo, win_hi = float(window[0]), float(window[1])
    if not (0 <= win_lo < win_hi <= t_end):
        raise ValueError(f"window must satisfy 0 <= lo < hi <= t_end, got {window}")
    occ = np.zeros((3, occ_size), dtype=np.float64)
    overflow = np.zeros(3, dtype=np.float64)
    rec_sum = np.zeros(3, dtype=np.float64)
    rec_sum2 = np.zeros(3, dtype=np.float64)
    rec_n = np.zeros(3, dtype=np.int64)
    if grid_dt > 0:
        n_grid = int(math.floor(t_end / grid_dt)) + 1
        grid_counts = np.zeros((n_grid, 3), dtype=np.int64)
    else:
        grid_counts = np.zeros((0, 3), dtype=np.int64)
    mig_cap = 1024 if record_migration else 0
    mig_times = np.zeros(mig_cap, dtype=np.float64)
    mig_kinds = np.zeros(mig_cap, dtype=np.int8)
    t = 0.0
    s, i, r = init.as_tuple()
    grid_pos = 0
    mig_pos = 0
    buf = rs.uniform(size=block_size)
    idx = 0
    while True:
        idx, t, s, i, r, grid_pos, mig_pos, status = _fastpath.run_gillespie_block(
            buf, idx, t, s, i, r,
            params.lambda_in, mean_degree * params.beta, params.gamma,
            params.alpha, params.revive_frac, i_floor,
            float(t_end), win_lo, win_hi,
            occ, overflow, rec_sum, rec_sum2, rec_n,
            float(grid_dt), grid_counts, grid_pos,
            mig_times, mig_kinds, mig_pos, record_migration,
        )
        if status == _fastpath.STATUS_DONE:
            break
        if status == _fastpath.STATUS_NEED_RANDOMS:
            buf = np.concatenate([buf[idx:], rs.uniform(size=block_size)])
            idx = 0
        elif status == _fastpath.STATUS_MIGRATION_FULL:
            new_cap = mig_cap * 2
            mig_times = np.concatenate([mig_times, np.zeros(new_cap - mig_cap)])
            mig_kinds = np.concatenate([mig_kinds, np.zeros(new_cap - mig_cap, dtype=np.int8)])
            mig_cap = new_cap
    summary = WindowSummary(
        occupancy=occ,
        overflow=overflow,
        window=(win_lo, win_hi),
        final_state=CountState(int(s), int(i), int(r)),
        final_time=float(t),
        record_sums=rec_sum,
        record_sums2=rec_sum2,
        record_counts=rec_n,
    )
    if grid_dt > 0:
        summary.grid_times = np.arange(grid_counts.shape[0]) * grid_dt
        summary.grid_counts = grid_counts
    if record_migration:
        summary.migration = MigrationEvents(
            times=mig_times[:mig_pos].copy(), kinds=mig_kinds[:mig_pos].copy()
        )
    return summary


@dataclass
class TruncatedStationary:
    """Exact stationary distribution of the count chain restricted to the box
    0 <= s, i, r <= cap (with ``i >= i_floor``), transitions leaving the box
    suppressed."""

    probs: np.ndarray  # (cap+1, cap+1, cap+1), zero on excluded planes
    cap: int
    i_floor: int
    balance_residual: float

    def prob(self, s: int, i: int, r: int) -> float:
        return float(self.probs[s, i, r])

    def marginal_means(self) -> np.ndarray:
        vals = np.arange(self.cap + 1)
        return np.array(
            [
                (self.probs.sum(axis=(1, 2)) * vals).sum(),
                (self.probs.sum(axis=(0, 2)) * vals).sum(),
                (self.probs.sum(axis=(0, 1)) * vals).sum(),
            ]
        )

    def boundary_mass(self) -> float:
        """Probability of any count sitting on the truncation cap."""
        inner = self.probs[: self.cap, : self.cap, : self.cap].sum()
        return float(self.probs.sum() - inner)

    def write_csv(self, path, threshold: float = 0.0):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["s", "i", "r", "prob"])
            for s in range(self.cap + 1):
                for i in range(self.i_floor, self.cap + 1):
                    for r in range(self.cap + 1):
                        v = self.probs[s, i, r]
                        if v > threshold:
                            writer.writerow([s, i, r, repr(float(v))])


def solve_truncated_stationary(
    params: EpidemicParams,
    mean_degree: float,
    cap: int,
    i_floor: int = 0,
) -> TruncatedStationary:
    """Solve pi Q = 0, sum(pi) = 1 on the truncated state box exactly.

    Rates that would leave the box are set to zero.  With the default
    ``i_floor = 0`` and a positive arrival rate the extinct face ``i = 0`` is
    absorbing and the solution collapses onto the corner (cap, 0, 0); pass
    ``i_floor = 1`` to reflect the infected count at one and obtain the
    endemic-regime distribution instead.

    Without arrivals every drained state (s, 0, 0) is absorbing, which makes
    the truncated chain reducible; the one distribution still well defined is
    that of the chain started empty, a point mass at the origin, and that is
    what is returned.  Any other reducibility that defeats normalisation
    raises :class:`SingularSystemError`.
    """
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    if not (0 <= i_floor <= 1):
        raise ValueError(f"i_floor must be 0 or 1, got {i_floor}")
    if mean_degree <= 0:
        raise ValueError(f"mean_degree must be > 0, got {mean_degree}")
    ns = cap + 1
    if params.lambda_in == 0 and i_floor == 0:
        probs = np.zeros((ns, ns, ns))
        probs[0, 0, 0] = 1.0
        return TruncatedStationary(probs=probs, cap=cap, i_floor=0, balance_residual=0.0)
    i_range = range(i_floor, cap + 1)
    index: dict[tuple[int, int, int], int] = {}
    states: list[tuple[int, int, int]] = []
    for s in range(ns):
        for i in i_range:
            for r in range(ns):
                index[(s, i, r)] = len(states)
                states.append((s, i, r))
    n = len(states)
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for (s, i, r) in states:
        rates = event_rates(CountState(s, i, r), params, mean_degree)
        reflux = rates.revive_frac * rates.r_down
        exit_rate = rates.r_down - reflux
        moves = []
        if s < cap:
            moves.append(((s + 1, i, r), params.lambda_in))
        if i < cap:
            moves.append(((s - 1, i + 1, r), rates.s_down))
        if i > i_floor and r < cap:
            moves.append(((s, i - 1, r + 1), rates.i_down))
        if s < cap:
            moves.append(((s + 1, i, r - 1), reflux))
        moves.append(((s, i, r - 1), exit_rate))
        k = index[(s, i, r)]
        out_total = 0.0
        for target, rate in moves:
            if rate > 0.0 and target in index:
                rows.append(k)
                cols.append(index[target])
                vals.append(rate)
                out_total += rate
        rows.append(k)
        cols.append(k)
        vals.append(-out_total)
    Q = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    # the normalised solution of pi Q = 0 is unique iff exactly one closed
    # communicating class exists; otherwise the solve is ambiguous
    adjacency = Q.copy()
    adjacency.setdiag(0)
    adjacency.eliminate_zeros()
    n_comp, labels = sp.csgraph.connected_components(adjacency, connection="strong")
    coo = adjacency.tocoo()
    has_exit = np.zeros(n_comp, dtype=bool)
    cross = labels[coo.row] != labels[coo.col]
    has_exit[labels[coo.row[cross]]] = True
    n_closed = n_comp - int(has_exit.sum())
    if n_closed != 1:
        raise SingularSystemError(
            f"truncated chain has {n_closed} closed classes; "
            "no unique stationary distribution"
        )
    A = Q.T.tolil()
    A[0, :] = 1.0
    b = np.zeros(n)
    b[0] = 1.0
    try:
        pi = spla.spsolve(A.tocsc(), b)
    except Exception as exc:  # pragma: no cover - solver-internal failures
        raise SingularSystemError(str(exc)) from exc
    if not np.isfinite(pi).all():
        raise SingularSystemError("solve produced non-finite probabilities")
    if pi.min() < -1e-9 or abs(pi.sum() - 1.0) > 1e-9:
        raise SingularSystemError(
            f"solve produced an invalid distribution (min {pi.min()}, sum {pi.sum()})"
        )
    residual = float(np.abs(pi @ Q).max())
    probs = np.zeros((ns, ns, ns))
    for k, (s, i, r) in enumerate(states):
        probs[s, i, r] = max(pi[k], 0.0)
    return TruncatedStationary(
        probs=probs, cap=cap, i_floor=i_floor, balance_residual=residual
    )

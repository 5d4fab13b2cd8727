"""Individual-level epidemic chain on a static contact network.

Each node carries an integer protection degree ``u``; the factor
``exp(-u)`` discounts its count of infected neighbours before that count
enters the infection probability ``1 - (1 - beta) ** d``.  All nodes
advance synchronously from the time-n snapshot.  In this module ``gamma``
and ``alpha`` act as per-step transition probabilities and must not
exceed 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from sirsq.core import ConfigError, EpidemicParams, NodeState, OutOfRangeError, RandomSource
from sirsq.network import Network, WsConfig, generate_ws

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class TransitionMatrix:
    """3x3 row-stochastic matrix over (S, I, R) for one node and step."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.shape != (3, 3):
            raise ValueError(f"expected 3x3 matrix, got shape {rows.shape}")
        if (rows < -ROW_SUM_TOL).any() or (rows > 1 + ROW_SUM_TOL).any():
            raise ValueError("matrix entries must lie in [0, 1]")
        sums = rows.sum(axis=1)
        if np.abs(sums - 1.0).max() > ROW_SUM_TOL:
            raise ValueError(f"rows must sum to 1, got sums {sums}")
        object.__setattr__(self, "rows", rows)


@dataclass(frozen=True)
class StateDistribution:
    """Probability vector over (S, I, R)."""

    pi: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=np.float64)
        if pi.shape != (3,):
            raise ValueError(f"expected length-3 vector, got shape {pi.shape}")
        if (pi < -ROW_SUM_TOL).any():
            raise ValueError("probabilities must be nonnegative")
        if abs(pi.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"probabilities must sum to 1, got {pi.sum()}")
        object.__setattr__(self, "pi", pi)


@dataclass(frozen=True)
class DegreeClassRow:
    degree: int
    node_count: int
    infected_frequency: float

    @property
    def low_sample(self) -> bool:
        return self.node_count < 3


@dataclass
class DegreeClassStats:
    """Per-degree mean infected-state frequency over a stationary window."""

    rows: list[DegreeClassRow]

    def by_degree(self) -> dict[int, DegreeClassRow]:
        return {r.degree: r for r in self.rows}

    def mean_frequency(self, lo: int, hi: int) -> float:
        """Unweighted mean of per-degree frequencies for degrees in [lo, hi]."""
        vals = [r.infected_frequency for r in self.rows if lo <= r.degree <= hi]
        if not vals:
            raise ValueError(f"no degree classes in [{lo}, {hi}]")
        return float(np.mean(vals))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["degree", "count", "infected_frequency"])
            for r in self.rows:
                writer.writerow([r.degree, r.node_count, repr(r.infected_frequency)])


def valid_infected_neighbors(u: int, rho: int) -> float:
    """Protection-discounted infected-neighbour count ``exp(-u) * rho``."""
    return math.exp(-u) * rho


def expected_valid_neighbors(u: int, degree: int, infected_density: float) -> float:
    """Mean-field estimate of the discounted infected-neighbour count for a
    node of the given degree when a fraction ``infected_density`` of the
    network is infected.  Diagnostic only; the simulation always uses the
    measured neighbour counts."""
    return math.exp(-u) * degree * infected_density


def build_transition_matrix(params: EpidemicParams, d: float) -> TransitionMatrix:
    """Single-step transition matrix for a node with discounted
    infected-neighbour count ``d``."""
    if d < 0:
        raise ValueError(f"d must be >= 0, got {d}")
    if params.gamma > 1.0:
        raise OutOfRangeError("gamma", "must be <= 1 when used as a step probability")
    if params.alpha > 1.0:
        raise OutOfRangeError("alpha", "must be <= 1 when used as a step probability")
    stay_s = float(np.power(1.0 - params.beta, d))
    rows = np.array(
        [
            [stay_s, 1.0 - stay_s, 0.0],
            [0.0, 1.0 - params.gamma, params.gamma],
            [params.alpha, 0.0, 1.0 - params.alpha],
        ]
    )
    return TransitionMatrix(rows)


def evolve_distribution(pi0: StateDistribution, mats) -> StateDistribution:
    """Left-multiply ``pi0`` through a sequence of transition matrices."""
    pi = np.asarray(pi0.pi, dtype=np.float64)
    for mat in mats:
        pi = pi @ mat.rows
    return StateDistribution(pi)


def synchronous_update(states, protection_factor, adjacency, params, rs: RandomSource):
    """One synchronous step of the chain, vectorised over nodes.

    ``states`` has shape (..., n) with values in {0, 1, 2}; the leading axes
    batch independent replications.  ``protection_factor`` is ``exp(-u)`` per
    node; ``adjacency`` is an (n, n) matrix (dense or CSR).  Every node draws
    its next state from its own transition row using the pre-update snapshot.
    Returns (new_states, transition_count).
    """
    if params.gamma > 1.0:
        raise OutOfRangeError("gamma", "must be <= 1 when used as a step probability")
    if params.alpha > 1.0:
        raise OutOfRangeError("alpha", "must be <= 1 when used as a step probability")
    states = np.asarray(states, dtype=np.int8)
    infected = (states == NodeState.INFECTED).astype(np.float64)
    rho = infected @ adjacency  # symmetric adjacency: row sums of neighbours
    d = protection_factor * rho
    p_infect = 1.0 - np.power(1.0 - params.beta, d)
    u = rs.uniform(size=states.shape)
    new_states = states.copy()
    new_states[(states == NodeState.SUSCEPTIBLE) & (u < p_infect)] = NodeState.INFECTED
    new_states[(states == NodeState.INFECTED) & (u < params.gamma)] = NodeState.RECOVERED
    new_states[(states == NodeState.RECOVERED) & (u < params.alpha)] = NodeState.SUSCEPTIBLE
    return new_states, int((new_states != states).sum())


def step_network(net: Network, params: EpidemicParams, rs: RandomSource,
                 resample_protection: bool = False) -> int:
    """Advance every node of ``net`` one synchronous step in place.

    Returns the number of nodes that changed state.  With
    ``resample_protection`` each node redraws its protection degree before
    the step instead of keeping its initial draw.
    """
    ids, states, protection, adj = net.as_arrays()
    if resample_protection:
        protection = rs.poisson(net.protect_intensity, size=len(ids))
    factor = np.exp(-protection.astype(np.float64))
    new_states, changed = synchronous_update(states, factor, adj, params, rs)
    net.set_states_from_array(ids, new_states)
    return changed


def infected_frequency_by_degree(
    cfg: WsConfig,
    params: EpidemicParams,
    steps: int,
    burn_in: int,
    rs: RandomSource,
    resample_protection: bool = False,
) -> DegreeClassStats:
    """Run the chain on a fresh Watts-Strogatz network and aggregate each
    node's infected-state frequency over the post-burn-in window by degree.

    Starts from a single uniformly chosen infected node, everyone else
    susceptible.  Protection degrees are drawn once per node at network
    construction from ``params.protect_intensity`` (or redrawn every step
    with ``resample_protection``).
    """
    if steps <= 0 or burn_in < 0 or steps <= burn_in:
        raise ConfigError(f"need steps > burn_in >= 0, got steps={steps}, burn_in={burn_in}")
    net = generate_ws(cfg, rs, protect_intensity=params.protect_intensity)
    ids, states, protection, adj = net.as_arrays()
    n = len(ids)
    states[int(rs.integers(n))] = NodeState.INFECTED
    factor = np.exp(-protection.astype(np.float64))
    infected_steps = np.zeros(n, dtype=np.int64)
    for step in range(steps):
        if resample_protection:
            protection = rs.poisson(params.protect_intensity, size=n)
            factor = np.exp(-protection.astype(np.float64))
        states, _ = synchronous_update(states, factor, adj, params, rs)
        if step >= burn_in:
            infected_steps += states == NodeState.INFECTED
    freq = infected_steps / float(steps - burn_in)
    degrees = net.degree_array()
    rows = []
    for deg in sorted(set(degrees.tolist())):
        mask = degrees == deg
        rows.append(
            DegreeClassRow(
                degree=int(deg),
                node_count=int(mask.sum()),
                infected_frequency=float(freq[mask].mean()),
            )
        )
    return DegreeClassStats(rows=rows)

"""Small-world contact network and its evolution under migration.

The initial graph is a Watts-Strogatz ring lattice with ``k_init``
neighbours on each side, rewired edge by edge.  Migration then adds
susceptible newcomers that attach to ``m`` uniformly chosen existing nodes
and removes departing nodes together with all their contacts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import scipy.sparse as sp

from sirsq.core import ConfigError, NodeState, RandomSource


class TooFewNodesError(ValueError):
    """An arrival requested more attachment targets than nodes exist."""


class UnknownNodeError(KeyError):
    """Operation referenced a node id that is not in the network."""


@dataclass(frozen=True)
class WsConfig:
    """Watts-Strogatz generation settings.

    ``k_init`` counts neighbours per side, so the unrewired lattice has
    degree ``2 * k_init``.
    """

    n0: int
    k_init: int
    rewire_prob: float

    def __post_init__(self):
        if self.k_init < 1:
            raise ConfigError(f"k_init must be >= 1, got {self.k_init}")
        if self.n0 <= 2 * self.k_init:
            raise ConfigError(
                f"n0 must exceed 2 * k_init ({2 * self.k_init}), got {self.n0}"
            )
        if not (0.0 <= self.rewire_prob <= 1.0):
            raise ConfigError(
                f"rewire_prob must be in [0, 1], got {self.rewire_prob}"
            )


@dataclass
class DegreeHistogram:
    counts: dict[int, int]
    mean_degree: float

    @property
    def node_count(self) -> int:
        return sum(self.counts.values())


class Network:
    """Undirected contact graph with per-node epidemic state and protection.

    Node ids are integers that are never reused within a run.  Mutations are
    single-writer; take read-only snapshots between them.
    """

    def __init__(self, protect_intensity: float = 0.0):
        self._g = nx.Graph()
        self._next_id = 0
        self.protect_intensity = float(protect_intensity)

    # -- basic accessors -------------------------------------------------

    @property
    def graph(self) -> nx.Graph:
        return self._g

    @property
    def node_count(self) -> int:
        return self._g.number_of_nodes()

    @property
    def edge_count(self) -> int:
        return self._g.number_of_edges()

    def node_ids(self) -> list[int]:
        return list(self._g.nodes)

    def has_node(self, node_id: int) -> bool:
        return self._g.has_node(node_id)

    def degree(self, node_id: int) -> int:
        if not self._g.has_node(node_id):
            raise UnknownNodeError(node_id)
        return self._g.degree(node_id)

    def state(self, node_id: int) -> NodeState:
        if not self._g.has_node(node_id):
            raise UnknownNodeError(node_id)
        return self._g.nodes[node_id]["state"]

    def set_state(self, node_id: int, state: NodeState):
        if not self._g.has_node(node_id):
            raise UnknownNodeError(node_id)
        self._g.nodes[node_id]["state"] = NodeState(state)

    def protection(self, node_id: int) -> int:
        if not self._g.has_node(node_id):
            raise UnknownNodeError(node_id)
        return self._g.nodes[node_id]["protection"]

    def _add_node(self, state: NodeState, protection: int) -> int:
        node_id = self._next_id
        self._next_id += 1
        self._g.add_node(node_id, state=NodeState(state), protection=int(protection))
        return node_id

    # -- evolution -------------------------------------------------------

    def node_arrival(self, m: int, rs: RandomSource) -> int:
        """Add one susceptible newcomer attached to ``m`` distinct existing
        nodes chosen uniformly at random; returns its id."""
        if m < 1:
            raise ConfigError(f"m must be >= 1, got {m}")
        existing = self.node_ids()
        if len(existing) < m:
            raise TooFewNodesError(
                f"arrival needs {m} targets, network has {len(existing)} nodes"
            )
        targets = rs.choice(np.asarray(existing), size=m, replace=False)
        protection = int(rs.poisson(self.protect_intensity))
        node_id = self._add_node(NodeState.SUSCEPTIBLE, protection)
        for t in targets:
            self._g.add_edge(node_id, int(t))
        return node_id

    def node_departure(self, node_id: int) -> int:
        """Remove a node and all incident edges; returns its former degree."""
        if not self._g.has_node(node_id):
            raise UnknownNodeError(node_id)
        removed = self._g.degree(node_id)
        self._g.remove_node(node_id)
        return removed

    # -- statistics and export -------------------------------------------

    def degree_histogram(self) -> DegreeHistogram:
        counts: dict[int, int] = {}
        total = 0
        for _, d in self._g.degree():
            counts[d] = counts.get(d, 0) + 1
            total += d
        n = self.node_count
        mean = total / n if n else 0.0
        return DegreeHistogram(counts=counts, mean_degree=mean)

    def degree_array(self) -> np.ndarray:
        return np.array([d for _, d in self._g.degree()], dtype=np.int64)

    def as_arrays(self):
        """Snapshot for vectorised simulation: (ids, states, protection, adjacency).

        The adjacency is a CSR matrix in id order; states and protection are
        aligned with ``ids``.
        """
        ids = self.node_ids()
        states = np.array([self._g.nodes[v]["state"] for v in ids], dtype=np.int8)
        protection = np.array(
            [self._g.nodes[v]["protection"] for v in ids], dtype=np.int64
        )
        adj = nx.to_scipy_sparse_array(self._g, nodelist=ids, dtype=np.float64, format="csr")
        return ids, states, protection, adj

    def set_states_from_array(self, ids, states):
        for v, s in zip(ids, states):
            self._g.nodes[v]["state"] = NodeState(int(s))

    def write_edge_list_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["src", "dst"])
            for u, v in self._g.edges:
                writer.writerow([u, v])

    def write_degree_histogram_csv(self, path):
        hist = self.degree_histogram()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["degree", "count"])
            for d in sorted(hist.counts):
                writer.writerow([d, hist.counts[d]])


def generate_ws(cfg: WsConfig, rs: RandomSource, protect_intensity: float = 0.0) -> Network:
    """Build a Watts-Strogatz network: ring lattice with ``k_init`` neighbours
    per side, each edge independently rewired with ``rewire_prob``.

    Rewiring picks a uniform non-duplicate, non-self endpoint; an edge with no
    legal target stays in place.  All nodes start susceptible with a fresh
    protection draw.  Edge count is conserved.
    """
    if cfg.n0 <= 2 * cfg.k_init:
        raise ConfigError(
            f"n0 must exceed 2 * k_init ({2 * cfg.k_init}), got {cfg.n0}"
        )
    net = Network(protect_intensity=protect_intensity)
    n = cfg.n0
    protections = rs.poisson(protect_intensity, size=n) if protect_intensity > 0 else np.zeros(n, dtype=int)
    for v in range(n):
        net._add_node(NodeState.SUSCEPTIBLE, int(protections[v]))
    g = net.graph
    for offset in range(1, cfg.k_init + 1):
        for v in range(n):
            g.add_edge(v, (v + offset) % n)
    if cfg.rewire_prob > 0:
        for offset in range(1, cfg.k_init + 1):
            for v in range(n):
                w = (v + offset) % n
                if not g.has_edge(v, w):
                    continue  # already rewired away by an earlier pass
                if rs.uniform() >= cfg.rewire_prob:
                    continue
                if g.degree(v) >= n - 1:
                    continue  # no legal target exists
                target = int(rs.integers(n))
                while target == v or g.has_edge(v, target):
                    target = int(rs.integers(n))
                g.remove_edge(v, w)
                g.add_edge(v, target)
    return net

"""Stochastic SIRS epidemic simulation.

Two complementary models of the same disease process:

* an individual-level Markov chain on a small-world contact network, where
  each person carries a random protection degree that discounts the
  infectious pressure of their neighbours, and

* a population-level continuous-time Markov chain over the (S, I, R)
  compartment counts, organised as an open queueing network with external
  arrivals, probabilistic return from R to S, and permanent departures.

The package also provides an exact truncated-generator solver used to
cross-check the event simulation, dwell-time statistics of count
trajectories, time-series similarity metrics for comparing simulated and
observed case counts, and a batch CLI.
"""

from sirsq.core import EpidemicParams, NodeState, RandomSource, OutOfRangeError

__version__ = "0.1.0"

__all__ = [
    "EpidemicParams",
    "NodeState",
    "RandomSource",
    "OutOfRangeError",
    "__version__",
]

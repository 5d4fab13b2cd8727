"""Shared domain types: model parameters, node states, and the seeded
random source threaded through every stochastic operation."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class OutOfRangeError(ValueError):
    """A parameter field violates its allowed range."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ConfigError(ValueError):
    """A structural configuration value is unusable."""


class NodeState(IntEnum):
    SUSCEPTIBLE = 0
    INFECTED = 1
    RECOVERED = 2


@dataclass(frozen=True)
class EpidemicParams:
    """All model rates and probabilities in one validated record.

    beta              per-contact infection probability (discrete chain) or
                      per-contact rate factor (count model), in [0, 1]
    gamma             recovery rate
    alpha             departure rate out of the recovered state
    lambda_in         external arrival rate into the susceptible pool
    revive_frac       fraction of R-departures routed back to S, in [0, 1)
    protect_intensity Poisson intensity of the per-individual protection degree
    """

    beta: float
    gamma: float
    alpha: float
    lambda_in: float = 0.0
    revive_frac: float = 0.0
    protect_intensity: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0):
            raise OutOfRangeError("beta", f"must be in [0, 1], got {self.beta}")
        if not (self.gamma >= 0.0):
            raise OutOfRangeError("gamma", f"must be >= 0, got {self.gamma}")
        if not (self.alpha >= 0.0):
            raise OutOfRangeError("alpha", f"must be >= 0, got {self.alpha}")
        if not (self.lambda_in >= 0.0):
            raise OutOfRangeError("lambda_in", f"must be >= 0, got {self.lambda_in}")
        if not (0.0 <= self.revive_frac < 1.0):
            raise OutOfRangeError(
                "revive_frac", f"must be in [0, 1), got {self.revive_frac}"
            )
        if not (self.protect_intensity >= 0.0):
            raise OutOfRangeError(
                "protect_intensity", f"must be >= 0, got {self.protect_intensity}"
            )


def validate_params(params: EpidemicParams) -> EpidemicParams:
    """Return ``params`` unchanged if every field is in range.

    Construction already validates; this re-checks a record that may have
    been built through other means (e.g. dataclasses.replace on a subclass).
    """
    EpidemicParams(
        beta=params.beta,
        gamma=params.gamma,
        alpha=params.alpha,
        lambda_in=params.lambda_in,
        revive_frac=params.revive_frac,
        protect_intensity=params.protect_intensity,
    )
    return params


class RandomSource:
    """Seeded wrapper around numpy's PCG64 generator.

    A single source is passed explicitly through every stochastic operation:
    the same seed always reproduces the same draw sequence bit for bit.
    Sources are single-owner; concurrent replications each get their own.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self):
        return f"RandomSource(seed={self.seed})"

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, size=None):
        """Uniform draw(s) on [0, 1)."""
        return self._gen.random(size)

    def bernoulli(self, q: float, size=None):
        if not (0.0 <= q <= 1.0):
            raise ValueError(f"bernoulli probability must be in [0, 1], got {q}")
        return self._gen.random(size) < q

    def poisson(self, mu: float, size=None):
        """Poisson(mu) integer draw(s); mu == 0 always yields 0."""
        if mu < 0:
            raise ValueError(f"poisson intensity must be >= 0, got {mu}")
        return self._gen.poisson(mu, size)

    def exponential(self, rate: float, size=None):
        """Exponential draw(s) with mean 1/rate."""
        if rate <= 0:
            raise ValueError(f"exponential rate must be > 0, got {rate}")
        return self._gen.exponential(1.0 / rate, size)

    def integers(self, n: int, size=None):
        """Uniform integer(s) in [0, n)."""
        if n <= 0:
            raise ValueError(f"upper bound must be > 0, got {n}")
        return self._gen.integers(0, n, size=size)

    def choice(self, values, size=None, replace=True):
        return self._gen.choice(values, size=size, replace=replace)

    def spawn_seed(self) -> int:
        """Derive a 63-bit seed for a subordinate stream."""
        return int(self._gen.integers(0, 2**63 - 1))

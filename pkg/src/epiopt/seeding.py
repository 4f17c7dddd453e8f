"""Deterministic seed derivation and per-sample random streams.

Every stochastic simulation consumes a dedicated counter-based Philox
stream keyed by (evaluation seed, sample index).  Two evaluations that
share the evaluation seed therefore consume identical random numbers
sample by sample, which is what correlated sampling for finite
differences relies on.  Distinct evaluation seeds are derived from a user
seed with a splitmix64-style mixer so that independent estimates never
share streams.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, *indices: int) -> int:
    """Derive a new 64-bit seed from ``base`` and a tuple of indices.

    Deterministic and stable across platforms; used to give each
    optimizer evaluation (iteration, trial, role) its own seed space.
    """
    s = base & _MASK64
    for ix in indices:
        s = _mix((s + _GOLDEN * ((ix & _MASK64) + 1)) & _MASK64)
    return s


@dataclass(frozen=True)
class SimSeed:
    """Seed of a single simulation: evaluation seed plus stream index.

    (seed, stream) together with the model parameters and the policy
    schedule fully determine a trajectory.
    """

    seed: int
    stream: int

    def __post_init__(self):
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must fit in 64 bits")
        if not 0 <= self.stream <= _MASK64:
            raise ValueError("stream must fit in 64 bits")

    def bit_generator(self) -> np.random.Philox:
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        return np.random.Philox(key=key)

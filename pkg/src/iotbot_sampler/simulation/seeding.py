"""
Seed handling for reproducible simulations.

Every random draw in a trial flows from one integer seed. The seed is split
with ``numpy.random.SeedSequence.spawn`` into independent generators, one per
consumer, so adding draws to one consumer never shifts another's stream.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrialStreams:
    """Independent generators for the random processes of a single trial."""
    attack: np.random.Generator
    arrivals: np.random.Generator
    ports: np.random.Generator


def trial_streams(seed: int) -> TrialStreams:
    attack, arrivals, ports = np.random.SeedSequence(seed).spawn(3)
    return TrialStreams(
        attack=np.random.default_rng(attack),
        arrivals=np.random.default_rng(arrivals),
        ports=np.random.default_rng(ports),
    )


def trial_seed(base_seed: int, trial: int) -> int:
    """Seed of trial ``trial`` in any sweep cell."""
    return base_seed + trial

"""Deterministic per-(policy, run) random streams derived from one master seed."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 finalizer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_seed(master_seed: int, policy_ordinal: int, run_index: int) -> int:
    if policy_ordinal < 0 or run_index < 0:
        raise ValueError('policy ordinal and run index must be non-negative')
    return mix64(
        (master_seed & MASK64)
        ^ mix64(policy_ordinal)
        ^ mix64((run_index * GOLDEN_GAMMA) & MASK64)
    )


def make_streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """(channel outcome stream, policy stream) for one run."""
    channel_seq, policy_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.PCG64(channel_seq)), np.random.Generator(
        np.random.PCG64(policy_seq)
    )


@dataclass(frozen=True)
class RunPlan:
    master_seed: int
    policy_ordinal: int

    def seed_for(self, run_index: int) -> int:
        return stream_seed(self.master_seed, self.policy_ordinal, run_index)

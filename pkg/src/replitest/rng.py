"""Seed derivation and generator construction.

All randomness flows through numpy's counter-based Philox generator. Seeds
for sub-tasks are derived by hashing, so trial ``k`` of an experiment gets the
same streams no matter how many workers ran or in which order.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

SEED_MASK = (1 << 64) - 1


def derive_seed(master, *path) -> int:
    """Hash ``master`` and a path of labels into a 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master) & SEED_MASK).encode())
    for part in path:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "little")


def make_rng(seed, *path) -> np.random.Generator:
    """Philox generator for ``seed`` (optionally refined by ``path``)."""
    if path:
        seed = derive_seed(seed, *path)
    return np.random.Generator(np.random.Philox(int(seed) & SEED_MASK))


@dataclass(frozen=True)
class Seeds:
    """Seed pair for one tester invocation.

    ``sample_seed`` drives the data; ``randomness_seed`` drives the
    internal randomness (the threshold ``r``). Replicability experiments share
    the latter between two runs and redraw the former.
    """

    sample_seed: int
    randomness_seed: int

    def child(self, label) -> "Seeds":
        """Seeds for a sub-computation, derived deterministically."""
        return Seeds(derive_seed(self.sample_seed, label), derive_seed(self.randomness_seed, label))

    @classmethod
    def for_trial(cls, master, trial, sample_role="samples1") -> "Seeds":
        return cls(derive_seed(master, trial, sample_role), derive_seed(master, trial, "randomness"))


def uniform_threshold(randomness_seed, low=0.25, high=0.75, label="r") -> float:
    """The shared threshold ``r ~ U[low, high]`` drawn from the randomness seed only."""
    return float(make_rng(randomness_seed, label).uniform(low, high))

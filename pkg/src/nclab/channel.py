"""Seeded simulation of the erasure channel ``r = gamma * s + n``."""

from __future__ import annotations

import math
from typing import NamedTuple, Tuple, Union

import numpy as np

from .errors import EmptyAudit
from .model import ChannelParams

SeedLike = Union[int, np.random.SeedSequence]

ERASURE_STREAM = 0
NOISE_STREAM = 1
STATE_STREAM = 2


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def trial_seed(master_seed: int, trial_index: int) -> np.random.SeedSequence:
    """Per-trial seed; independent of how many other trials are run."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(trial_index),))


def substream(seed: SeedLike, key: int) -> np.random.Generator:
    """Generator for one named stream under ``seed``.

    Uses an explicit spawn key rather than ``SeedSequence.spawn`` so that the
    result does not depend on how many children were spawned before.
    """
    ss = as_seed_sequence(seed)
    child = np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (key,),
                                   pool_size=ss.pool_size)
    return np.random.Generator(np.random.PCG64(child))


class Transmission(NamedTuple):
    r: float
    gamma: int


class PowerAudit(NamedTuple):
    mean_power: float
    slots: int


class ChannelInstance:
    """One trajectory's channel: erasure and noise streams plus a power meter.

    The two streams are separate generators, so the erasure record depends
    only on the seed and never on how much noise was drawn.
    """

    def __init__(self, params: ChannelParams, seed: SeedLike = 0):
        self.params = params
        self._erasures = substream(seed, ERASURE_STREAM)
        self._noise = substream(seed, NOISE_STREAM)
        self._noise_std = math.sqrt(params.noise_var)
        self.energy = 0.0
        self.slots = 0

    def transmit(self, s: float) -> Transmission:
        gamma = 0 if self._erasures.random() < self.params.drop_prob else 1
        n = self._noise_std * self._noise.standard_normal()
        self.energy += s * s
        self.slots += 1
        return Transmission(gamma * s + n, gamma)

    def draw_block(self, size: int) -> Tuple[np.ndarray, np.ndarray]:
        """Draw ``size`` slots of (gamma, noise) without transmitting.

        Gives the same values that ``size`` calls to :meth:`transmit` would
        have used.
        """
        gammas = (self._erasures.random(size) >= self.params.drop_prob).astype(np.int8)
        noise = self._noise_std * self._noise.standard_normal(size)
        return gammas, noise

    def draw_erasures(self, size: int) -> np.ndarray:
        return (self._erasures.random(size) >= self.params.drop_prob).astype(np.int8)

    def power_audit(self) -> PowerAudit:
        if self.slots == 0:
            raise EmptyAudit("no slots transmitted yet")
        return PowerAudit(self.energy / self.slots, self.slots)


def power_audit(chan: ChannelInstance) -> PowerAudit:
    return chan.power_audit()

"""Slot schedulers deciding which encoder/decoder pair uses the channel.

All schedulers are driven only by the erasure record: feed each slot's
``gamma`` to :meth:`step` and read :attr:`owner` for the pair that should
transmit in the next slot. Pair indices are 0-based.
"""

from __future__ import annotations

import math
from typing import Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

from . import _csv
from .errors import ConfigError
from .model import ChannelParams, delta

FIXED_TDMA = "fixed_tdma"
ADAPTIVE_TDMA = "adaptive_tdma"
OPTIMAL2D = "optimal2d"
KINDS = (FIXED_TDMA, ADAPTIVE_TDMA, OPTIMAL2D)


class RoundRecord(NamedTuple):
    durations: Tuple[int, ...]   # slots spent by each pair in the round
    successes: Tuple[int, ...]   # successful receptions of each pair in the round

    @property
    def total(self) -> int:
        return sum(self.durations)


class Scheduler:
    kind: str = ""

    def __init__(self, pairs: int):
        self.pairs = pairs
        self.owner = 0
        self.round_index = 0
        self.phase_elapsed = 0
        self.phase_successes = 0
        self.round_log: List[RoundRecord] = []
        self._durations = [0] * pairs
        self._successes = [0] * pairs

    def step(self, gamma: int) -> "Scheduler":
        raise NotImplementedError

    def _close_phase(self):
        self._durations[self.owner] = self.phase_elapsed
        self._successes[self.owner] = self.phase_successes
        self.phase_elapsed = 0
        self.phase_successes = 0

    def _close_round(self):
        self.round_log.append(RoundRecord(tuple(self._durations), tuple(self._successes)))
        self._durations = [0] * self.pairs
        self._successes = [0] * self.pairs
        self.round_index += 1
        self.owner = 0

    def round_log_csv(self, dest=None):
        header = ["round"] + [f"T_{i + 1}" for i in range(self.pairs)]
        rows = ((k + 1, *rec.durations) for k, rec in enumerate(self.round_log))
        return _csv.write_rows(dest, header, rows)


class FixedTDMA(Scheduler):
    """Each pair owns a fixed number of slots per round, whatever the erasures."""

    kind = FIXED_TDMA

    def __init__(self, budgets: Sequence[int]):
        budgets = tuple(int(b) for b in budgets)
        if not budgets or min(budgets) < 1:
            raise ConfigError("slot budgets must be positive integers")
        super().__init__(len(budgets))
        self.quotas = budgets

    def step(self, gamma: int) -> "FixedTDMA":
        self.phase_elapsed += 1
        self.phase_successes += gamma
        if self.phase_elapsed == self.quotas[self.owner]:
            self._close_phase()
            if self.owner == self.pairs - 1:
                self._close_round()
            else:
                self.owner += 1
        return self


class AdaptiveTDMA(Scheduler):
    """A pair keeps the channel until it has collected its quota of successes."""

    kind = ADAPTIVE_TDMA

    def __init__(self, quotas: Sequence[int]):
        quotas = tuple(int(q) for q in quotas)
        if not quotas or min(quotas) < 1:
            raise ConfigError("success quotas must be positive integers")
        super().__init__(len(quotas))
        self.quotas = quotas

    def step(self, gamma: int) -> "AdaptiveTDMA":
        self.phase_elapsed += 1
        self.phase_successes += gamma
        if self.phase_successes == self.quotas[self.owner]:
            self._close_phase()
            if self.owner == self.pairs - 1:
                self._close_round()
            else:
                self.owner += 1
        return self


class Optimal2D(Scheduler):
    """Two-pair scheduler that steers success counts toward the balanced split.

    Phase 1 gives pair 0 the channel until ``n1`` successes (``T1`` slots).
    If ``n1 + T1*phi > 0`` (``phi = 2(ln_l1 - ln_l2)/ln(delta) < 0``), pair 1
    then transmits until, after some slot, its success count ``S`` strictly
    exceeds ``n1 + (T1 + T2)*phi``; otherwise phase 2 is skipped.
    """

    kind = OPTIMAL2D

    def __init__(self, n1: int, ln_l1: float, ln_l2: float, ch: ChannelParams):
        if not ln_l1 > ln_l2:
            raise ConfigError(f"optimal2d needs ln_l1 > ln_l2, got {ln_l1} <= {ln_l2}")
        if int(n1) != n1 or n1 < 1:
            raise ConfigError("n1 must be a positive integer")
        super().__init__(2)
        self.quotas = (int(n1),)
        self.n1 = int(n1)
        self.ln_l1 = float(ln_l1)
        self.ln_l2 = float(ln_l2)
        self.phi = 2.0 * (ln_l1 - ln_l2) / math.log(delta(ch))
        self.phase1_duration = 0

    @property
    def critical_duration(self) -> float:
        """Longest phase 1 after which phase 2 still runs (``T^c``)."""
        return -self.n1 / self.phi

    def step(self, gamma: int) -> "Optimal2D":
        self.phase_elapsed += 1
        self.phase_successes += gamma
        if self.owner == 0:
            if self.phase_successes == self.n1:
                self.phase1_duration = self.phase_elapsed
                self._close_phase()
                if self.n1 + self.phase1_duration * self.phi > 0:
                    self.owner = 1
                else:
                    self._close_round()
        elif self.phase_successes > self.n1 + (self.phase1_duration + self.phase_elapsed) * self.phi:
            self._close_phase()
            self._close_round()
        return self

    def round_log_csv(self, dest=None):
        rows = ((k + 1, rec.durations[0], rec.durations[1], rec.successes[1])
                for k, rec in enumerate(self.round_log))
        return _csv.write_rows(dest, ["round", "T1", "T2", "n2"], rows)


def fixed_tdma_step(st: FixedTDMA, gamma: int) -> FixedTDMA:
    return st.step(gamma)


def adaptive_tdma_step(st: AdaptiveTDMA, gamma: int) -> AdaptiveTDMA:
    return st.step(gamma)


def optimal2d_step(st: Optimal2D, gamma: int) -> Optimal2D:
    return st.step(gamma)


def make_scheduler(kind: str, *, quotas: Sequence[int] | None = None, n1: int | None = None,
                   ln_ls: Sequence[float] | None = None, ch: ChannelParams | None = None,
                   pairs: int | None = None) -> Scheduler:
    if kind == FIXED_TDMA:
        if quotas is None:
            quotas = (1,) * (pairs if pairs else len(ln_ls))
        return FixedTDMA(quotas)
    if kind == ADAPTIVE_TDMA:
        if quotas is None:
            raise ConfigError("adaptive_tdma needs quotas")
        return AdaptiveTDMA(quotas)
    if kind == OPTIMAL2D:
        if n1 is None or ln_ls is None or ch is None or len(ln_ls) != 2:
            raise ConfigError("optimal2d needs n1, two log-magnitudes and channel parameters")
        return Optimal2D(n1, ln_ls[0], ln_ls[1], ch)
    raise ConfigError(f"unknown scheduler kind {kind!r}; expected one of {KINDS}")


def owner_sequence(sched: Scheduler, gammas: Iterable[int]) -> np.ndarray:
    """Owner of every slot when ``sched`` is driven by ``gammas``."""
    out = []
    for g in gammas:
        out.append(sched.owner)
        sched.step(int(g))
    return np.array(out, dtype=np.int64)


def run_rounds(sched: Scheduler, gammas: Iterable[int]) -> List[RoundRecord]:
    """Drive ``sched`` over an erasure record; returns completed rounds only."""
    step = sched.step
    for g in gammas:
        step(g)
    return sched.round_log

"""Matching state and rewards for both disposal settings.

Decisions are plain ints: an offline index, or ``SKIP`` (-1).
"""

from __future__ import annotations

import bisect
import enum
from typing import Sequence

import numpy as np

SKIP = -1


class Setting(enum.Enum):
    NO_FREE_DISPOSAL = "nfd"
    FREE_DISPOSAL = "fd"

    @classmethod
    def parse(cls, value) -> "Setting":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


NFD = Setting.NO_FREE_DISPOSAL
FD = Setting.FREE_DISPOSAL


class CapacityError(RuntimeError):
    pass


def top_set(multiset: Sequence[float], capacity: int) -> np.ndarray:
    """The ``capacity`` largest weights, sorted increasing and zero-padded.

    Ties keep the earliest-inserted element (stable sort on descending weight).
    """
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    arr = np.asarray(multiset, dtype=np.float64)
    order = np.argsort(-arr, kind="stable")[:capacity]
    top = np.zeros(capacity)
    chosen = np.sort(arr[order])
    top[capacity - len(chosen):] = chosen
    return top


def f_value(multiset: Sequence[float], capacity: int) -> float:
    """Counted reward of one offline item under free disposal."""
    return float(top_set(multiset, capacity).sum())


def delta_f(multiset: Sequence[float], capacity: int, w: float) -> float:
    """Marginal counted reward of adding a weight ``w`` to ``multiset``."""
    return f_value(list(multiset) + [w], capacity) - f_value(multiset, capacity)


class MatchLedger:
    """Per-offline-item matched weights, counts and the running reward ``R``.

    Under free disposal each item also keeps its zero-padded top set
    (increasing); adding ``w`` then gains ``max(0, w - top[0])``.
    """

    def __init__(self, capacities, setting: Setting = NFD):
        self.setting = Setting.parse(setting)
        self.capacities = np.asarray(capacities, dtype=np.int64)
        n = len(self.capacities)
        self.matched: list[list[float]] = [[] for _ in range(n)]
        self.counts = np.zeros(n, dtype=np.int64)
        self.reward = 0.0
        self._tops = [[0.0] * int(c) for c in self.capacities]

    @property
    def num_offline(self) -> int:
        return len(self.capacities)

    def copy(self) -> "MatchLedger":
        other = MatchLedger.__new__(MatchLedger)
        other.setting = self.setting
        other.capacities = self.capacities
        other.matched = [list(m) for m in self.matched]
        other.counts = self.counts.copy()
        other.reward = self.reward
        other._tops = [list(t) for t in self._tops]
        return other

    def is_available(self, u: int) -> bool:
        if self.setting is FD:
            return True
        return bool(self.counts[u] < self.capacities[u])

    def availability(self) -> np.ndarray:
        if self.setting is FD:
            return np.ones(self.num_offline, dtype=bool)
        return self.counts < self.capacities

    def top(self, u: int) -> np.ndarray:
        """Zero-padded top set of ``u`` (increasing)."""
        return np.array(self._tops[u])

    def tops(self) -> list[list[float]]:
        return self._tops

    def gain(self, decision: int, row) -> float:
        """Reward that ``decision`` would realize, without applying it."""
        if decision == SKIP:
            return 0.0
        w = float(row[decision])
        if self.setting is NFD:
            return w
        return max(0.0, w - self._tops[decision][0])

    def apply(self, decision: int, row) -> float:
        """Apply ``decision`` for an arrival with weights ``row``; returns the gain."""
        if decision == SKIP:
            return 0.0
        u = int(decision)
        if not 0 <= u < self.num_offline:
            raise IndexError(f"offline index {u} out of range")
        w = float(row[u])
        if self.setting is NFD:
            if self.counts[u] >= self.capacities[u]:
                raise CapacityError(f"offline item {u} is full ({self.capacities[u]})")
            g = w
        else:
            top = self._tops[u]
            g = w - top[0]
            if g > 0.0:
                del top[0]
                # bisect_left keeps earlier equal weights above the newcomer
                bisect.insort_left(top, w)
            else:
                g = 0.0
        self.matched[u].append(w)
        self.counts[u] += 1
        self.reward += g
        return g

    def recomputed_reward(self) -> float:
        """``R`` rebuilt from the stored multisets (audit path)."""
        if self.setting is NFD:
            return float(sum(sum(m) for m in self.matched))
        return float(sum(f_value(m, int(c)) for m, c in zip(self.matched, self.capacities)))


def apply_decision(ledger: MatchLedger, decision: int, row) -> tuple[MatchLedger, float]:
    """Functional form of :meth:`MatchLedger.apply`: returns a new ledger and the gain."""
    out = ledger.copy()
    g = out.apply(decision, row)
    return out, g

"""Expert online algorithms run on their own shadow ledgers.

An expert decides from its shadow ledger, the current weight row, the
1-based step index and private state only; it never sees the actual run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matching import NFD, SKIP, MatchLedger, Setting


@dataclass(frozen=True)
class ExpertKind:
    name: str  # "greedy" or "osm"

    @classmethod
    def parse(cls, value) -> "ExpertKind":
        if isinstance(value, cls):
            return value
        name = str(value).lower()
        if name not in ("greedy", "osm"):
            raise ValueError(f"unknown expert {value!r}")
        return cls(name)


GREEDY = ExpertKind("greedy")
OSM = ExpertKind("osm")


def osm_phase_length(num_online: int) -> int:
    return int(math.floor(num_online / math.e))


def greedy_decide(shadow: MatchLedger, row, capacities=None) -> int:
    row = np.asarray(row, dtype=np.float64)
    if shadow.setting is NFD:
        caps = shadow.capacities if capacities is None else np.asarray(capacities)
        avail = shadow.counts < caps
        if not avail.any():
            return SKIP
        masked = np.where(avail, row, -np.inf)
        u = int(np.argmax(masked))  # first maximum = smallest index
        return u if masked[u] > 0.0 else SKIP
    # free disposal: best marginal gain, then larger raw weight, then smaller index
    best, best_gain, best_w = SKIP, -1.0, -1.0
    for u in range(len(row)):
        g = shadow.gain(u, row)
        w = row[u]
        if g > best_gain or (g == best_gain and w > best_w):
            best, best_gain, best_w = u, g, w
    if best_gain <= 0.0 and best_w <= 0.0:
        return SKIP
    return best


def osm_decide(shadow: MatchLedger, row, step: int, phase_length: int, threshold: float) -> tuple[int, float]:
    """Single-threshold secretary rule; ``step`` is 1-based.

    The first ``phase_length`` arrivals are observed only and set the
    threshold to the largest weight seen; afterwards the best available item
    is taken if its weight strictly beats the threshold.
    """
    row = np.asarray(row, dtype=np.float64)
    if step <= phase_length:
        return SKIP, max(threshold, float(row.max(initial=0.0)))
    avail = shadow.availability()
    if not avail.any():
        return SKIP, threshold
    masked = np.where(avail, row, -np.inf)
    u = int(np.argmax(masked))
    if masked[u] > threshold:
        return u, threshold
    return SKIP, threshold


class Expert:
    """Runs one expert over an episode, owning its shadow ledger."""

    def __init__(self, kind, capacities, setting: Setting, num_online: int):
        self.kind = ExpertKind.parse(kind)
        self.shadow = MatchLedger(capacities, setting)
        self.phase_length = osm_phase_length(num_online)
        self.threshold = 0.0

    @property
    def reward(self) -> float:
        return self.shadow.reward

    def step(self, step: int, row) -> tuple[int, float]:
        """Decide for arrival ``step`` (1-based), update the shadow; returns (decision, gain)."""
        if self.kind.name == "greedy":
            d = greedy_decide(self.shadow, row)
        else:
            d, self.threshold = osm_decide(self.shadow, row, step, self.phase_length, self.threshold)
        return d, self.shadow.apply(d, row)


def run_expert(instance, kind, setting=NFD) -> tuple[list[int], float]:
    """Expert alone on ``instance``: its decisions and total reward."""
    expert = Expert(kind, instance.capacities, Setting.parse(setting), instance.num_online)
    decisions = [expert.step(v + 1, instance.weights[v])[0] for v in range(instance.num_online)]
    return decisions, expert.reward

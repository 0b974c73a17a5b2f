"""Per-pair history features read by the scoring network.

Column layout of :func:`feature_matrix` (one row per offline item ``u``):

====  ==========================================================
 0    current weight ``w_uv``
 1    remaining capacity fraction ``max(c_u - n_u, 0) / c_u``
 2    mean of ``w_uv'`` over past arrivals ``v' < v``
 3    population variance of the same
 4    fraction of past arrivals with ``w_uv' > 0``
 5    step ``v / |V|`` (1-based ``v``)
 6    fraction of offline items with positive weight in this row
 7-10 max, min, mean, population variance of weights matched to ``u``
 11   fraction of offline items at capacity
 12   fraction of past arrivals the actual run skipped
 13   cumulative actual reward divided by ``|U|``
====  ==========================================================

Empty statistics are 0.  Variances use Welford updates.
"""

from __future__ import annotations

import numpy as np

from .matching import SKIP, MatchLedger

FEATURE_SPEC_VERSION = "matchlab-features-v1"
NUM_FEATURES = 14


class RunState:
    """Actual-run ledger plus the running statistics the features need."""

    def __init__(self, ledger: MatchLedger, num_online: int):
        n = ledger.num_offline
        self.ledger = ledger
        self.num_online = num_online
        self.step = 0  # arrivals already processed
        self.skips = 0
        self.seen_mean = np.zeros(n)
        self.seen_m2 = np.zeros(n)
        self.seen_pos = np.zeros(n)
        self.m_count = np.zeros(n)
        self.m_mean = np.zeros(n)
        self.m_m2 = np.zeros(n)
        self.m_max = np.zeros(n)
        self.m_min = np.zeros(n)

    def advance(self, row, decision: int) -> None:
        """Fold arrival ``row`` and the decision taken for it into the statistics.

        The ledger itself is updated by the caller.
        """
        row = np.asarray(row, dtype=np.float64)
        k = self.step + 1
        delta = row - self.seen_mean
        self.seen_mean += delta / k
        self.seen_m2 += delta * (row - self.seen_mean)
        self.seen_pos += row > 0.0
        self.step = k
        if decision == SKIP:
            self.skips += 1
            return
        u = decision
        w = row[u]
        c = self.m_count[u] + 1
        if c == 1:
            self.m_max[u] = w
            self.m_min[u] = w
        else:
            self.m_max[u] = max(self.m_max[u], w)
            self.m_min[u] = min(self.m_min[u], w)
        d = w - self.m_mean[u]
        self.m_mean[u] += d / c
        self.m_m2[u] += d * (w - self.m_mean[u])
        self.m_count[u] = c


def feature_matrix(state: RunState, row) -> np.ndarray:
    row = np.asarray(row, dtype=np.float64)
    led = state.ledger
    n = led.num_offline
    caps = led.capacities.astype(np.float64)
    past = state.step
    out = np.empty((n, NUM_FEATURES))
    out[:, 0] = row
    out[:, 1] = np.maximum(caps - led.counts, 0.0) / caps
    out[:, 2] = state.seen_mean
    out[:, 3] = state.seen_m2 / past if past else 0.0
    out[:, 4] = state.seen_pos / past if past else 0.0
    out[:, 5] = (past + 1) / state.num_online
    out[:, 6] = np.count_nonzero(row > 0.0) / n
    out[:, 7] = state.m_max
    out[:, 8] = state.m_min
    out[:, 9] = state.m_mean
    out[:, 10] = np.where(state.m_count > 0, state.m_m2 / np.maximum(state.m_count, 1), 0.0)
    out[:, 11] = np.count_nonzero(led.counts >= led.capacities) / n
    out[:, 12] = state.skips / past if past else 0.0
    out[:, 13] = led.reward / n
    return out


def extract_features(state: RunState, u: int, v: int, row) -> np.ndarray:
    """Feature vector of pair ``(u, v)``; ``v`` must be the next arrival (1-based)."""
    if v != state.step + 1:
        raise ValueError(f"run state is at arrival {state.step + 1}, not {v}")
    return feature_matrix(state, row)[u]

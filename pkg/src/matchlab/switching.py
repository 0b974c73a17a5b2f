"""Robust switching between a proposer and an expert.

Per arrival the expert shadow moves first, then the proposer suggests a
decision, and the proposal is kept only if the reward after taking it still
covers ``rho`` times the expert's reward plus a hedge for what the expert
could still collect, minus ``B``.  Otherwise the expert's decision is
copied (or, without free disposal, skip when the expert's item is already
full in the actual run).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .experts import Expert
from .features import RunState
from .matching import FD, NFD, SKIP, MatchLedger, Setting

TOL = 1e-9


@dataclass(frozen=True)
class SwitchConfig:
    rho: float = 0.5
    budget_b: float = 0.0
    setting: Setting = NFD

    def __post_init__(self):
        object.__setattr__(self, "setting", Setting.parse(self.setting))
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if not self.budget_b >= 0.0:
            raise ValueError(f"budget_b must be >= 0, got {self.budget_b}")


def _weighted_excess(excess: np.ndarray, weight_caps: np.ndarray) -> float:
    total = 0.0
    for u in np.flatnonzero(excess > 0):  # index order, so every code path sums alike
        total += excess[u] * weight_caps[u]
    return float(total)


def hedge_nfd(actual: MatchLedger, expert_shadow: MatchLedger, proposal: int, weight_caps) -> float:
    """Reservation for the expert's possible future gain (``inf`` if a cap is unbounded)."""
    excess = actual.counts - expert_shadow.counts
    if proposal != SKIP:
        excess = excess.copy()
        excess[proposal] += 1
    return _weighted_excess(excess, np.asarray(weight_caps, dtype=np.float64))


def hedge_nfd_at_rest(actual: MatchLedger, expert_shadow: MatchLedger, weight_caps) -> float:
    return hedge_nfd(actual, expert_shadow, SKIP, weight_caps)


def prefix_hedge(lomar_top, expert_top) -> float:
    """``max_i sum_{j<=i} (lomar_top[j] - expert_top[j])`` clamped at zero."""
    d = np.cumsum(np.asarray(lomar_top, dtype=np.float64) - np.asarray(expert_top, dtype=np.float64))
    return max(float(d.max(initial=0.0)), 0.0)


def _tilde_top(top: list[float], w: float) -> list[float]:
    if w <= top[0]:
        return top
    out = sorted(top[1:] + [w])
    return out


def hedge_fd(actual: MatchLedger, expert_shadow: MatchLedger, proposal: int, row=None) -> float:
    """Free-disposal hedge over zero-padded sorted top sets.

    The proposed item's top set is taken with the current arrival added;
    ``row`` is required when ``proposal`` is not skip.
    """
    total = 0.0
    a_tops = actual.tops()
    e_tops = expert_shadow.tops()
    for u in range(actual.num_offline):
        top = a_tops[u]
        if u == proposal:
            top = _tilde_top(top, float(row[u]))
        total += prefix_hedge(top, e_tops[u])
    return total


def hedge_fd_at_rest(actual: MatchLedger, expert_shadow: MatchLedger) -> float:
    return hedge_fd(actual, expert_shadow, SKIP)


def _rhs(r_pi: float, hedge: float, cfg: SwitchConfig) -> float:
    if cfg.rho == 0.0:
        return -cfg.budget_b
    return cfg.rho * (r_pi + hedge) - cfg.budget_b


def condition_nfd(r_prev: float, w_proposed: float, r_pi: float, hedge: float, cfg: SwitchConfig) -> bool:
    if cfg.rho == 0.0:
        return True
    return r_prev + w_proposed >= _rhs(r_pi, hedge, cfg) - TOL


def condition_fd(r_prev: float, delta_f_proposed: float, r_pi: float, hedge: float, cfg: SwitchConfig) -> bool:
    if cfg.rho == 0.0:
        return True
    return r_prev + delta_f_proposed >= _rhs(r_pi, hedge, cfg) - TOL


def switch_slack(actual: MatchLedger, expert_shadow: MatchLedger, proposal: int, row, weight_caps,
                 cfg: SwitchConfig) -> tuple[float, float]:
    """(hedge, LHS - RHS) of the active switching condition for ``proposal``.

    Positive slack means the proposal may be followed; ``-inf`` when the
    hedge is unbounded and ``rho > 0``.
    """
    gain = actual.gain(proposal, row)
    if cfg.setting is NFD:
        hedge = hedge_nfd(actual, expert_shadow, proposal, weight_caps)
    else:
        hedge = hedge_fd(actual, expert_shadow, proposal, row)
    rhs = _rhs(expert_shadow.reward, hedge, cfg)
    return hedge, actual.reward + gain - rhs


def option_slacks(actual: MatchLedger, expert_shadow: MatchLedger, row, weight_caps,
                  cfg: SwitchConfig) -> np.ndarray:
    """Switching slack for every option at once: items ``0..U-1`` then skip.

    Matches :func:`switch_slack` option by option (up to summation order).
    """
    row = np.asarray(row, dtype=np.float64)
    n = actual.num_offline
    out = np.empty(n + 1)
    r_pi = expert_shadow.reward
    if cfg.setting is NFD:
        caps = np.asarray(weight_caps, dtype=np.float64)
        excess = actual.counts - expert_shadow.counts
        base = _weighted_excess(excess, caps)
        extra = np.where(excess >= 0, caps, 0.0)
        gains = row
        hedges = base + extra
    else:
        a_tops, e_tops = actual.tops(), expert_shadow.tops()
        terms = np.array([prefix_hedge(a_tops[u], e_tops[u]) for u in range(n)])
        base = float(terms.sum())
        tilde = np.array([prefix_hedge(_tilde_top(a_tops[u], row[u]), e_tops[u]) for u in range(n)])
        gains = np.array([max(0.0, row[u] - a_tops[u][0]) for u in range(n)])
        hedges = base - terms + tilde
    if cfg.rho == 0.0:
        out[:n] = actual.reward + gains + cfg.budget_b
        out[n] = actual.reward + cfg.budget_b
    else:
        out[:n] = actual.reward + gains - (cfg.rho * (r_pi + hedges) - cfg.budget_b)
        out[n] = actual.reward - (cfg.rho * (r_pi + base) - cfg.budget_b)
    return out


def rest_slack(actual: MatchLedger, expert_shadow: MatchLedger, weight_caps, cfg: SwitchConfig) -> float:
    """Slack of the post-decision invariant that the switching rule maintains."""
    if cfg.setting is NFD:
        hedge = hedge_nfd_at_rest(actual, expert_shadow, weight_caps)
    else:
        hedge = hedge_fd_at_rest(actual, expert_shadow)
    return actual.reward - _rhs(expert_shadow.reward, hedge, cfg)


def lomar_step(actual: MatchLedger, expert_shadow: MatchLedger, proposal: int, expert_decision: int,
               row, weight_caps, cfg: SwitchConfig) -> tuple[int, bool, float]:
    """Actual decision for one arrival; returns (decision, condition held, hedge)."""
    hedge, slack = switch_slack(actual, expert_shadow, proposal, row, weight_caps, cfg)
    ok = cfg.rho == 0.0 or slack >= -TOL
    if ok:
        return proposal, True, hedge
    if cfg.setting is FD or expert_decision == SKIP or actual.is_available(expert_decision):
        return expert_decision, False, hedge
    return SKIP, False, hedge


# -- proposers ---------------------------------------------------------------


class Proposer:
    """Source of per-arrival proposals.  ``begin`` is called once per episode."""

    def begin(self, instance, setting: Setting) -> None:
        pass

    def propose(self, state: RunState, row) -> int:
        raise NotImplementedError


def best_available(state: RunState, row) -> int:
    avail = state.ledger.availability()
    masked = np.where(avail, row, -np.inf)
    u = int(np.argmax(masked))
    return u if masked[u] > 0.0 else SKIP


class ScriptedProposer(Proposer):
    """Replays a script; entries are decisions or callables ``f(state, row) -> decision``.

    Past the end of the script it proposes skip.
    """

    def __init__(self, script):
        self.script = list(script)

    def propose(self, state, row):
        k = state.step
        if k >= len(self.script):
            return SKIP
        entry = self.script[k]
        return entry(state, row) if callable(entry) else int(entry)


class FunctionProposer(Proposer):
    def __init__(self, fn):
        self.fn = fn

    def propose(self, state, row):
        return self.fn(state, row)


class AdversarialProposer(Proposer):
    """Grabs the available item with the smallest positive weight.

    It burns capacity on poor edges, which is the behaviour the hedge term
    has to defend against.
    """

    def propose(self, state, row):
        avail = state.ledger.availability() & (np.asarray(row) > 0.0)
        if not avail.any():
            return SKIP
        masked = np.where(avail, row, np.inf)
        return int(np.argmin(masked))


class RandomProposer(Proposer):
    """Uniform over available items and skip; seeded per episode."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.episode = 0
        self.rng = np.random.default_rng(seed)

    def begin(self, instance, setting):
        self.rng = self.episode_rng(self.episode)
        self.episode += 1

    def episode_rng(self, episode: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, episode])

    def propose(self, state, row):
        choices = np.flatnonzero(state.ledger.availability())
        k = min(int(self.rng.random() * (len(choices) + 1)), len(choices))
        return SKIP if k == len(choices) else int(choices[k])


# -- episodes ----------------------------------------------------------------


@dataclass
class RunTrace:
    proposals: np.ndarray
    expert_decisions: np.ndarray
    decisions: np.ndarray
    conditions: np.ndarray
    rewards: np.ndarray  # R_v after each step
    expert_rewards: np.ndarray  # R^pi_v after each step
    hedges: np.ndarray  # hedge used by the switching test at each step
    slacks: np.ndarray  # post-decision invariant LHS - RHS
    counts: np.ndarray = field(repr=False)  # (V, U) actual counts after each step
    expert_counts: np.ndarray = field(repr=False)
    reward: float = 0.0
    expert_reward: float = 0.0

    @property
    def min_slack(self) -> float:
        return float(self.slacks.min(initial=math.inf))

    def final_gap(self, cfg: SwitchConfig) -> float:
        """``R - (rho * R_pi - B)``; non-negative up to tolerance when the guarantee holds."""
        return self.reward - (cfg.rho * self.expert_reward - cfg.budget_b)


def run_episode(instance, proposer: Proposer, expert, cfg: SwitchConfig) -> RunTrace:
    """One inference episode with robust switching."""
    setting = cfg.setting
    n_on, n_off = instance.num_online, instance.num_offline
    caps_w = instance.weight_caps
    ledger = MatchLedger(instance.capacities, setting)
    state = RunState(ledger, n_on)
    exp = Expert(expert, instance.capacities, setting, n_on)
    proposer.begin(instance, setting)

    cols = {k: np.empty(n_on) for k in ("rewards", "expert_rewards", "hedges", "slacks")}
    ints = {k: np.empty(n_on, dtype=np.int64) for k in ("proposals", "expert_decisions", "decisions")}
    conds = np.empty(n_on, dtype=bool)
    counts = np.empty((n_on, n_off), dtype=np.int64)
    e_counts = np.empty((n_on, n_off), dtype=np.int64)

    for v in range(n_on):
        row = instance.weights[v]
        x_pi, _ = exp.step(v + 1, row)
        prop = int(proposer.propose(state, row))
        if prop != SKIP and not ledger.is_available(prop):
            prop = SKIP
        x, ok, hedge = lomar_step(ledger, exp.shadow, prop, x_pi, row, caps_w, cfg)
        ledger.apply(x, row)
        state.advance(row, x)

        ints["proposals"][v] = prop
        ints["expert_decisions"][v] = x_pi
        ints["decisions"][v] = x
        conds[v] = ok
        cols["rewards"][v] = ledger.reward
        cols["expert_rewards"][v] = exp.reward
        cols["hedges"][v] = hedge
        cols["slacks"][v] = rest_slack(ledger, exp.shadow, caps_w, cfg)
        counts[v] = ledger.counts
        e_counts[v] = exp.shadow.counts

    return RunTrace(
        conditions=conds,
        counts=counts,
        expert_counts=e_counts,
        reward=ledger.reward,
        expert_reward=exp.reward,
        **ints,
        **cols,
    )


def run_naive_episode(instance, proposer: Proposer, expert, cfg: SwitchConfig) -> RunTrace:
    """Switching without the hedge term (``R_v >= rho R_pi_v - B`` only).

    Exists to demonstrate that the hedge is needed; not a usable algorithm.
    Only defined without free disposal.
    """
    if cfg.setting is not NFD:
        raise ValueError("the naive rule is only defined without free disposal")
    caps = np.zeros(instance.num_offline)
    naive = _ZeroCapInstance(instance, caps)
    return run_episode(naive, proposer, expert, cfg)


class _ZeroCapInstance:
    def __init__(self, inner, caps):
        self._inner = inner
        self.weight_caps = caps

    def __getattr__(self, name):
        return getattr(self._inner, name)

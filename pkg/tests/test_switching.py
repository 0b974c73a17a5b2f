import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matchlab import GeneratorConfig, generate_instances, init_params
from matchlab._accel import NUMBA_ENABLED
from matchlab.engine import simulate
from matchlab.experts import run_expert
from matchlab.matching import FD, NFD, SKIP, MatchLedger
from matchlab.policy import PolicyProposer
from matchlab.switching import (
    AdversarialProposer,
    FunctionProposer,
    RandomProposer,
    ScriptedProposer,
    SwitchConfig,
    best_available,
    condition_fd,
    condition_nfd,
    hedge_fd,
    hedge_nfd,
    lomar_step,
    option_slacks,
    prefix_hedge,
    run_episode,
    run_naive_episode,
    switch_slack,
)



def ledger(caps, assigned, setting=NFD):
    """Ledger with (u, w) pairs already applied."""
    led = MatchLedger(caps, setting)
    for u, w in assigned:
        row = np.zeros(len(caps))
        row[u] = w
        led.apply(u, row)
    return led


# -- hedges ------------------------------------------------------------------


def test_hedge_nfd_equal_counts_skip():
    a = ledger([2, 2], [(0, 1.0), (1, 2.0)])
    e = ledger([2, 2], [(0, 3.0), (1, 1.0)])
    assert hedge_nfd(a, e, SKIP, [5, 5]) == 0.0


def test_hedge_nfd_proposal_excess():
    a = ledger([1, 1], [])
    e = ledger([1, 1], [(0, 3.0)])
    assert hedge_nfd(a, e, 1, [5, 5]) == 5.0


def test_hedge_nfd_unbounded():
    a = ledger([1, 1], [])
    e = ledger([1, 1], [])
    assert hedge_nfd(a, e, 0, [math.inf, 5]) == math.inf
    assert hedge_nfd(a, e, 1, [math.inf, 5]) == 5.0


def test_prefix_hedge_examples():
    assert prefix_hedge([1, 5], [2, 3]) == 1.0
    assert prefix_hedge([0, 2], [3, 4]) == 0.0
    assert prefix_hedge([1, 2], [1, 2]) == 0.0


def test_hedge_fd_identical_tops():
    a = ledger([2], [(0, 1.0), (0, 4.0)], FD)
    e = ledger([2], [(0, 4.0), (0, 1.0)], FD)
    assert hedge_fd(a, e, SKIP) == 0.0


def test_hedge_fd_counts_arrival_for_proposal():
    a = ledger([1], [(0, 1.0)], FD)
    e = ledger([1], [(0, 2.0)], FD)
    assert hedge_fd(a, e, SKIP) == 0.0
    # proposing w=3 makes LOMAR's top set (3) vs the expert's (2)
    assert hedge_fd(a, e, 0, [3.0]) == 1.0


tops = st.lists(st.floats(0, 5, allow_nan=False), min_size=1, max_size=4)


@settings(max_examples=200, deadline=None)
@given(tops, tops)
def test_prefix_hedge_properties(x, y):
    n = min(len(x), len(y))
    a, e = sorted(x[:n]), sorted(y[:n])
    assert prefix_hedge(a, e) >= 0.0
    hi = [max(p, q) for p, q in zip(a, e)]
    assert prefix_hedge(a, sorted(hi)) == 0.0


# -- conditions --------------------------------------------------------------


def test_condition_nfd_examples():
    cfg = SwitchConfig(0.5, 0.0)
    assert not condition_nfd(0.0, 2.0, 3.0, 5.0, cfg)
    assert condition_nfd(0.0, 4.9, 3.0, 5.0, cfg)
    assert condition_nfd(0.0, 0.0, 1e9, math.inf, SwitchConfig(0.0, 0.0))


def test_condition_fd_examples():
    cfg = SwitchConfig(0.8, 0.0, FD)
    assert condition_fd(3.0, 2.0, 4.0, 1.0, cfg)
    assert not condition_fd(0.0, 0.0, 4.0, 1.0, cfg)
    assert condition_fd(0.0, 0.0, 4.0, 1.0, SwitchConfig(0.0, 0.0, FD))


def test_condition_boundary_is_generous():
    cfg = SwitchConfig(0.5, 0.0)
    assert condition_nfd(0.0, 4.0 - 5e-10, 3.0, 5.0, cfg)


def test_budget_lowers_bar():
    cfg = SwitchConfig(0.5, 2.0)
    assert condition_nfd(0.0, 2.0, 3.0, 5.0, cfg)


def test_switch_config_validation():
    with pytest.raises(ValueError):
        SwitchConfig(1.5)
    with pytest.raises(ValueError):
        SwitchConfig(0.5, -1.0)


# -- one step ----------------------------------------------------------------


def test_lomar_step_follows_proposal():
    a, e = ledger([1, 1], []), ledger([1, 1], [(0, 1.0)])
    x, ok, _ = lomar_step(a, e, 1, 0, [1.0, 2.0], [2, 2], SwitchConfig(0.5))
    assert ok and x == 1


def test_lomar_step_falls_back_to_expert():
    a, e = ledger([1, 1], []), ledger([1, 1], [(0, 3.0)])
    x, ok, hedge = lomar_step(a, e, 1, 0, [3.0, 2.0], [5, 5], SwitchConfig(0.5))
    assert not ok and x == 0 and hedge == 5.0


def test_lomar_step_skips_when_expert_item_full():
    a = ledger([1, 1], [(0, 1.0)])
    e = ledger([1, 1], [(1, 3.0)])
    x, ok, _ = lomar_step(a, e, 1, 0, [3.0, 0.5], [5, 5], SwitchConfig(1.0))
    assert not ok and x == SKIP


def test_lomar_step_fd_always_follows_expert():
    a = ledger([1, 1], [(0, 1.0)], FD)
    e = ledger([1, 1], [(1, 3.0)], FD)
    x, ok, _ = lomar_step(a, e, 1, 0, [3.0, 0.5], [5, 5], SwitchConfig(1.0, 0.0, FD))
    assert not ok and x == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.0, 0.3, 1.0]), st.sampled_from([NFD, FD]))
def test_option_slacks_match_switch_slack(seed, rho, setting):
    rng = np.random.default_rng(seed)
    caps = rng.integers(1, 3, size=3)
    cfg = SwitchConfig(rho, float(rng.integers(0, 2)), setting)
    a, e = MatchLedger(caps, setting), MatchLedger(caps, setting)
    for _ in range(rng.integers(0, 5)):
        row = rng.random(3)
        for led in (a, e):
            choices = np.flatnonzero(led.availability())
            if choices.size:
                led.apply(int(rng.choice(choices)), row)
    row = rng.random(3)
    sl = option_slacks(a, e, row, np.ones(3), cfg)
    for opt, dec in enumerate([0, 1, 2, SKIP]):
        if dec != SKIP and not a.is_available(dec):
            continue
        _, ref = switch_slack(a, e, dec, row, np.ones(3), cfg)
        assert sl[opt] == pytest.approx(ref, abs=1e-12)


# -- episodes ----------------------------------------------------------------


def test_hand_episode(hand_instance):
    tr = run_episode(hand_instance, ScriptedProposer([1, best_available]), "greedy", SwitchConfig(0.5))
    assert tr.proposals.tolist() == [1, 1]
    assert tr.conditions.tolist() == [False, True]
    assert tr.decisions.tolist() == [0, 1]
    assert tr.hedges.tolist() == [5.0, 0.0]
    assert tr.rewards.tolist() == [3.0, 4.0]
    assert tr.reward == 4.0 == tr.expert_reward


def test_unavailable_proposal_becomes_skip(hand_instance):
    tr = run_episode(hand_instance, ScriptedProposer([0, 0]), "greedy", SwitchConfig(0.0))
    assert tr.proposals.tolist() == [0, SKIP]


def test_rho_zero_follows_proposer():
    inst = generate_instances(GeneratorConfig(3, 15, (1, 2), seed=4), 1)[0]
    script = [2, 2, 0, SKIP, 1, 1, 0, 2, 1, 0, 0, 1, 2, 2, 1]
    tr = run_episode(inst, ScriptedProposer(script), "greedy", SwitchConfig(0.0))
    assert tr.decisions.tolist() == tr.proposals.tolist()
    assert tr.conditions.all()


@pytest.mark.parametrize("kind", ["greedy", "osm"])
@pytest.mark.parametrize("setting", [NFD, FD])
def test_proposer_equal_to_expert(kind, setting):
    for inst in generate_instances(GeneratorConfig(4, 20, (1, 3), sparsity=0.3, seed=11), 5):
        decisions, r_pi = run_expert(inst, kind, setting)
        tr = run_episode(inst, ScriptedProposer(decisions), kind, SwitchConfig(1.0, 0.0, setting))
        assert tr.decisions.tolist() == decisions
        assert tr.reward == r_pi == tr.expert_reward


def test_shadow_matches_standalone_expert():
    inst = generate_instances(GeneratorConfig(3, 12, (1, 2), seed=2), 1)[0]
    tr = run_episode(inst, RandomProposer(3), "osm", SwitchConfig(0.5))
    decisions, r_pi = run_expert(inst, "osm")
    assert tr.expert_decisions.tolist() == decisions and tr.expert_reward == r_pi


def test_naive_rule_breaks_on_counterexample(counterexample):
    cfg = SwitchConfig(0.5, 0.0)
    script = ScriptedProposer([0, SKIP])
    naive = run_naive_episode(counterexample, script, "greedy", cfg)
    assert naive.reward == 1.0 and naive.expert_reward == 7.0
    assert naive.final_gap(cfg) < -1e-9
    robust = run_episode(counterexample, script, "greedy", cfg)
    assert robust.decisions.tolist() == [1, 0]
    assert robust.reward == 7.0
    assert robust.final_gap(cfg) >= -1e-9
    assert robust.min_slack >= -1e-9


def test_naive_rule_nfd_only(counterexample):
    with pytest.raises(ValueError):
        run_naive_episode(counterexample, ScriptedProposer([]), "greedy", SwitchConfig(0.5, 0.0, FD))


def test_callable_script_entries(hand_instance):
    script = ScriptedProposer([lambda s, r: 1, lambda s, r: SKIP])
    fn = FunctionProposer(lambda s, r: 1 if s.step == 0 else SKIP)
    a = run_episode(hand_instance, script, "greedy", SwitchConfig(0.0))
    b = run_episode(hand_instance, fn, "greedy", SwitchConfig(0.0))
    assert a.decisions.tolist() == b.decisions.tolist() == [1, SKIP]


def test_adversarial_proposer_takes_smallest_positive(hand_instance):
    tr = run_episode(hand_instance, AdversarialProposer(), "greedy", SwitchConfig(0.0))
    assert tr.proposals.tolist() == [1, 0]


def test_random_proposer_reproducible():
    inst = generate_instances(GeneratorConfig(4, 20, seed=3), 1)[0]
    a = [run_episode(inst, p, "greedy", SwitchConfig(0.0)).decisions.tolist()
         for p in (RandomProposer(5),) for _ in range(2)]
    b = [run_episode(inst, p, "greedy", SwitchConfig(0.0)).decisions.tolist()
         for p in (RandomProposer(5),) for _ in range(2)]
    assert a == b
    assert a[0] != a[1]  # episodes differ within one proposer


def _proposers():
    return [
        PolicyProposer(init_params((14, 8, 1), seed=3)),
        AdversarialProposer(),
        RandomProposer(9),
        ScriptedProposer([0, SKIP, 1, 2, 0, 1, 1, 0]),
    ]


@pytest.mark.skipif(not NUMBA_ENABLED, reason="compiled kernel disabled")
@pytest.mark.parametrize("setting", [NFD, FD])
@pytest.mark.parametrize("kind", ["greedy", "osm"])
def test_kernel_matches_reference(setting, kind):
    insts = generate_instances(GeneratorConfig(3, 12, (1, 2), sparsity=0.3, seed=21), 6)
    for rho in (0.0, 0.5, 1.0):
        cfg = SwitchConfig(rho, 0.5, setting)
        for p_ref, p_ker in zip(_proposers(), _proposers()):
            for inst in insts:
                ref = simulate(inst, p_ref, kind, cfg, engine="numpy")
                ker = simulate(inst, p_ker, kind, cfg, engine="kernel")
                for name in ("proposals", "expert_decisions", "decisions", "conditions", "counts"):
                    assert getattr(ref, name).tolist() == getattr(ker, name).tolist(), name
                for name in ("rewards", "expert_rewards", "hedges", "slacks"):
                    np.testing.assert_allclose(getattr(ker, name), getattr(ref, name), atol=1e-12)


def test_simulate_falls_back_for_callables(hand_instance):
    p = ScriptedProposer([1, best_available])
    tr = simulate(hand_instance, p, "greedy", SwitchConfig(0.5))
    assert tr.decisions.tolist() == [0, 1]

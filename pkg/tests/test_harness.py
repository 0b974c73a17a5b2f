import csv
import io
import json

import numpy as np
import pytest

from matchlab import GeneratorConfig, generate_instances, init_params
from matchlab.experts import run_expert
from matchlab.harness import (
    CSV_COLUMNS,
    AlgorithmSpec,
    UsageError,
    competitive_floor_ok,
    evaluate,
    load_report,
    render_csv,
    report_render,
    tail_percentiles,
)
from matchlab.oracle import opt_flow

from conftest import make_instance
from helpers import SMALL_DIMS


@pytest.fixture(scope="module")
def instances():
    return generate_instances(GeneratorConfig(4, 15, (1, 2), sparsity=0.2, seed=3), 20)


@pytest.fixture(scope="module")
def policy():
    return init_params(SMALL_DIMS, seed=8)


def test_single_instance_greedy(hand_instance):
    rep = evaluate([hand_instance], [AlgorithmSpec("greedy")])
    g = rep.algorithm("greedy")
    assert g.avg == 4.0
    assert g.cr == pytest.approx(4.0 / opt_flow(hand_instance).value)


def test_percentiles():
    pct = tail_percentiles([1.0, 0.5, 0.9, None, 0.7])
    assert pct["p100"] == 0.5
    assert pct["p50"] == pytest.approx(np.percentile([1.0, 0.5, 0.9, 0.7], 50))
    assert tail_percentiles([None])["p100"] is None


def test_report_aggregates(instances, policy):
    specs = [AlgorithmSpec("greedy"), AlgorithmSpec("opt"), AlgorithmSpec("lomar", rho=0.8, policy=policy),
             AlgorithmSpec("drl", rho=0.8, policy=policy)]
    rep = evaluate(instances, specs)
    assert [a.algo for a in rep.algorithms] == ["greedy", "opt", "lomar", "drl"]
    assert rep.algorithm("drl").rho == 0.0
    assert rep.algorithm("opt").cr == 1.0
    greedy = [run_expert(i, "greedy")[1] for i in instances]
    assert rep.algorithm("greedy").rewards == greedy
    for a in rep.algorithms:
        assert a.cr == min(a.ratios) == a.percentiles["p100"]
        for r, o in zip(a.rewards, rep.opt):
            assert r <= o + 1e-9
    lomar = rep.algorithm("lomar")
    for r, e in zip(lomar.rewards, lomar.expert_rewards):
        assert competitive_floor_ok(r, e, 0.8, 0.0)
    assert set(rep.bi_competitive["lomar"]) == {"vs_expert", "vs_drl"}


def test_lomar_with_expert_proposals_matches_expert(instances):
    from matchlab.policy import zero_params

    # a zero network proposes the best available item, i.e. greedy's own choice
    spec = AlgorithmSpec("lomar", rho=1.0, policy=zero_params(SMALL_DIMS))
    rep = evaluate(instances, [spec, AlgorithmSpec("greedy")])
    assert rep.algorithm("lomar").cr == rep.algorithm("greedy").cr


def test_cr_vs_expert(instances):
    rep = evaluate(instances, [AlgorithmSpec("greedy")], cr_vs="expert")
    assert rep.algorithm("greedy").cr == 1.0


def test_opt_zero_excluded():
    zero = make_instance(np.zeros((2, 2)), [1, 1], [1, 1])
    other = make_instance([[1.0, 0.5]], [1, 1], [1, 1])
    rep = evaluate([zero, other], [AlgorithmSpec("greedy")])
    assert rep.n_opt_zero == 1
    assert rep.algorithm("greedy").ratios == [None, 1.0]
    assert rep.algorithm("greedy").n_opt_zero == 1


def test_usage_errors(instances, policy):
    with pytest.raises(UsageError):
        evaluate([], [AlgorithmSpec("greedy")])
    with pytest.raises(UsageError):
        AlgorithmSpec("lomar")
    with pytest.raises(UsageError):
        AlgorithmSpec("magic")
    with pytest.raises(UsageError):
        evaluate(instances, [AlgorithmSpec("greedy")], cr_vs="drl")


def test_csv_header_only():
    assert render_csv(None) == ",".join(CSV_COLUMNS) + "\n"
    rep = evaluate(generate_instances(GeneratorConfig(2, 3, seed=1), 2), [])
    assert render_csv(rep) == ",".join(CSV_COLUMNS) + "\n"


def test_csv_rows_in_order(instances):
    rep = evaluate(instances, [AlgorithmSpec("opt"), AlgorithmSpec("greedy")])
    rows = list(csv.DictReader(io.StringIO(render_csv(rep))))
    assert [r["algo"] for r in rows] == ["opt", "greedy"]
    assert float(rows[1]["avg"]) == rep.algorithm("greedy").avg
    assert int(rows[0]["n_instances"]) == len(instances)


def test_json_round_trip(tmp_path, instances, policy):
    rep = evaluate(instances, [AlgorithmSpec("lomar", rho=0.5, policy=policy), AlgorithmSpec("osm")])
    path = tmp_path / "r.json"
    text = report_render(rep, "json", path)
    back = load_report(path)
    assert back == rep
    assert back.dumps() == text
    assert json.loads(text)["setting"] == "nfd"


def test_unknown_format(instances):
    rep = evaluate(instances[:1], [AlgorithmSpec("greedy")])
    with pytest.raises(UsageError):
        report_render(rep, "xml")


def test_free_disposal_report(instances, policy):
    rep = evaluate(instances, [AlgorithmSpec("lomar", rho=0.6, policy=policy), AlgorithmSpec("greedy")],
                   setting="fd")
    assert rep.setting == "fd"
    for a in rep.algorithms:
        for r, o in zip(a.rewards, rep.opt):
            assert r <= o + 1e-9


def test_competitive_floor():
    assert competitive_floor_ok(4.0, 8.0, 0.5, 0.0)
    assert not competitive_floor_ok(3.0, 8.0, 0.5, 0.0)
    assert competitive_floor_ok(3.0, 8.0, 0.5, 1.0)
    assert competitive_floor_ok(0.0, 0.0, 1.0, 0.0)


def test_thousand_instance_floor_audit():
    insts = generate_instances(GeneratorConfig(5, 25, (1, 2), sparsity=0.3, seed=500), 1000)
    pol = init_params(seed=2)
    rep = evaluate(insts, [AlgorithmSpec("greedy"), AlgorithmSpec("drl", policy=pol),
                           AlgorithmSpec("lomar", rho=0.8, policy=pol)])
    lomar = rep.algorithm("lomar")
    assert all(competitive_floor_ok(r, e, 0.8, 0.0) for r, e in zip(lomar.rewards, lomar.expert_rewards))
    assert min(r for r in rep.bi_competitive["lomar"]["vs_expert"] if r is not None) >= 0.8 - 1e-9

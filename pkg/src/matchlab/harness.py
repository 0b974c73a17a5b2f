"""Evaluation over instance sets: rewards, AVG, CR, tail percentiles, reports.

Reward ratios are taken against OPT (or against the expert with
``cr_vs="expert"``).  Percentile ``pXX`` is the lower-tail ratio that
``XX`` percent of instances meet or beat, so ``p100`` is the worst ratio and
equals CR.  Instances whose reference reward is 0 are left out of the ratio
statistics and counted in ``n_opt_zero``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .engine import simulate
from .experts import run_expert
from .matching import Setting
from .oracle import opt_flow
from .policy import PolicyParams, PolicyProposer
from .switching import TOL, SwitchConfig

ALGORITHMS = ("lomar", "drl", "drl-os", "greedy", "osm", "opt")
PERCENTILES = (50, 90, 99, 100)
CSV_COLUMNS = ("algo", "avg", "cr", "p50", "p90", "p99", "p100", "n_instances", "n_opt_zero")


class UsageError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    """A robust run ended below ``rho * R_expert - B``: an internal defect."""


@dataclass
class AlgorithmSpec:
    algo: str
    rho: float = 0.0
    budget_b: float = 0.0
    policy: PolicyParams | None = field(default=None, repr=False)
    label: str | None = None

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {self.algo!r}")
        if self.algo in ("lomar", "drl", "drl-os") and self.policy is None:
            raise UsageError(f"{self.algo} needs a policy")
        if self.algo == "drl":
            self.rho = 0.0
        if self.label is None:
            self.label = self.algo

    @property
    def uses_policy(self) -> bool:
        return self.algo in ("lomar", "drl", "drl-os")


@dataclass
class AlgorithmResult:
    algo: str
    rho: float
    budget_b: float
    avg: float
    cr: float | None
    percentiles: dict
    rewards: list
    ratios: list  # per instance; None where the reference reward is 0
    expert_rewards: list | None = None  # shadow expert totals of policy runs
    n_instances: int = 0
    n_opt_zero: int = 0


@dataclass
class EvalReport:
    setting: str
    expert: str
    cr_vs: str
    seed: int
    opt: list
    reference: list
    algorithms: list
    bi_competitive: dict
    n_opt_zero: int = 0

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "EvalReport":
        data = dict(data)
        data["algorithms"] = [AlgorithmResult(**a) for a in data["algorithms"]]
        return cls(**data)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1, allow_nan=False) + "\n"

    def algorithm(self, label: str) -> AlgorithmResult:
        for a in self.algorithms:
            if a.algo == label:
                return a
        raise KeyError(label)


def tail_percentiles(ratios) -> dict:
    vals = np.asarray([r for r in ratios if r is not None], dtype=np.float64)
    if not vals.size:
        return {f"p{p}": None for p in PERCENTILES}
    return {f"p{p}": float(np.percentile(vals, 100 - p)) for p in PERCENTILES}


def _ratios(rewards, refs):
    return [None if ref <= 0.0 else float(r / ref) for r, ref in zip(rewards, refs)]


def evaluate(instances, specs, expert="greedy", setting=Setting.NO_FREE_DISPOSAL, seed: int = 0,
             cr_vs: str = "opt") -> EvalReport:
    """Run every algorithm on every instance and aggregate.

    Each policy-driven run is audited against ``R >= rho * R_expert - B``;
    a violation raises :class:`InvariantViolation`.
    """
    instances = list(instances)
    if not instances:
        raise UsageError("empty instance set")
    if cr_vs not in ("opt", "expert"):
        raise UsageError(f"cr_vs must be 'opt' or 'expert', got {cr_vs!r}")
    setting = Setting.parse(setting)
    opt = [opt_flow(inst).value for inst in instances]
    expert_rewards = [run_expert(inst, expert, setting)[1] for inst in instances]
    refs = opt if cr_vs == "opt" else expert_rewards

    results = []
    per_label = {}
    for spec in specs:
        rewards, shadow = [], None
        if spec.algo == "opt":
            rewards = list(opt)
        elif spec.algo in ("greedy", "osm"):
            rewards = [run_expert(inst, spec.algo, setting)[1] for inst in instances]
        else:
            cfg = SwitchConfig(spec.rho, spec.budget_b, setting)
            proposer = PolicyProposer(spec.policy)
            shadow = []
            for k, inst in enumerate(instances):
                tr = simulate(inst, proposer, expert, cfg)
                if tr.final_gap(cfg) < -TOL:
                    raise InvariantViolation(
                        f"{spec.label} on instance {k}: R={tr.reward!r} < "
                        f"{cfg.rho}*{tr.expert_reward!r} - {cfg.budget_b}"
                    )
                rewards.append(tr.reward)
                shadow.append(tr.expert_reward)
        ratios = _ratios(rewards, refs)
        pct = tail_percentiles(ratios)
        n_zero = sum(r is None for r in ratios)
        results.append(AlgorithmResult(
            algo=spec.label, rho=float(spec.rho), budget_b=float(spec.budget_b),
            avg=float(np.mean(rewards)), cr=pct["p100"], percentiles=pct,
            rewards=[float(r) for r in rewards], ratios=ratios, expert_rewards=shadow,
            n_instances=len(instances), n_opt_zero=n_zero,
        ))
        per_label[spec.label] = (spec, rewards)

    bi = {}
    drl = next((r for s, r in per_label.values() if s.algo == "drl"), None)
    for label, (spec, rewards) in per_label.items():
        entry = {"vs_expert": _ratios(rewards, expert_rewards)}
        if drl is not None:
            entry["vs_drl"] = _ratios(rewards, drl)
        bi[label] = entry

    return EvalReport(
        setting=setting.value, expert=str(expert), cr_vs=cr_vs, seed=int(seed),
        opt=[float(x) for x in opt], reference=[float(x) for x in refs],
        algorithms=results, bi_competitive=bi,
        n_opt_zero=sum(1 for x in refs if x <= 0.0),
    )


def _fmt(x):
    if x is None:
        return ""
    return repr(float(x)) if isinstance(x, float) else str(x)


def render_csv(report: EvalReport | None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for a in (report.algorithms if report else []):
        p = a.percentiles
        writer.writerow([a.algo, _fmt(a.avg), _fmt(a.cr), _fmt(p["p50"]), _fmt(p["p90"]),
                         _fmt(p["p99"]), _fmt(p["p100"]), a.n_instances, a.n_opt_zero])
    return buf.getvalue()


def report_render(report: EvalReport, fmt: str, path=None) -> str:
    """Render ``report`` as ``json`` or ``csv``; written to ``path`` when given."""
    if fmt == "json":
        text = report.dumps()
    elif fmt == "csv":
        text = render_csv(report)
    else:
        raise UsageError(f"unknown report format {fmt!r}")
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def load_report(path) -> EvalReport:
    with open(path, encoding="utf-8") as fh:
        return EvalReport.from_json(json.load(fh))


def competitive_floor_ok(reward: float, expert_reward: float, rho: float, budget_b: float) -> bool:
    """Ratio form of the guarantee: ``R / R_pi >= rho - B / R_pi`` (vacuous for ``R_pi = 0``)."""
    if expert_reward <= 0.0:
        return True
    return reward / expert_reward >= rho - budget_b / expert_reward - TOL / expert_reward

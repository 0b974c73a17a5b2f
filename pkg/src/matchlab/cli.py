"""``matchlab`` command line: gen, train, run, report.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import harness
from .instance import (
    ConfigError,
    GeneratorConfig,
    InstanceParseError,
    InstanceValidationError,
    generate_instances,
    load_instances,
    save_instances,
)
from .policy import PolicyLoadError, TrainConfig, TrainingError, load_policy, save_policy, train

log = logging.getLogger("matchlab")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _cmd_gen(args):
    cfg = GeneratorConfig(
        num_offline=args.num_offline,
        num_online=args.num_online,
        capacity_range=(args.cap_min, args.cap_max),
        weight_low=args.wlow,
        weight_high=args.whigh,
        sparsity=args.sparsity,
        seed=args.seed,
    )
    instances = generate_instances(cfg, args.count)
    save_instances(instances, args.out)
    log.info("wrote %d instances to %s", len(instances), args.out)


def _cmd_train(args):
    instances = load_instances(args.instances)
    cfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch, lr=args.lr, rho=args.rho, budget_b=args.b,
        setting=args.setting, expert=args.expert, t0=args.t0, t_decay=args.t_decay,
        t_floor=args.t_floor, seed=args.seed, baseline=args.baseline,
    )
    history = []
    params = train(instances, cfg, history=history)
    for h in history:
        log.info("epoch %d  t=%.4f  mean reward %.4f", h["epoch"], h["temperature"], h["mean_reward"])
    save_policy(params, args.out)


def _algo_list(values):
    out = []
    for v in values or ["lomar"]:
        out.extend(x.strip() for x in v.split(",") if x.strip())
    return out


def _cmd_run(args):
    instances = load_instances(args.instances)
    algos = _algo_list(args.algo)
    policy = None
    if any(a in ("lomar", "drl", "drl-os") for a in algos):
        if not args.policy:
            raise harness.UsageError("--policy is required for lomar, drl and drl-os")
        policy = load_policy(args.policy)
    specs = [harness.AlgorithmSpec(a, rho=args.rho, budget_b=args.b, policy=policy) for a in algos]
    report = harness.evaluate(instances, specs, expert=args.expert, setting=args.setting,
                              seed=args.seed, cr_vs=args.cr_vs)
    text = harness.report_render(report, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)


def _cmd_report(args):
    report = harness.load_report(args.report)
    text = harness.report_render(report, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)


def _baseline(text):
    if text == "batch":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'batch', got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="matchlab", description="Robust learning-augmented online bipartite matching.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate synthetic instances (JSON lines)")
    g.add_argument("--num-offline", type=int, required=True)
    g.add_argument("--num-online", type=int, required=True)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--sparsity", type=float, default=0.0)
    g.add_argument("--wlow", type=float, default=0.0)
    g.add_argument("--whigh", type=float, default=1.0)
    g.add_argument("--cap-min", type=int, default=1)
    g.add_argument("--cap-max", type=int, default=1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen)

    t = sub.add_parser("train", help="train a scoring policy with switching in the loop")
    t.add_argument("--instances", required=True)
    t.add_argument("--rho", type=float, default=0.4)
    t.add_argument("--b", type=float, default=0.0)
    t.add_argument("--setting", choices=("nfd", "fd"), default="nfd")
    t.add_argument("--expert", choices=("greedy", "osm"), default="greedy")
    t.add_argument("--epochs", type=int, default=50)
    t.add_argument("--batch", type=int, default=100)
    t.add_argument("--lr", type=float, default=TrainConfig.lr)
    t.add_argument("--t0", type=float, default=TrainConfig.t0)
    t.add_argument("--t-decay", type=float, default=TrainConfig.t_decay)
    t.add_argument("--t-floor", type=float, default=TrainConfig.t_floor)
    t.add_argument("--baseline", type=_baseline, default=None,
                   help="reward baseline: a number or 'batch' for the batch mean (default: none)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=_cmd_train)

    r = sub.add_parser("run", help="evaluate algorithms and write a report")
    r.add_argument("--instances", required=True)
    r.add_argument("--algo", action="append", help=f"one of {', '.join(harness.ALGORITHMS)}; repeatable")
    r.add_argument("--policy")
    r.add_argument("--rho", type=float, default=0.5)
    r.add_argument("--b", type=float, default=0.0)
    r.add_argument("--setting", choices=("nfd", "fd"), default="nfd")
    r.add_argument("--expert", choices=("greedy", "osm"), default="greedy")
    r.add_argument("--cr-vs", choices=("opt", "expert"), default="opt")
    r.add_argument("--format", choices=("json", "csv"), default="json")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out")
    r.set_defaults(func=_cmd_run)

    rep = sub.add_parser("report", help="re-render a JSON report")
    rep.add_argument("--report", required=True)
    rep.add_argument("--format", choices=("json", "csv"), default="csv")
    rep.add_argument("--seed", type=int, default=0, help="accepted for symmetry; unused")
    rep.add_argument("--out")
    rep.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (harness.UsageError, ConfigError) as exc:
        print(f"matchlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        if isinstance(exc, (InstanceParseError, InstanceValidationError, PolicyLoadError, json.JSONDecodeError)):
            print(f"matchlab: data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"matchlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, KeyError, TypeError) as exc:
        print(f"matchlab: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except harness.InvariantViolation as exc:
        print(f"matchlab: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except TrainingError as exc:
        print(f"matchlab: training failed: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

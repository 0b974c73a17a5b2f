"""Compiled kernels against the pure-numpy reference.

    python3 benchmarks/bench_kernels.py [--episodes 300] [--repeats 3]

Times full LOMAR episodes (policy proposer, greedy expert, both settings)
and exhaustive OPT search.  Both engines run in one process: the kernel path
is called explicitly, so ``MATCHLAB_DISABLE_NUMBA`` does not need toggling.
Compilation happens in a warm-up call that is not timed.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from matchlab import GeneratorConfig, _kernels, generate_instances, init_params
from matchlab._accel import NUMBA_ENABLED
from matchlab.engine import simulate
from matchlab.oracle import _exhaustive_py
from matchlab.policy import PolicyProposer
from matchlab.switching import SwitchConfig


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_episodes(n, repeats, setting):
    insts = generate_instances(GeneratorConfig(6, 30, (1, 2), sparsity=0.3, seed=1), n)
    proposer = PolicyProposer(init_params(seed=0))
    cfg = SwitchConfig(0.5, 0.0, setting)

    def run(engine):
        return lambda: [simulate(i, proposer, "greedy", cfg, engine=engine) for i in insts]

    run("kernel")()  # compile
    return best_of(run("numpy"), repeats) / n, best_of(run("kernel"), repeats) / n


def bench_exhaustive(n, repeats):
    insts = generate_instances(GeneratorConfig(4, 8, (1, 2), seed=2), n)
    args = [(np.ascontiguousarray(i.weights), i.capacities.astype(np.int64)) for i in insts]
    _kernels.exhaustive_kernel(*args[0])
    py = best_of(lambda: [_exhaustive_py(w, c) for w, c in args], repeats) / n
    jit = best_of(lambda: [_kernels.exhaustive_kernel(w, c) for w, c in args], repeats) / n
    return py, jit


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=300)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    if not NUMBA_ENABLED:
        raise SystemExit("numba is disabled (MATCHLAB_DISABLE_NUMBA); nothing to compare")

    rows = []
    for setting in ("nfd", "fd"):
        ref, jit = bench_episodes(args.episodes, args.repeats, setting)
        rows.append((f"episode 6x30 {setting}", ref, jit))
    ref, jit = bench_exhaustive(max(args.episodes // 10, 10), args.repeats)
    rows.append(("exhaustive OPT 4x8", ref, jit))

    print(f"{'workload':<22}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, ref, jit in rows:
        print(f"{name:<22}{ref * 1e3:>12.3f}{jit * 1e3:>12.3f}{ref / jit:>9.1f}x")


if __name__ == "__main__":
    main()

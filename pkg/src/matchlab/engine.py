"""Episode dispatch between the compiled kernel and the numpy reference.

:func:`simulate` runs the kernel when numba is active and the proposer is
one it understands (policy, adversarial, integer script, random); any other
proposer, or ``MATCHLAB_DISABLE_NUMBA=1``, goes through
:func:`matchlab.switching.run_episode`.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from ._accel import NUMBA_ENABLED
from .experts import ExpertKind
from .matching import FD, SKIP
from .policy import PolicyParams, PolicyProposer
from .switching import (
    AdversarialProposer,
    RandomProposer,
    RunTrace,
    ScriptedProposer,
    SwitchConfig,
    run_episode,
)

_EMPTY_F = np.zeros(0)
_EMPTY_I = np.zeros(0, dtype=np.int64)
_ONE_DIM = np.array([14, 1], dtype=np.int64)


def flatten_params(params: PolicyParams) -> tuple[np.ndarray, np.ndarray]:
    """Kernel layout: per layer, the (in, out) weight matrix row-major, then the bias."""
    parts = []
    for w, b in zip(params.weights, params.biases):
        parts.append(np.ascontiguousarray(w.T).ravel())
        parts.append(b)
    return np.concatenate(parts), np.asarray(params.dims, dtype=np.int64)


def kernel_args(instance, proposer):
    """(mode, params, dims, script, uniforms) for ``proposer``, or None if unsupported."""
    n_on = instance.num_online
    if type(proposer) is PolicyProposer:
        flat, dims = flatten_params(proposer.params)
        return _kernels.MODE_POLICY, flat, dims, _EMPTY_I, _EMPTY_F
    if type(proposer) is AdversarialProposer:
        return _kernels.MODE_ADVERSARIAL, _EMPTY_F, _ONE_DIM, _EMPTY_I, _EMPTY_F
    if type(proposer) is ScriptedProposer:
        if not all(isinstance(e, (int, np.integer)) for e in proposer.script):
            return None
        script = np.array([int(e) for e in proposer.script], dtype=np.int64)
        if np.any((script < SKIP) | (script >= instance.num_offline)):
            raise IndexError("scripted decision out of range")
        return _kernels.MODE_SCRIPT, _EMPTY_F, _ONE_DIM, script, _EMPTY_F
    if type(proposer) is RandomProposer:
        uniforms = proposer.episode_rng(proposer.episode).random(n_on)
        proposer.episode += 1
        return _kernels.MODE_RANDOM, _EMPTY_F, _ONE_DIM, _EMPTY_I, uniforms
    return None


def run_kernel(instance, proposer, expert, cfg: SwitchConfig) -> RunTrace:
    args = kernel_args(instance, proposer)
    if args is None:
        raise TypeError(f"no kernel for proposer {type(proposer).__name__}")
    mode, flat, dims, script, uniforms = args
    kind = ExpertKind.parse(expert)
    out = _kernels.episode_kernel(
        np.ascontiguousarray(instance.weights, dtype=np.float64),
        instance.capacities.astype(np.int64),
        instance.weight_caps.astype(np.float64),
        cfg.setting is FD,
        float(cfg.rho),
        float(cfg.budget_b),
        _kernels.EXPERT_GREEDY if kind.name == "greedy" else _kernels.EXPERT_OSM,
        mode,
        flat,
        dims,
        script,
        uniforms,
    )
    (proposals, expert_dec, decisions, conds, rewards, e_rewards, hedges, slacks,
     counts, e_counts, reward, e_reward) = out
    return RunTrace(proposals=proposals, expert_decisions=expert_dec, decisions=decisions,
                    conditions=conds, rewards=rewards, expert_rewards=e_rewards, hedges=hedges,
                    slacks=slacks, counts=counts, expert_counts=e_counts,
                    reward=float(reward), expert_reward=float(e_reward))


def simulate(instance, proposer, expert, cfg: SwitchConfig, engine: str = "auto") -> RunTrace:
    """Run one inference episode; ``engine`` is ``auto``, ``kernel`` or ``numpy``."""
    if engine == "numpy" or (engine == "auto" and not NUMBA_ENABLED):
        return run_episode(instance, proposer, expert, cfg)
    if engine == "auto" and not kernel_args_supported(proposer):
        return run_episode(instance, proposer, expert, cfg)
    return run_kernel(instance, proposer, expert, cfg)


def kernel_args_supported(proposer) -> bool:
    if type(proposer) in (PolicyProposer, AdversarialProposer, RandomProposer):
        return True
    if type(proposer) is ScriptedProposer:
        return all(isinstance(e, (int, np.integer)) for e in proposer.script)
    return False

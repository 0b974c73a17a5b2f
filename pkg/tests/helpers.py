"""Shared oracles for the test modules."""

import numpy as np

from matchlab import GeneratorConfig, generate_instance
from matchlab.policy import flat_gradient, init_params, sample_trajectory, trajectory_objective
from matchlab.switching import SwitchConfig

SMALL_DIMS = (14, 8, 8, 1)


def numeric_gradient(params, traj, h=1e-4, baseline=None):
    """Central differences of the per-trajectory objective, one parameter at a time."""
    base = params.to_vector()
    out = np.empty_like(base)
    for i in range(base.size):
        up, down = base.copy(), base.copy()
        up[i] += h
        down[i] -= h
        f_up = trajectory_objective(params.with_vector(up), traj, baseline)
        f_down = trajectory_objective(params.with_vector(down), traj, baseline)
        out[i] = (f_up - f_down) / (2 * h)
    return out


def gradient_errors(analytic, numeric, floor=1e-8):
    """Per-entry relative error, zero where the absolute difference is under ``floor``."""
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    rel = np.where(diff <= floor, 0.0, diff / np.maximum(scale, 1e-300))
    return rel


def random_gradient_case(k, setting="nfd", rho=0.4, t=0.5, budget_b=0.0):
    """(params, trajectory) for configuration ``k`` on a small net and instance."""
    rng = np.random.default_rng([1234, k])
    n_off = int(rng.integers(2, 5))
    n_on = int(rng.integers(3, 8))
    inst = generate_instance(GeneratorConfig(n_off, n_on, (1, 2), sparsity=0.2, seed=int(rng.integers(2**32))))
    params = init_params(SMALL_DIMS, rng)
    # random biases: with all-zero biases a dead layer puts the next
    # pre-activation exactly on the relu kink, where no derivative exists
    for b in params.biases:
        b[...] = rng.uniform(-0.1, 0.1, size=b.shape)
    traj = sample_trajectory(params, inst, "greedy", SwitchConfig(rho, budget_b, setting), t, rng)
    return params, traj


def check_gradient(params, traj, h=1e-4, tol=1e-3):
    analytic = flat_gradient(params, traj)
    numeric = numeric_gradient(params, traj, h)
    return float(gradient_errors(analytic, numeric).max(initial=0.0))

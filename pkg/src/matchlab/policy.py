"""Scoring network, proposal rule, differentiable switching and REINFORCE.

The network ``h`` maps a 14-dim pair feature vector to a scalar threshold;
the score of assigning arrival ``v`` to ``u`` is ``w_uv - h(features_uv)``
with the same weights for every ``u``.  Skip has score 0.

During training the hard switch is replaced by a mixture: with probability
``p_os = sigmoid(r_diff / t)`` the step is drawn from the softmax over
proposal scores, otherwise the expert's decision is copied.  ``r_diff`` is
the slack of the switching condition for the hard proposal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .experts import Expert
from .features import FEATURE_SPEC_VERSION, NUM_FEATURES, RunState, feature_matrix
from .matching import SKIP, MatchLedger, Setting
from .switching import Proposer, SwitchConfig, option_slacks

DEFAULT_DIMS = (NUM_FEATURES, 100, 100, 100, 1)


class NumericError(ArithmeticError):
    pass


class TrainingError(RuntimeError):
    def __init__(self, epoch: int, message: str):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


class PolicyLoadError(ValueError):
    pass


@dataclass
class PolicyParams:
    """MLP parameters; ``weights[l]`` has shape ``(dims[l + 1], dims[l])``."""

    dims: tuple
    weights: list
    biases: list
    activation: str = "relu"
    feature_spec_version: str = FEATURE_SPEC_VERSION

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        if len(self.weights) != len(self.dims) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("need one weight matrix and bias vector per layer")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.dims[l + 1], self.dims[l]) or b.shape != (self.dims[l + 1],):
                raise ValueError(f"layer {l} shapes {w.shape}, {b.shape} do not match dims {self.dims}")
        if self.dims[-1] != 1:
            raise ValueError("the network must have a single output")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases],
                            self.activation, self.feature_spec_version)

    def all_finite(self) -> bool:
        return all(np.isfinite(w).all() and np.isfinite(b).all() for w, b in zip(self.weights, self.biases))

    # flat views, mainly for gradient checks
    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def with_vector(self, vec) -> "PolicyParams":
        out = self.copy()
        k = 0
        for l in range(self.num_layers):
            for arr in (out.weights[l], out.biases[l]):
                arr[...] = np.reshape(vec[k:k + arr.size], arr.shape)
                k += arr.size
        return out

    def negated(self) -> "PolicyParams":
        return PolicyParams(self.dims, [-w for w in self.weights], [-b for b in self.biases],
                            self.activation, self.feature_spec_version)

    def to_json(self) -> dict:
        return {
            "feature_spec_version": self.feature_spec_version,
            "dims": list(self.dims),
            "activation": self.activation,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_json(cls, data: dict) -> "PolicyParams":
        version = data.get("feature_spec_version")
        if version != FEATURE_SPEC_VERSION:
            raise PolicyLoadError(f"policy was trained with features {version!r}, expected {FEATURE_SPEC_VERSION!r}")
        try:
            params = cls(data["dims"], data["weights"], data["biases"], data.get("activation", "relu"), version)
        except (KeyError, ValueError, TypeError) as exc:
            raise PolicyLoadError(f"bad policy file: {exc}") from None
        if params.dims[0] != NUM_FEATURES:
            raise PolicyLoadError(f"input width {params.dims[0]} != {NUM_FEATURES} features")
        if not params.all_finite():
            raise PolicyLoadError("policy contains non-finite parameters")
        return params


def init_params(dims=DEFAULT_DIMS, seed=0) -> PolicyParams:
    """Glorot-uniform weights, zero biases."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        a = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return PolicyParams(dims, weights, biases)


def zero_params(dims=DEFAULT_DIMS) -> PolicyParams:
    return PolicyParams(dims, [np.zeros((o, i)) for i, o in zip(dims[:-1], dims[1:])],
                        [np.zeros(o) for o in dims[1:]])


def save_policy(params: PolicyParams, path) -> None:
    Path(path).write_text(json.dumps(params.to_json()) + "\n", encoding="utf-8")


def load_policy(path) -> PolicyParams:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PolicyLoadError(f"{path}: not JSON ({exc.msg})") from None
    return PolicyParams.from_json(data)


# -- network -----------------------------------------------------------------


def forward(params: PolicyParams, x) -> np.ndarray:
    """Network output for each row of ``x``."""
    return forward_cached(params, x)[0]


def forward_cached(params: PolicyParams, x):
    acts = [np.asarray(x, dtype=np.float64)]
    a = acts[0]
    last = params.num_layers - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        if not np.isfinite(z).all():
            raise NumericError(f"non-finite pre-activation in layer {l}")
        a = z if l == last else np.maximum(z, 0.0)
        acts.append(a)
    return acts[-1][:, 0], acts


def backward(params: PolicyParams, acts, upstream) -> tuple[list, list]:
    """Gradients of ``sum(upstream * output)`` given cached activations."""
    g = np.asarray(upstream, dtype=np.float64)[:, None]
    gw = [None] * params.num_layers
    gb = [None] * params.num_layers
    for l in range(params.num_layers - 1, -1, -1):
        gw[l] = g.T @ acts[l]
        gb[l] = g.sum(axis=0)
        if l:
            g = (g @ params.weights[l]) * (acts[l] > 0.0)
    return gw, gb


def score_items(params: PolicyParams, features, row) -> np.ndarray:
    return np.asarray(row, dtype=np.float64) - forward(params, features)


def rl_decide(scores, availability) -> int:
    """Argmax over available scores and skip (score 0); ties go to skip, then lower index."""
    masked = np.where(availability, scores, -np.inf)
    if not masked.size:
        return SKIP
    u = int(np.argmax(masked))
    return u if masked[u] > 0.0 else SKIP


def option_probs(scores, availability) -> np.ndarray:
    """Softmax over available items plus skip; index ``len(scores)`` is skip."""
    logits = np.append(np.where(availability, scores, -np.inf), 0.0)
    m = logits.max()
    e = np.exp(logits - m)
    return e / e.sum()


def p_os(r_diff: float, t: float) -> float:
    """``sigmoid(r_diff / t)`` without overflow."""
    if t <= 0:
        raise ValueError("temperature must be positive")
    z = r_diff / t
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    if z == -math.inf:
        return 0.0
    ez = math.exp(z)
    return ez / (1.0 + ez)


def mixture_prob(rl_probs, p_follow_rl: float, expert_option: int) -> np.ndarray:
    """``p_follow_rl * rl_probs + (1 - p_follow_rl) * onehot(expert_option)``."""
    p = p_follow_rl * np.asarray(rl_probs, dtype=np.float64)
    p[expert_option] += 1.0 - p_follow_rl
    return p


def to_option(decision: int, num_offline: int) -> int:
    return num_offline if decision == SKIP else decision


def to_decision(option: int, num_offline: int) -> int:
    return SKIP if option == num_offline else option


def r_diff(actual: MatchLedger, expert_shadow: MatchLedger, proposal: int, row, weight_caps,
           cfg: SwitchConfig) -> float:
    """Signed slack of the switching condition for ``proposal`` (positive = would be followed)."""
    slacks = option_slacks(actual, expert_shadow, row, weight_caps, cfg)
    return float(slacks[to_option(proposal, actual.num_offline)])


class PolicyProposer(Proposer):
    """Hard proposals from a trained (or random) network."""

    def __init__(self, params: PolicyParams):
        self.params = params

    def propose(self, state: RunState, row) -> int:
        scores = score_items(self.params, feature_matrix(state, row), row)
        return rl_decide(scores, state.ledger.availability())


# -- training ----------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 100
    lr: float = 1e-3
    rho: float = 0.4
    budget_b: float = 0.0
    setting: Setting = Setting.NO_FREE_DISPOSAL
    expert: str = "greedy"
    t0: float = 1.0
    t_decay: float = 0.99
    t_floor: float = 0.05
    seed: int = 0
    dims: tuple = DEFAULT_DIMS
    baseline: float | str | None = None  # constant, "batch" (batch mean reward) or None

    def __post_init__(self):
        self.setting = Setting.parse(self.setting)
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if not self.t0 > 0:
            raise ValueError("t0 must be > 0")
        if not 0 < self.t_decay <= 1:
            raise ValueError("t_decay must lie in (0, 1]")
        if not self.t_floor > 0:
            raise ValueError("t_floor must be > 0")
        if isinstance(self.baseline, str) and self.baseline != "batch":
            raise ValueError(f"baseline must be a number, 'batch' or None, got {self.baseline!r}")

    @property
    def switch(self) -> SwitchConfig:
        return SwitchConfig(self.rho, self.budget_b, self.setting)


@dataclass
class Trajectory:
    """Everything needed to rebuild each step's sampling distribution."""

    features: np.ndarray  # (T, U, F)
    rows: np.ndarray  # (T, U)
    avail: np.ndarray  # (T, U) bool
    slacks: np.ndarray  # (T, U + 1) switching slack per option, skip last
    expert_options: np.ndarray  # (T,)
    choices: np.ndarray  # (T,) sampled option
    temperature: float
    reward: float = 0.0
    p_follow: np.ndarray = field(default=None, repr=False)  # p_os per step at sampling time
    hard_choices: np.ndarray = field(default=None, repr=False)  # hard-switch decision per step


def sample_trajectory(params: PolicyParams, instance, expert, cfg: SwitchConfig, t: float, rng) -> Trajectory:
    """Roll out one episode sampling from the switching mixture."""
    n_on, n_off = instance.num_online, instance.num_offline
    ledger = MatchLedger(instance.capacities, cfg.setting)
    state = RunState(ledger, n_on)
    exp = Expert(expert, instance.capacities, cfg.setting, n_on)
    feats = np.empty((n_on, n_off, NUM_FEATURES))
    avail = np.empty((n_on, n_off), dtype=bool)
    slacks = np.empty((n_on, n_off + 1))
    e_opts = np.empty(n_on, dtype=np.int64)
    choices = np.empty(n_on, dtype=np.int64)
    follow = np.empty(n_on)
    hard = np.empty(n_on, dtype=np.int64)
    for v in range(n_on):
        row = instance.weights[v]
        x_pi, _ = exp.step(v + 1, row)
        f = feature_matrix(state, row)
        av = ledger.availability()
        scores = row - forward(params, f)
        proposal = rl_decide(scores, av)
        sl = option_slacks(ledger, exp.shadow, row, instance.weight_caps, cfg)
        prop_opt = to_option(proposal, n_off)
        a = p_os(sl[prop_opt], t)
        if x_pi != SKIP and not av[x_pi]:
            x_pi = SKIP
        e_opt = to_option(x_pi, n_off)
        p = mixture_prob(option_probs(scores, av), a, e_opt)
        choice = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
        choice = min(choice, n_off)
        while p[choice] <= 0.0:  # guard against landing on a zero-mass option at a rounding edge
            choice -= 1
        decision = to_decision(choice, n_off)
        ledger.apply(decision, row)
        state.advance(row, decision)
        feats[v], avail[v], slacks[v] = f, av, sl
        e_opts[v], choices[v], follow[v] = e_opt, choice, a
        hard[v] = prop_opt if (cfg.rho == 0.0 or sl[prop_opt] >= -1e-9) else e_opt
    return Trajectory(feats, instance.weights.copy(), avail, slacks, e_opts, choices, t,
                      ledger.reward, follow, hard)


def _step_terms(params: PolicyParams, traj: Trajectory):
    """Per-step (log p of the sampled option, d log p / d scores, cached activations)."""
    T, U = traj.rows.shape
    h, acts = forward_cached(params, traj.features.reshape(T * U, -1))
    scores = traj.rows - h.reshape(T, U)
    logp = np.empty(T)
    dscores = np.zeros((T, U))
    for v in range(T):
        av = traj.avail[v]
        proposal = rl_decide(scores[v], av)
        # the proposal is an argmax, so the slack it selects is piecewise constant in the parameters
        a = p_os(traj.slacks[v, to_option(proposal, U)], traj.temperature)
        q = option_probs(scores[v], av)
        x = traj.choices[v]
        px = a * q[x] + (1.0 - a) * (x == traj.expert_options[v])
        if px <= 0.0:
            raise NumericError(f"sampled option has zero probability at step {v}")
        logp[v] = math.log(px)
        coef = a * q[x] / px
        d = -coef * q[:U]
        if x < U:
            d[x] += coef
        dscores[v] = np.where(av, d, 0.0)
    return logp, dscores, acts


def trajectory_log_prob(params: PolicyParams, traj: Trajectory) -> float:
    return float(_step_terms(params, traj)[0].sum())


def trajectory_objective(params: PolicyParams, traj: Trajectory, baseline: float | None = None) -> float:
    """``(reward - baseline) * sum_v log p(x_v)``; its gradient is the REINFORCE estimate."""
    scale = traj.reward - (baseline or 0.0)
    return scale * trajectory_log_prob(params, traj)


def log_prob_gradient(params: PolicyParams, traj: Trajectory, baseline: float | None = None):
    """Gradient of :func:`trajectory_objective` as (weight grads, bias grads)."""
    scale = traj.reward - (baseline or 0.0)
    _, dscores, acts = _step_terms(params, traj)
    # scores = w - h, so d/dh = -d/dscores
    return backward(params, acts, -scale * dscores.ravel())


def flat_gradient(params: PolicyParams, traj: Trajectory, baseline: float | None = None) -> np.ndarray:
    gw, gb = log_prob_gradient(params, traj, baseline)
    return np.concatenate([a.ravel() for pair in zip(gw, gb) for a in pair])


def train(instances, cfg: TrainConfig, params: PolicyParams | None = None, history: list | None = None) -> PolicyParams:
    """REINFORCE through the differentiable switch; deterministic given ``cfg.seed``.

    Each epoch draws ``batch_size`` instances with replacement, samples one
    trajectory per draw, averages the per-trajectory gradients and takes an
    ascent step.  ``baseline="batch"`` subtracts the batch's mean reward.
    The temperature decays once per epoch.
    """
    instances = list(instances)
    if not instances:
        raise ValueError("need at least one training instance")
    rng = np.random.default_rng(cfg.seed)
    if params is None:
        params = init_params(cfg.dims, rng)
    else:
        params = params.copy()
    sw = cfg.switch
    t = cfg.t0
    for epoch in range(cfg.epochs):
        picks = rng.integers(len(instances), size=cfg.batch_size)
        gw_sum = [np.zeros_like(w) for w in params.weights]
        gb_sum = [np.zeros_like(b) for b in params.biases]
        trajs = [sample_trajectory(params, instances[k], cfg.expert, sw, t, rng) for k in picks]
        rewards = [tr.reward for tr in trajs]
        baseline = float(np.mean(rewards)) if cfg.baseline == "batch" else cfg.baseline
        for traj in trajs:
            gw, gb = log_prob_gradient(params, traj, baseline)
            for acc, g in zip(gw_sum, gw):
                acc += g
            for acc, g in zip(gb_sum, gb):
                acc += g
        step = cfg.lr / cfg.batch_size
        for l in range(params.num_layers):
            params.weights[l] += step * gw_sum[l]
            params.biases[l] += step * gb_sum[l]
        if not params.all_finite():
            raise TrainingError(epoch, "parameters diverged to non-finite values")
        if history is not None:
            history.append({"epoch": epoch, "temperature": t, "mean_reward": float(np.mean(rewards))})
        t = max(cfg.t_floor, t * cfg.t_decay)
    return params

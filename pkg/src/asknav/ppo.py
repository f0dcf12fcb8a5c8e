"""PPO with a clipped surrogate, GAE, entropy bonus and a hand-rolled Adam."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .env import EpisodeSpec, render_egoview, reset, step
from .policy import (
    PolicyParams,
    action_distribution,
    backward,
    entropy,
    forward,
    log_softmax,
)
from .reward import RewardConfig


class TrainingDiverged(FloatingPointError):
    """A PPO update produced a non-finite loss."""


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    epochs_per_update: int = 4
    minibatch_size: int = 256
    horizon: int = 2048
    learning_rate: float = 3e-4
    num_envs: int = 8
    max_grad_norm: Optional[float] = None
    normalize_advantages: bool = True

    def __post_init__(self) -> None:
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.gae_lambda <= 1.0):
            raise ValueError("gamma and gae_lambda must lie in [0, 1]")
        if self.clip_epsilon <= 0:
            raise ValueError("clip_epsilon must be positive")
        if self.num_envs < 1 or self.horizon % self.num_envs:
            raise ValueError(f"horizon={self.horizon} must be a multiple of num_envs={self.num_envs}")


# ---------------------------------------------------------------- Adam

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **kw) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), **kw)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float) -> np.ndarray:
    """One bias-corrected Adam update. Advances ``state`` in place and returns
    the new parameter vector."""
    if params.shape != grads.shape or grads.shape != state.m.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}")
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grads
    sq = (1.0 - state.beta2) * grads
    sq *= grads
    state.v *= state.beta2
    state.v += sq
    # lr * m_hat / (sqrt(v_hat) + eps), evaluated in place
    step = np.divide(state.m, 1.0 - state.beta1 ** state.t)
    step *= lr
    denom = np.divide(state.v, 1.0 - state.beta2 ** state.t, out=sq)
    np.sqrt(denom, out=denom)
    denom += state.eps
    step /= denom
    return params - step


# ---------------------------------------------------------------- GAE

def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    last_values=0.0,
    gamma: float = 0.99,
    lam: float = 0.95,
) -> tuple[np.ndarray, np.ndarray]:
    """Backward GAE recursion along axis 0.

    ``last_values`` is V(s_T) for the state after the final step; it only
    matters where that step is not terminal. Extra trailing axes are
    independent environments.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    notdone = 1.0 - np.asarray(dones, dtype=np.float64)
    adv = np.zeros_like(rewards)
    next_value = np.broadcast_to(np.asarray(last_values, dtype=np.float64), rewards.shape[1:])
    running = np.zeros(rewards.shape[1:])
    for t in reversed(range(len(rewards))):
        delta = rewards[t] + gamma * next_value * notdone[t] - values[t]
        running = delta + gamma * lam * notdone[t] * running
        adv[t] = running
        next_value = values[t]
    return adv, adv + values


# ---------------------------------------------------------------- rollouts

@dataclass
class RolloutBuffer:
    """Time-major ``(steps, num_envs, ...)`` arrays of transitions."""

    obs: np.ndarray
    actions: np.ndarray
    logprobs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    presence: np.ndarray
    legal: np.ndarray
    last_values: np.ndarray
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None
    episode_returns: list = field(default_factory=list)
    episode_successes: list = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.actions.size)

    def compute_gae(self, gamma: float, lam: float) -> None:
        self.advantages, self.returns = compute_gae(
            self.rewards, self.values, self.dones, self.last_values, gamma, lam
        )

    def flat(self, name: str) -> np.ndarray:
        arr = getattr(self, name)
        return arr.reshape((-1,) + arr.shape[2:])


class FrameStack:
    """Concatenates the last ``n`` flattened views, zero-filled at episode start."""

    def __init__(self, n: int, dim: int):
        self.n, self.dim = n, dim
        self.frames: deque = deque(maxlen=n)
        self.clear()

    def clear(self) -> None:
        self.frames.extend(np.zeros(self.dim) for _ in range(self.n))

    def push(self, view_flat: np.ndarray) -> np.ndarray:
        self.frames.append(view_flat)
        return np.concatenate(self.frames) if self.n > 1 else view_flat


def sample_actions(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling, one uniform draw per row."""
    u = rng.random(probs.shape[0])
    cdf = np.cumsum(probs, axis=1)
    # first index whose cdf exceeds the draw; never a zero-probability entry
    return (cdf <= u[:, None] * cdf[:, -1:]).sum(axis=1)


class RolloutCollector:
    """Runs ``num_envs`` episodes in lockstep, refilling each slot from a
    shared episode stream in fixed slot order. Keeps unfinished episodes
    across calls so consecutive rollouts continue where the last stopped."""

    def __init__(
        self,
        stream: Iterator[EpisodeSpec],
        num_envs: int,
        reward_cfg: Optional[RewardConfig] = None,
        obs_stack: int = 1,
    ):
        self.stream = stream
        self.num_envs = num_envs
        self.reward_cfg = reward_cfg or RewardConfig()
        self.obs_stack = obs_stack
        self.slots: list = [None] * num_envs

    def _start(self, i: int) -> None:
        spec = next(self.stream)
        state = reset(spec)
        view = render_egoview(spec, state).flat()
        stack = FrameStack(self.obs_stack, view.size)
        self.slots[i] = {"spec": spec, "state": state, "stack": stack, "obs": stack.push(view), "ret": 0.0}

    def collect(self, params: PolicyParams, horizon: int, rng: np.random.Generator) -> RolloutBuffer:
        n = self.num_envs
        steps = horizon // n
        a_dim = params.arch.action_dim
        d = params.arch.input_dim
        buf = RolloutBuffer(
            obs=np.zeros((steps, n, d)),
            actions=np.zeros((steps, n), dtype=np.int64),
            logprobs=np.zeros((steps, n)),
            rewards=np.zeros((steps, n)),
            values=np.zeros((steps, n)),
            dones=np.zeros((steps, n), dtype=bool),
            presence=np.zeros((steps, n), dtype=bool),
            legal=np.ones((steps, n, a_dim), dtype=bool),
            last_values=np.zeros(n),
        )
        if steps == 0:
            return buf
        for i in range(n):
            if self.slots[i] is None:
                self._start(i)
        for t in range(steps):
            obs = np.stack([s["obs"] for s in self.slots])
            legal = np.zeros((n, a_dim), dtype=bool)
            for i, s in enumerate(self.slots):
                legal[i, : s["spec"].num_actions] = True
            out = forward(params, obs)
            logp = log_softmax(out.logits, legal)
            actions = sample_actions(rng, action_distribution(out.logits, legal))
            buf.obs[t], buf.legal[t], buf.actions[t] = obs, legal, actions
            buf.logprobs[t] = logp[np.arange(n), actions]
            buf.values[t] = out.value
            for i, s in enumerate(self.slots):
                spec = s["spec"]
                outcome = step(spec, s["state"], int(actions[i]), self.reward_cfg)
                buf.rewards[t, i] = outcome.reward
                buf.dones[t, i] = outcome.done
                buf.presence[t, i] = spec.teacher_present
                s["ret"] += outcome.reward
                if outcome.done:
                    buf.episode_returns.append(s["ret"])
                    buf.episode_successes.append(outcome.success)
                    self._start(i)
                else:
                    s["obs"] = s["stack"].push(outcome.next_view.flat())
        obs = np.stack([s["obs"] for s in self.slots])
        buf.last_values = forward(params, obs).value
        return buf


def collect_rollout(
    params: PolicyParams,
    stream: Iterator[EpisodeSpec],
    horizon: int,
    rng: np.random.Generator,
    num_envs: int = 1,
    reward_cfg: Optional[RewardConfig] = None,
) -> RolloutBuffer:
    """Single-shot rollout of ``horizon`` steps starting from fresh episodes."""
    return RolloutCollector(stream, num_envs, reward_cfg).collect(params, horizon, rng)


# ---------------------------------------------------------------- update

def ppo_loss_and_grads(
    params: PolicyParams,
    obs: np.ndarray,
    actions: np.ndarray,
    logp_old: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    legal: Optional[np.ndarray],
    cfg: PpoConfig,
) -> tuple[float, dict, np.ndarray]:
    """Clipped PPO objective on one minibatch and its flat gradient."""
    n = len(actions)
    out = forward(params, obs)
    logp_all = log_softmax(out.logits, legal)
    probs = action_distribution(out.logits, legal)
    idx = np.arange(n)
    logp = logp_all[idx, actions]
    ratio = np.exp(logp - logp_old)
    eps = cfg.clip_epsilon
    surr = np.minimum(ratio * advantages, np.clip(ratio, 1 - eps, 1 + eps) * advantages)
    ent = entropy(probs, logp_all)
    verr = out.value - returns
    policy_loss = -surr.mean()
    value_loss = float(np.mean(verr ** 2))
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * ent.mean()

    clipped = ((advantages > 0) & (ratio > 1 + eps)) | ((advantages < 0) & (ratio < 1 - eps))
    dlogp = np.where(clipped, 0.0, -advantages * ratio)
    onehot = np.zeros_like(probs)
    onehot[idx, actions] = 1.0
    safe_logp = np.where(probs > 0, logp_all, 0.0)
    dent = -probs * (safe_logp + ent[:, None])
    dlogits = dlogp[:, None] * (onehot - probs) - cfg.entropy_coef * dent
    dvalue = 2.0 * cfg.value_coef * verr
    grad = backward(params, out, dlogits, dvalue)

    stats = {
        "loss": float(loss),
        "policy_loss": float(policy_loss),
        "value_loss": value_loss,
        "entropy": float(ent.mean()),
        "clip_frac": float(np.mean(np.abs(ratio - 1) > eps)),
        "kl": float(np.mean((ratio - 1) - (logp - logp_old))),
    }
    return float(loss), stats, grad


def ppo_update(
    params: PolicyParams,
    buffer: RolloutBuffer,
    cfg: PpoConfig,
    adam: AdamState,
    rng: np.random.Generator,
) -> tuple[PolicyParams, dict]:
    if buffer.advantages is None:
        buffer.compute_gae(cfg.gamma, cfg.gae_lambda)
    obs = buffer.flat("obs")
    actions = buffer.flat("actions")
    logp_old = buffer.flat("logprobs")
    legal = buffer.flat("legal")
    returns = buffer.flat("returns")
    adv = buffer.flat("advantages")
    if cfg.normalize_advantages and len(adv) > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    n = len(actions)
    flat = params.flat
    totals: dict[str, float] = {}
    count = 0
    for _ in range(cfg.epochs_per_update):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            mb = order[start:start + cfg.minibatch_size]
            cur = PolicyParams(params.arch, flat)
            loss, stats, grad = ppo_loss_and_grads(
                cur, obs[mb], actions[mb], logp_old[mb], adv[mb], returns[mb], legal[mb], cfg
            )
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingDiverged(f"non-finite PPO loss {loss} at Adam step {adam.t}")
            if cfg.max_grad_norm is not None:
                norm = np.linalg.norm(grad)
                if norm > cfg.max_grad_norm:
                    grad = grad * (cfg.max_grad_norm / norm)
            flat = adam_step(flat, grad, adam, cfg.learning_rate)
            for k, v in stats.items():
                totals[k] = totals.get(k, 0.0) + v
            count += 1
    mean_stats = {k: v / max(count, 1) for k, v in totals.items()}
    return PolicyParams(params.arch, flat), mean_stats

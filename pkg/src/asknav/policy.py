"""Actor-critic MLP with hand-written backpropagation.

All parameters live in one flat float64 vector; :class:`Architecture`
describes how it is sliced into per-layer weights and biases. A shared ReLU
trunk feeds a logits head and a scalar value head.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    hidden: tuple[int, ...] = (128, 64)
    action_dim: int = 7

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim <= 0 or self.action_dim <= 0 or any(h <= 0 for h in self.hidden):
            raise ValueError(f"all layer sizes must be positive: {self}")

    @cached_property
    def layout(self) -> tuple[tuple[str, tuple[int, ...], int], ...]:
        """``(name, shape, offset)`` for each tensor inside the flat vector."""
        shapes = []
        widths = (self.input_dim,) + self.hidden
        for i in range(len(self.hidden)):
            shapes += [(f"W{i}", (widths[i], widths[i + 1])), (f"b{i}", (widths[i + 1],))]
        last = widths[-1]
        shapes += [("W_pi", (last, self.action_dim)), ("b_pi", (self.action_dim,)),
                   ("W_v", (last, 1)), ("b_v", (1,))]
        out, offset = [], 0
        for name, shape in shapes:
            out.append((name, shape, offset))
            offset += int(np.prod(shape))
        return tuple(out)

    @property
    def num_params(self) -> int:
        name, shape, offset = self.layout[-1]
        return offset + int(np.prod(shape))

    @cached_property
    def slices(self) -> tuple[tuple[str, slice, tuple[int, ...]], ...]:
        return tuple((name, slice(off, off + int(np.prod(shape))), shape) for name, shape, off in self.layout)

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "hidden": list(self.hidden), "action_dim": self.action_dim}

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(int(d["input_dim"]), tuple(d["hidden"]), int(d["action_dim"]))


class PolicyParams:
    """Flat parameter vector plus named reshaped views into it."""

    def __init__(self, arch: Architecture, flat: Optional[np.ndarray] = None):
        self.arch = arch
        if flat is None:
            flat = np.zeros(arch.num_params)
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (arch.num_params,):
            raise ValueError(f"expected {arch.num_params} parameters, got {flat.shape}")
        self.flat = flat

    def tensors(self, flat: Optional[np.ndarray] = None) -> dict[str, np.ndarray]:
        flat = self.flat if flat is None else flat
        return {name: flat[sl].reshape(shape) for name, sl, shape in self.arch.slices}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors()[name]

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.arch, self.flat.copy())


def init_params(rng: np.random.Generator, arch: Architecture) -> PolicyParams:
    """Glorot-uniform weights, zero biases."""
    params = PolicyParams(arch)
    for name, shape, off in arch.layout:
        if name.startswith("W"):
            fan_in, fan_out = shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            n = fan_in * fan_out
            params.flat[off:off + n] = rng.uniform(-limit, limit, size=n)
    return params


@dataclass
class NetOutput:
    logits: np.ndarray  # (N, A)
    value: np.ndarray  # (N,)
    inputs: list  # input to each hidden layer, then the trunk output
    preacts: list  # hidden pre-activations


def forward(params: PolicyParams, obs: np.ndarray) -> NetOutput:
    x = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    arch = params.arch
    if x.shape[1] != arch.input_dim:
        raise ValueError(f"observation has {x.shape[1]} features, network expects {arch.input_dim}")
    t = params.tensors()
    inputs, preacts = [], []
    h = x
    for i in range(len(arch.hidden)):
        inputs.append(h)
        z = h @ t[f"W{i}"] + t[f"b{i}"]
        preacts.append(z)
        h = np.maximum(z, 0.0)
    inputs.append(h)
    logits = h @ t["W_pi"] + t["b_pi"]
    value = (h @ t["W_v"])[:, 0] + t["b_v"][0]
    return NetOutput(logits, value, inputs, preacts)


def backward(params: PolicyParams, out: NetOutput, dlogits: np.ndarray, dvalue: np.ndarray) -> np.ndarray:
    """Gradient of ``mean_i(loss_i)`` w.r.t. the flat parameters, given each
    example's ``d loss_i / d logits_i`` and ``d loss_i / d value_i``."""
    dlogits = np.atleast_2d(np.asarray(dlogits, dtype=np.float64))
    dvalue = np.asarray(dvalue, dtype=np.float64).reshape(-1)
    n = out.logits.shape[0]
    if dlogits.shape != out.logits.shape or dvalue.shape != (n,):
        raise ValueError(
            f"gradient shapes {dlogits.shape}, {dvalue.shape} do not match outputs {out.logits.shape}"
        )
    dlogits = dlogits / n
    dvalue = dvalue[:, None] / n
    grad = np.zeros_like(params.flat)
    g = params.tensors(grad)
    t = params.tensors()
    h = out.inputs[-1]
    g["W_pi"][...] = h.T @ dlogits
    g["b_pi"][...] = dlogits.sum(axis=0)
    g["W_v"][...] = h.T @ dvalue
    g["b_v"][...] = dvalue.sum(axis=0)
    dh = dlogits @ t["W_pi"].T + dvalue @ t["W_v"].T
    for i in reversed(range(len(params.arch.hidden))):
        dz = dh * (out.preacts[i] > 0)
        g[f"W{i}"][...] = out.inputs[i].T @ dz
        g[f"b{i}"][...] = dz.sum(axis=0)
        if i:
            dh = dz @ t[f"W{i}"].T
    return grad


def action_distribution(logits: np.ndarray, legal_mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Masked softmax along the last axis; illegal actions get probability 0."""
    logits = np.asarray(logits, dtype=np.float64)
    if legal_mask is None:
        legal = np.ones(logits.shape, dtype=bool)
    else:
        legal = np.broadcast_to(np.asarray(legal_mask, dtype=bool), logits.shape)
    if not legal.any(axis=-1).all():
        raise ValueError("action mask has no legal action")
    masked = np.where(legal, logits, -np.inf)
    e = np.where(legal, np.exp(masked - masked.max(axis=-1, keepdims=True)), 0.0)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray, legal_mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Masked log-probabilities; illegal entries are -inf."""
    logits = np.asarray(logits, dtype=np.float64)
    legal = np.ones(logits.shape, bool) if legal_mask is None else np.broadcast_to(legal_mask, logits.shape)
    masked = np.where(legal, logits, -np.inf)
    m = masked.max(axis=-1, keepdims=True)
    lse = m + np.log(np.where(legal, np.exp(masked - m), 0.0).sum(axis=-1, keepdims=True))
    return masked - lse


def entropy(probs: np.ndarray, logp: np.ndarray) -> np.ndarray:
    return -np.where(probs > 0, probs * np.where(probs > 0, logp, 0.0), 0.0).sum(axis=-1)


def logprob_entropy_value(
    params: PolicyParams,
    obs: np.ndarray,
    action,
    legal_mask: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-example log pi(action), policy entropy and value estimate."""
    out = forward(params, obs)
    logp = log_softmax(out.logits, legal_mask)
    probs = action_distribution(out.logits, legal_mask)
    action = np.atleast_1d(np.asarray(action, dtype=np.int64))
    chosen = logp[np.arange(len(action)), action]
    return chosen, entropy(probs, logp), out.value

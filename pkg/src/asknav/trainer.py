"""Training loop: curriculum stream -> rollouts -> PPO updates, with stats CSV
and periodic checkpoints.

Every iteration draws its episodes and actions from generators seeded by
``(seed, iteration)`` and starts from fresh episodes, so a run resumed from
any checkpoint reproduces the uninterrupted run exactly.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .checkpoint import Checkpoint, atomic_write, export_json, load_checkpoint, save_checkpoint
from .config import RunConfig
from .curriculum import SplitSpec, build_split, training_stream
from .policy import Architecture, init_params
from .ppo import AdamState, RolloutCollector, ppo_update

log = logging.getLogger(__name__)

STATS_HEADER = ("iteration", "mean_return", "sr_train", "policy_loss", "value_loss", "entropy", "clip_frac", "kl")


def run_split(cfg: RunConfig) -> SplitSpec:
    return build_split(cfg.env.vocab_size, cfg.env.seen_classes, np.random.default_rng(cfg.curriculum.split_seed))


def run_architecture(cfg: RunConfig) -> Architecture:
    feedback = cfg.curriculum_config.feedback_enabled
    n_actions = 7 if feedback else 6
    return Architecture(cfg.policy.obs_stack * cfg.env.obs_dim(feedback), cfg.policy.hidden, n_actions)


def _iteration_rngs(seed: int, iteration: int) -> tuple[np.random.Generator, np.random.Generator]:
    stream_ss, act_ss = np.random.SeedSequence(seed, spawn_key=(1, iteration)).spawn(2)
    return np.random.default_rng(stream_ss), np.random.default_rng(act_ss)


def initial_checkpoint(cfg: RunConfig) -> Checkpoint:
    arch = run_architecture(cfg)
    params = init_params(np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,))), arch)
    return Checkpoint(arch, params.flat, AdamState.zeros(arch.num_params), 0, cfg.to_dict())


def train_iteration(cfg: RunConfig, ckpt: Checkpoint, split: SplitSpec) -> tuple[Checkpoint, dict]:
    """One collect-and-update round. Returns the next checkpoint and its stats."""
    stream_rng, act_rng = _iteration_rngs(cfg.seed, ckpt.iteration)
    stream = training_stream(cfg.curriculum_config, split, stream_rng, cfg.env)
    collector = RolloutCollector(stream, cfg.ppo.num_envs, cfg.reward, cfg.policy.obs_stack)
    params = ckpt.policy()
    buf = collector.collect(params, cfg.ppo.horizon, act_rng)
    params, stats = ppo_update(params, buf, cfg.ppo, ckpt.adam, act_rng)
    stats = {
        "iteration": ckpt.iteration + 1,
        "mean_return": float(np.mean(buf.episode_returns)) if buf.episode_returns else "",
        "sr_train": float(np.mean(buf.episode_successes)) if buf.episode_successes else "",
        **{k: stats.get(k, 0.0) for k in STATS_HEADER[3:]},
    }
    return Checkpoint(ckpt.arch, params.flat, ckpt.adam, ckpt.iteration + 1, ckpt.config), stats


def _format_row(row: dict) -> dict:
    return {k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()}


def _write_stats(path: str, rows: list[dict]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=STATS_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(_format_row(row))
    atomic_write(path, buf.getvalue().encode("utf-8"))


def _read_stats(path: str, upto: int) -> list[dict]:
    if not os.path.exists(path):
        return []
    with open(path, newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if int(r["iteration"]) <= upto]
    return [{k: (float(v) if v not in ("",) and k != "iteration" else v) for k, v in r.items()}
            | {"iteration": int(r["iteration"])} for r in rows]


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    stats: list
    out_dir: str

    @property
    def final_path(self) -> str:
        return os.path.join(self.out_dir, "final.ckpt")


def train(
    cfg: RunConfig,
    out_dir: Optional[str] = None,
    resume: Optional[str] = None,
    export_weights_json: bool = False,
    progress: Optional[Callable[[dict], None]] = None,
) -> TrainResult:
    """Train for ``cfg.curriculum.total_iterations`` PPO updates.

    Writes ``stats.csv`` (one row per update), ``ckpt_NNNNNN.ckpt`` every
    ``checkpoint_every`` updates and ``final.ckpt`` at the end into ``out_dir``.
    """
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    split = run_split(cfg)
    stats_path = os.path.join(out_dir, "stats.csv")
    if resume:
        ckpt = load_checkpoint(resume)
        if ckpt.arch != run_architecture(cfg):
            raise ValueError(f"checkpoint architecture {ckpt.arch} does not match the config")
        ckpt.config = cfg.to_dict()
        rows = _read_stats(stats_path, ckpt.iteration)
    else:
        ckpt = initial_checkpoint(cfg)
        rows = []
    total = cfg.curriculum.total_iterations
    every = cfg.curriculum.checkpoint_every
    while ckpt.iteration < total:
        ckpt, stats = train_iteration(cfg, ckpt, split)
        bad = [k for k, v in stats.items() if isinstance(v, float) and not math.isfinite(v)]
        if bad:
            raise FloatingPointError(f"non-finite training stats {bad} at iteration {ckpt.iteration}")
        rows.append(stats)
        if progress:
            progress(stats)
        log.debug("iteration %d: %s", ckpt.iteration, stats)
        if ckpt.iteration % every == 0:
            save_checkpoint(os.path.join(out_dir, f"ckpt_{ckpt.iteration:06d}.ckpt"), ckpt)
            _write_stats(stats_path, rows)
    _write_stats(stats_path, rows)
    result = TrainResult(ckpt, rows, out_dir)
    save_checkpoint(result.final_path, ckpt)
    if export_weights_json:
        export_json(ckpt, os.path.join(out_dir, "final.json"))
    return result

"""Multi-seed training and evaluation for the method comparison.

Runs are cached under a root directory as ``<method>_s<seed>/final.ckpt`` and
reused when the stored config matches, so repeated evaluation does not
retrain. Training is deterministic, so a cached run equals a fresh one.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .checkpoint import CheckpointError, load_checkpoint
from .config import RunConfig, parse_config
from .curriculum import EvalRow, evaluate
from .trainer import run_split, train

SEEDS = (0, 1, 2)
METHODS = {
    "Baseline": ("baseline", 0),
    "Feedback": ("feedback", 100),
    "Semi-25": ("semi", 25),
    "Semi-75": ("semi", 75),
}


def run_config(label: str, seed: int) -> RunConfig:
    method, eta = METHODS[label]
    return parse_config(f'seed = {seed}\ncurriculum.method = "{method}"\ncurriculum.eta_percent = {eta}\n')


def ensure_trained(root: str, label: str, seed: int, log: Optional[Callable[[str], None]] = None):
    cfg = run_config(label, seed)
    out = os.path.join(root, f"{METHODS[label][0]}{METHODS[label][1]}_s{seed}")
    path = os.path.join(out, "final.ckpt")
    try:
        ckpt = load_checkpoint(path)
        if ckpt.config == cfg.to_dict() and ckpt.iteration == cfg.curriculum.total_iterations:
            return ckpt, cfg
    except (FileNotFoundError, CheckpointError):
        pass
    if log:
        log(f"training {label} seed {seed} -> {out}")
    return train(cfg, out).checkpoint, cfg


@dataclass
class Condition:
    label: str
    presence: bool
    split: str

    @property
    def key(self):
        return (self.label, self.presence, self.split)


def evaluate_conditions(
    root: str,
    conditions: Sequence[Condition],
    seeds: Sequence[int] = SEEDS,
    episodes: int = 500,
    log: Optional[Callable[[str], None]] = None,
) -> dict:
    """Seed-averaged eval rows keyed by ``(label, presence, split)``; the
    per-seed rows are kept in ``.per_seed`` of the returned dict."""
    per_seed: dict = {}
    for label in dict.fromkeys(c.label for c in conditions):
        for seed in seeds:
            ckpt, cfg = ensure_trained(root, label, seed, log)
            for c in conditions:
                if c.label != label:
                    continue
                row = evaluate(ckpt.policy(), run_split(cfg), c.presence, episodes, cfg.eval.seed,
                               split_name=c.split, env_cfg=cfg.env, method=label, greedy=cfg.eval.greedy)
                per_seed.setdefault(c.key, []).append(row)
    out = ResultSet()
    for key, rows in per_seed.items():
        out[key] = EvalRow(
            key[0], key[1], key[2],
            float(np.mean([r.sr for r in rows])), float(np.mean([r.spl for r in rows])),
            sum(r.n_episodes for r in rows),
            float(np.mean([r.mean_len for r in rows])), float(np.mean([r.mean_asks for r in rows])),
        )
    out.per_seed = per_seed
    return out


class ResultSet(dict):
    per_seed: dict

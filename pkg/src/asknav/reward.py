"""Per-step reward. Shaping follows the decrease in geodesic distance to the
success region, expressed in meters."""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .actions import Action

if TYPE_CHECKING:
    from .env import StepOutcome


@dataclass(frozen=True)
class RewardConfig:
    success_reward: float = 10.0
    step_penalty: float = -0.01
    shaping_coef: float = 1.0
    ask_cost: float = 0.0
    failed_stop_reward: float = 0.0


def compute_reward(outcome: "StepOutcome", action: int, cfg: RewardConfig, cell_size_m: float = 0.25) -> float:
    info = outcome.info
    r = cfg.step_penalty
    r += cfg.shaping_coef * (info["geodesic_before"] - info["geodesic_after"]) * cell_size_m
    if outcome.success:
        r += cfg.success_reward
    elif action == Action.STOP:
        r += cfg.failed_stop_reward
    if action == Action.ASK:
        r += cfg.ask_cost
    return float(r)

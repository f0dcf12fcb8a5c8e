"""Ground-truth teacher: per-episode presence draws and object-in-view masks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np


if TYPE_CHECKING:
    from .env import EpisodeSpec, EpisodeState


@dataclass(frozen=True)
class PresencePolicy:
    eta_percent: float = 100.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta_percent <= 100.0:
            raise ValueError(f"eta_percent must lie in [0, 100], got {self.eta_percent}")


@dataclass(frozen=True)
class AskOutcome:
    answered: bool
    mask: np.ndarray


def sample_presence(rng: np.random.Generator, policy: PresencePolicy) -> bool:
    """One Bernoulli(eta/100) draw. Call once per episode.

    A uniform draw is consumed even at the endpoints so that the generator
    stream does not depend on eta.
    """
    return bool(rng.random() < policy.eta_percent / 100.0)


def object_in_view_mask(spec: "EpisodeSpec", state: "EpisodeState") -> np.ndarray:
    """K x K egocentric mask: 1 where a visible window cell holds the target."""
    k = spec.view_k
    return spec.pose_view(state.pose.cell, state.pose.heading).target_mask.reshape(k, k).copy()


def resolve_ask(presence: bool, spec: "EpisodeSpec", state: "EpisodeState") -> AskOutcome:
    if not presence:
        return AskOutcome(False, np.zeros((spec.view_k, spec.view_k)))
    return AskOutcome(True, object_in_view_mask(spec, state))

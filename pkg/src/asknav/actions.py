"""Discrete action set. The first six are the navigation actions; ``ASK``
exists only when the agent has the feedback capability."""
from __future__ import annotations

from enum import IntEnum


class Action(IntEnum):
    MOVE_AHEAD = 0
    MOVE_BACK = 1
    ROTATE_LEFT = 2
    ROTATE_RIGHT = 3
    PASS = 4
    STOP = 5
    ASK = 6


NUM_NAV_ACTIONS = 6


def action_count(feedback_enabled: bool) -> int:
    return NUM_NAV_ACTIONS + 1 if feedback_enabled else NUM_NAV_ACTIONS

"""Grid-world ObjectNav: episode generation, dynamics, egocentric rendering
and the success test.

The environment is a set of pure functions over an immutable
:class:`EpisodeSpec` and a small mutable :class:`EpisodeState`; the only
randomness is the generator handed to :func:`generate_episode`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from . import teacher
from .actions import Action, action_count
from .geometry import (
    FORWARD,
    Cell,
    GridMap,
    distance_field,
    flat_view_offsets,
    is_connected,
    line_of_sight,
    view_geometry,
    window_visibility,
)
from .reward import RewardConfig, compute_reward


class ConfigError(ValueError):
    """Raised for configurations that cannot produce a valid episode."""


class EpisodeDone(RuntimeError):
    """Raised when stepping an episode that has already ended."""


@dataclass(frozen=True)
class EnvConfig:
    grid_w: int = 11
    grid_h: int = 11
    obstacle_density: float = 0.15
    num_objects: int = 6
    vocab_size: int = 12
    seen_classes: int = 8
    max_steps: int = 200
    success_radius_m: float = 1.0
    cell_size_m: float = 0.25
    view_k: int = 7
    feedback_persistence_steps: int = 1
    require_visible_at_stop: bool = False
    max_resample: int = 1000

    @property
    def num_channels(self) -> int:
        return 3 + self.vocab_size

    def aux_dim(self, feedback_enabled: bool) -> int:
        return self.vocab_size + 1 + action_count(feedback_enabled)

    def obs_dim(self, feedback_enabled: bool) -> int:
        return self.view_k * self.view_k * self.num_channels + self.aux_dim(feedback_enabled)


@dataclass(frozen=True)
class ObjectInstance:
    class_id: int
    cell: Cell


@dataclass(frozen=True)
class Pose:
    cell: Cell
    heading: int


@dataclass(frozen=True, eq=False)
class EpisodeSpec:
    grid: GridMap
    objects: tuple[ObjectInstance, ...]
    target_class: int
    start_pose: Pose
    teacher_present: bool = False
    feedback_enabled: bool = False
    max_steps: int = 200
    success_radius_m: float = 1.0
    vocab_size: int = 12
    view_k: int = 7
    feedback_persistence_steps: int = 1
    require_visible_at_stop: bool = False

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EpisodeSpec):
            return NotImplemented
        return all(
            getattr(self, f) == getattr(other, f)
            for f in self.__dataclass_fields__
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def target(self) -> ObjectInstance:
        return next(o for o in self.objects if o.class_id == self.target_class)

    @property
    def num_actions(self) -> int:
        return action_count(self.feedback_enabled)

    def legal_mask(self) -> np.ndarray:
        return np.ones(self.num_actions, dtype=bool)

    @cached_property
    def success_region(self) -> frozenset[Cell]:
        """Free cells whose centre lies within the success radius of the target."""
        tr, tc = self.target.cell
        limit = self.success_radius_m / self.grid.cell_size_m
        return frozenset(
            (r, c) for r, c in self.grid.free_cells()
            if math.hypot(r - tr, c - tc) <= limit + 1e-9
        )

    @cached_property
    def distance_to_success(self) -> np.ndarray:
        return distance_field(self.grid, self.success_region)

    @cached_property
    def class_grid(self) -> np.ndarray:
        """Class id per cell padded by ``view_k`` rings of -1."""
        pad = self.view_k
        out = np.full((self.grid.height + 2 * pad, self.grid.width + 2 * pad), -1, dtype=np.int64)
        for obj in self.objects:
            out[obj.cell[0] + pad, obj.cell[1] + pad] = obj.class_id
        return out

    @cached_property
    def _render_tables(self) -> tuple:
        """Raveled maps padded by ``view_k`` rings: occupancy, in-bounds,
        per-cell features (occupied, in-bounds, class one-hot, empty
        feedback), the target cell, and the padded width."""
        pad = self.view_k
        occ = self.grid.padded(pad)
        hp, wp = occ.shape
        inb = np.zeros((hp, wp), dtype=bool)
        inb[pad:pad + self.grid.height, pad:pad + self.grid.width] = True
        features = np.zeros((hp * wp, 3 + self.vocab_size))
        features[:, 0] = occ.ravel()
        features[:, 1] = inb.ravel()
        classes = self.class_grid.ravel()
        has = np.nonzero(classes >= 0)[0]
        features[has, 2 + classes[has]] = 1.0
        target = np.zeros(hp * wp, dtype=bool)
        tr, tc = self.target.cell
        target[(tr + pad) * wp + tc + pad] = True
        return occ.ravel(), inb.ravel(), features, target, wp

    def shortest_path_length(self) -> int:
        return int(self.distance_to_success[self.start_pose.cell])

    @cached_property
    def _pose_cache(self) -> dict:
        return {}

    def pose_view(self, cell: Cell, heading: int) -> "PoseView":
        """Static part of the egocentric view from one pose, memoised per
        episode since agents revisit poses often."""
        key = (cell, heading)
        view = self._pose_cache.get(key)
        if view is None:
            view = self._pose_cache[key] = _compute_pose_view(self, cell, heading)
        return view


@dataclass
class EpisodeState:
    pose: Pose
    steps: int = 0
    path_length: int = 0
    asks: int = 0
    done: bool = False
    success: bool = False
    last_action: Optional[int] = None
    feedback_ttl: int = 0


@dataclass(frozen=True)
class EgoView:
    window: np.ndarray  # (K, K, C)
    aux: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.window.ravel(), self.aux])


@dataclass
class StepOutcome:
    next_view: Optional[EgoView]
    reward: float
    done: bool
    success: bool
    info: dict = field(default_factory=dict)


# ---------------------------------------------------------------- generation

def _random_grid(rng: np.random.Generator, cfg: EnvConfig) -> GridMap:
    occ = np.zeros((cfg.grid_h, cfg.grid_w), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    interior = rng.random((cfg.grid_h - 2, cfg.grid_w - 2)) < cfg.obstacle_density
    occ[1:-1, 1:-1] = interior
    return GridMap(occ, cfg.cell_size_m)


def generate_episode(rng: np.random.Generator, cfg: EnvConfig, pool: Sequence[int]) -> EpisodeSpec:
    """Draw a random arena, object layout, target and start pose.

    ``pool`` holds the class ids eligible as targets (one split's classes).
    Distractor classes are drawn from the rest of the vocabulary. The start
    pose lies outside the success region, so the shortest path is positive.
    """
    if len(pool) == 0:
        raise ConfigError("target class pool is empty")
    if any(not 0 <= c < cfg.vocab_size for c in pool):
        raise ConfigError(f"class pool {list(pool)} exceeds vocab_size={cfg.vocab_size}")
    if cfg.num_objects < 1 or cfg.num_objects > cfg.vocab_size:
        raise ConfigError(f"num_objects={cfg.num_objects} needs 1..vocab_size distinct classes")
    interior = (cfg.grid_h - 2) * (cfg.grid_w - 2)
    if cfg.num_objects + 1 > interior:
        raise ConfigError(f"num_objects + 1 = {cfg.num_objects + 1} exceeds {interior} free cells")

    for _ in range(cfg.max_resample):
        grid = _random_grid(rng, cfg)
        free = grid.free_cells()
        if len(free) < cfg.num_objects + 1 or not is_connected(grid):
            continue
        target_class = int(pool[rng.integers(len(pool))])
        others = [c for c in range(cfg.vocab_size) if c != target_class]
        distractors = rng.choice(others, size=cfg.num_objects - 1, replace=False) if others else []
        picks = rng.choice(len(free), size=cfg.num_objects, replace=False)
        classes = [target_class] + [int(c) for c in distractors]
        objects = tuple(ObjectInstance(cls, free[int(i)]) for cls, i in zip(classes, picks))
        spec = EpisodeSpec(
            grid=grid,
            objects=objects,
            target_class=target_class,
            start_pose=Pose((0, 0), 0),
            max_steps=cfg.max_steps,
            success_radius_m=cfg.success_radius_m,
            vocab_size=cfg.vocab_size,
            view_k=cfg.view_k,
            feedback_persistence_steps=cfg.feedback_persistence_steps,
            require_visible_at_stop=cfg.require_visible_at_stop,
        )
        taken = {o.cell for o in objects}
        starts = [c for c in free if c not in taken and c not in spec.success_region]
        if not starts:
            continue
        start = starts[int(rng.integers(len(starts)))]
        heading = int(rng.integers(4))
        return replace(spec, start_pose=Pose(start, heading))
    raise ConfigError(f"no valid episode after {cfg.max_resample} resamples")


def reset(spec: EpisodeSpec) -> EpisodeState:
    return EpisodeState(pose=spec.start_pose)


# ---------------------------------------------------------------- dynamics

def success_check(spec: EpisodeSpec, state: EpisodeState) -> bool:
    """Euclidean distance from the agent to the target, in meters, is within
    the success radius (inclusive)."""
    (ar, ac), (tr, tc) = state.pose.cell, spec.target.cell
    dist_m = math.hypot(ar - tr, ac - tc) * spec.grid.cell_size_m
    if dist_m > spec.success_radius_m + 1e-9:
        return False
    if spec.require_visible_at_stop:
        return bool(teacher.object_in_view_mask(spec, state).any())
    return True


def step(
    spec: EpisodeSpec,
    state: EpisodeState,
    action: int,
    reward_cfg: Optional[RewardConfig] = None,
    render: bool = True,
) -> StepOutcome:
    """Advance the episode by one action, mutating ``state``."""
    if state.done:
        raise EpisodeDone("step() called on a finished episode")
    action = Action(int(action))
    if action == Action.ASK and not spec.feedback_enabled:
        raise ValueError("Ask is not available without the feedback capability")
    reward_cfg = reward_cfg or RewardConfig()
    dist = spec.distance_to_success
    before = int(dist[state.pose.cell])

    pose = state.pose
    success = False
    feedback = None
    if action in (Action.MOVE_AHEAD, Action.MOVE_BACK):
        dr, dc = FORWARD[pose.heading]
        sign = 1 if action == Action.MOVE_AHEAD else -1
        nxt = (pose.cell[0] + sign * dr, pose.cell[1] + sign * dc)
        if spec.grid.is_free(nxt):
            state.pose = Pose(nxt, pose.heading)
            state.path_length += 1
    elif action == Action.ROTATE_LEFT:
        state.pose = Pose(pose.cell, (pose.heading - 1) % 4)
    elif action == Action.ROTATE_RIGHT:
        state.pose = Pose(pose.cell, (pose.heading + 1) % 4)
    elif action == Action.STOP:
        success = success_check(spec, state)
        state.done = True
    elif action == Action.ASK:
        state.asks += 1
        answer = teacher.resolve_ask(spec.teacher_present, spec, state)
        if answer.answered:
            feedback = answer.mask

    state.steps += 1
    if action == Action.ASK and feedback is not None:
        state.feedback_ttl = spec.feedback_persistence_steps
    else:
        state.feedback_ttl = max(0, state.feedback_ttl - 1)
    state.last_action = int(action)
    state.success = success
    if state.steps >= spec.max_steps:
        state.done = True

    after = int(dist[state.pose.cell])
    info = {"geodesic_before": before, "geodesic_after": after, "path_length_so_far": state.path_length}
    outcome = StepOutcome(None, 0.0, state.done, success, info)
    outcome.reward = compute_reward(outcome, action, reward_cfg, spec.grid.cell_size_m)
    if render:
        outcome.next_view = render_egoview(spec, state, feedback)
    return outcome


# ---------------------------------------------------------------- rendering

@dataclass(frozen=True)
class PoseView:
    window: np.ndarray  # (K*K, C) with an empty feedback channel
    visible: np.ndarray  # (K*K,) bool
    target_mask: np.ndarray  # (K*K,) float, visible cells holding the target


def _compute_pose_view(spec: EpisodeSpec, cell: Cell, heading: int) -> PoseView:
    k = spec.view_k
    occ, inb_map, features, target_map, wp = spec._render_tables
    window_off, between_off = flat_view_offsets(k, wp)
    base = (cell[0] + k) * wp + cell[1] + k
    cells = base + window_off[heading]
    inb = inb_map[cells]
    blocked = occ[base + between_off[heading]] & view_geometry(k).between_valid[heading]
    visible = inb & ~blocked.any(axis=1)
    # in view: the cell's features; out of bounds: occupied only; otherwise zeros
    window = features[cells] * (visible | ~inb)[:, None]
    target_mask = (target_map[cells] & visible).astype(np.float64)
    for arr in (window, visible, target_mask):
        arr.setflags(write=False)
    return PoseView(window, visible, target_mask)


def render_egoview(spec: EpisodeSpec, state: EpisodeState, feedback_mask: Optional[np.ndarray] = None) -> EgoView:
    """Egocentric K x K x C window plus aux vector.

    Channels: occupied, visible, one per object class, feedback. Occupancy
    and classes are shown only at visible cells; out-of-bounds cells read as
    occupied and invisible. When ``feedback_mask`` is None the feedback channel
    is recomputed from the teacher while the episode's feedback window is open.
    """
    k = spec.view_k
    pv = spec.pose_view(state.pose.cell, state.pose.heading)
    window = pv.window.copy()
    if feedback_mask is None and state.feedback_ttl > 0 and spec.teacher_present:
        feedback_mask = pv.target_mask
    if feedback_mask is not None:
        window[:, -1] = np.asarray(feedback_mask).ravel() * pv.visible

    n_act = spec.num_actions
    aux = np.zeros(spec.vocab_size + 1 + n_act)
    aux[spec.target_class] = 1.0
    aux[spec.vocab_size] = float(spec.teacher_present)
    if state.last_action is not None:
        aux[spec.vocab_size + 1 + state.last_action] = 1.0
    return EgoView(window.reshape(k, k, -1), aux)


def visible_cells(spec: EpisodeSpec, state: EpisodeState) -> set[Cell]:
    """World cells marked visible in the current window (reference helper)."""
    world, _, visible = window_visibility(spec.grid, spec.view_k, state.pose.cell, state.pose.heading)
    return {(int(r), int(c)) for (r, c), v in zip(world, visible) if v}


__all__ = [
    "Action",
    "ConfigError",
    "EgoView",
    "EnvConfig",
    "EpisodeDone",
    "EpisodeSpec",
    "EpisodeState",
    "ObjectInstance",
    "Pose",
    "StepOutcome",
    "generate_episode",
    "line_of_sight",
    "render_egoview",
    "reset",
    "step",
    "success_check",
    "visible_cells",
]

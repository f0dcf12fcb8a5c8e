"""Object navigation in a small grid world where the agent may ask a teacher
for a mask of the target, trained with a numpy-only PPO."""

from .actions import Action
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig, load_config, parse_config
from .curriculum import CurriculumConfig, SplitSpec, comparison_table, compute_spl, compute_sr, evaluate
from .env import EnvConfig, EpisodeSpec, generate_episode, render_egoview, reset, step
from .policy import Architecture, PolicyParams, forward, init_params
from .ppo import PpoConfig, compute_gae, ppo_update
from .teacher import object_in_view_mask
from .trainer import train

__version__ = "0.1.0"

__all__ = [
    "Action", "Architecture", "Checkpoint", "CurriculumConfig", "EnvConfig", "EpisodeSpec",
    "PolicyParams", "PpoConfig", "RunConfig", "SplitSpec", "comparison_table", "compute_gae",
    "compute_spl", "compute_sr", "evaluate", "forward", "generate_episode", "init_params",
    "load_checkpoint", "load_config", "object_in_view_mask", "parse_config", "ppo_update",
    "render_egoview", "reset", "save_checkpoint", "step", "train",
]

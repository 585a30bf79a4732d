"""Bandit-steered orchestration engine for agentic video-ad generation."""

__version__ = "0.1.0"

from .bandit import BanditPolicy, Mode, best_arm, new_policy, select, ucb_index, update, warm_start
from .creative_space import AgentDirectives, CreativeConfig, CreativeDimension, all_configs, enumerate_arms
from .errors import VidstoryError
from .verifiers import FactoredReward

__all__ = [
    "AgentDirectives",
    "BanditPolicy",
    "CreativeConfig",
    "CreativeDimension",
    "FactoredReward",
    "Mode",
    "VidstoryError",
    "all_configs",
    "best_arm",
    "enumerate_arms",
    "new_policy",
    "select",
    "ucb_index",
    "update",
    "warm_start",
]

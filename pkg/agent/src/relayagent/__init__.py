"""Soft actor-critic learner for the relay-node simulator's agent protocol."""

from .config import PROFILES, SacConfig, profile
from .replay import ReplayBuffer
from .sac import SacAgent

__version__ = "0.1.0"

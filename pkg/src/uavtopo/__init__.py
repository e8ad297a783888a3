"""Covert UAV relay networks: air-to-ground channel, Stackelberg pricing game,
topology reward and a discrete diffusion policy for UAV-UAV link design."""

from .channel import ChannelParams, Placement, coverage_radius, mean_path_loss, received_power_dbm
from .env import RewardWeights, TopologyGraph, total_reward
from .errors import (
    ArtifactIOError,
    ConfigError,
    DomainError,
    InfeasibleError,
    IterationLimitError,
    NumericalError,
    OutOfRangeError,
    UavTopoError,
)
from .game import AliceParams, GameEquilibrium, UavGameParams, select_combination, solve_stackelberg
from .scenario import Scenario, ScenarioConfig, generate_scenario
from .trainer import TrainConfig, train_gdpo

__version__ = "0.1.0"

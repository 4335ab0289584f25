"""Deep hedging policy trainer operating on exported scenario files."""

from .ddpg import TrainerConfig, TrainResult, train
from .env import HedgingBatchEnv, Option, objective
from .scenario import ScenarioFile, read_scenarios

__version__ = "0.1.0"

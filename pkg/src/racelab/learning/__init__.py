"""Policy learning for the lookahead distance: networks, normalization, PPO, bundles."""

from racelab.learning.bundle import BundleError, PolicyBundle
from racelab.learning.networks import ActorCritic, TrainingFault
from racelab.learning.normalize import Normalizer, RunningMeanStd
from racelab.learning.ppo import PpoConfig, compute_gae, gradient_check, ppo_update
from racelab.learning.train import TrainResult, train

__all__ = ["ActorCritic", "BundleError", "Normalizer", "PolicyBundle", "PpoConfig",
           "RunningMeanStd", "TrainResult", "TrainingFault", "compute_gae", "gradient_check",
           "ppo_update", "train"]

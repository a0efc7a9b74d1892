"""Attention-only transformer lab.

Trains a one-hot, attention-only transformer with plain gradient descent and
compares its weights with closed-form corpus statistics.
"""

from .corpus import CorpusConfig, SequenceBatch, Vocab
from .errors import AtdlError
from .model import InitConfig, ModelParams
from .stats import BasisStats, coefficients, compute_stats
from .trainer import Checkpoint, TrainConfig

__version__ = "0.1.0"

__all__ = ["AtdlError", "BasisStats", "Checkpoint", "CorpusConfig", "InitConfig",
           "ModelParams", "SequenceBatch", "TrainConfig", "Vocab", "coefficients",
           "compute_stats"]

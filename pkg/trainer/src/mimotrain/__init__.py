"""End-to-end training of the DNN modulator + GNN-enhanced EP detector."""

from .config import TrainConfig, parse_config_file
from .model import GepnetDetector, GruCell, Modulator, NetSizes, cross_entropy_loss
from .train import DivergenceError, train

__version__ = "0.1.0"

__all__ = [
    "DivergenceError",
    "GepnetDetector",
    "GruCell",
    "Modulator",
    "NetSizes",
    "TrainConfig",
    "cross_entropy_loss",
    "parse_config_file",
    "train",
]

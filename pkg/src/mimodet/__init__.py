"""MU-MIMO link-level simulator and symbol detection engine."""

from ._kernels import BACKEND
from .channel import (
    ChannelInstance,
    Constellation,
    make_rng,
    modulate,
    qam_constellation,
    sample_channel,
    snr_to_sigma2,
    transmit,
)
from .detectors import DetectionResult, EpConfig, ep_detect, ml_detect, mmse_detect
from .gepnet import GepnetConfig, gepnet_detect, load_gepnet, random_weights
from .weights_io import WeightBundle, read_bundle, write_bundle

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ChannelInstance",
    "Constellation",
    "DetectionResult",
    "EpConfig",
    "GepnetConfig",
    "WeightBundle",
    "ep_detect",
    "gepnet_detect",
    "load_gepnet",
    "make_rng",
    "ml_detect",
    "mmse_detect",
    "modulate",
    "qam_constellation",
    "random_weights",
    "read_bundle",
    "sample_channel",
    "snr_to_sigma2",
    "transmit",
    "write_bundle",
]

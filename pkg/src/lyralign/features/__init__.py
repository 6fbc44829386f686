"""Acoustic feature extraction: framing, MFCC, and the five descriptor groups."""

from .assemble import (
    GROUP_ORDER,
    FeatureConfig,
    FeatureError,
    FeatureMatrix,
    assemble,
    extract_features,
)
from .descriptors import chroma, energy_group, harmonicity, spectral_group, zero_crossing_rate
from .fileio import FeatureFileError, read_features, write_features
from .framing import FrameSpec, FramingError, frame_and_window, power_spectrum
from .mel import add_deltas, cmvn, deltas, log_mel, mel_filter_weights, mfcc
from .rasta import rasta_filter, rasta_frequency_response
from .voicing import acf_peak, voicing_group

__all__ = [
    "GROUP_ORDER", "FeatureConfig", "FeatureError", "FeatureMatrix",
    "assemble", "extract_features",
    "chroma", "energy_group", "harmonicity", "spectral_group", "zero_crossing_rate",
    "FeatureFileError", "read_features", "write_features",
    "FrameSpec", "FramingError", "frame_and_window", "power_spectrum",
    "add_deltas", "cmvn", "deltas", "log_mel", "mel_filter_weights", "mfcc",
    "rasta_filter", "rasta_frequency_response",
    "acf_peak", "voicing_group",
]

"""Acoustic modeling: GMM-HMM training, hybrid MLP, Viterbi state alignment."""

from .io import (
    ModelChecksumError,
    ModelFormatError,
    ModelVersionError,
    dumps_model,
    load_model,
    loads_model,
    model_sha256,
    save_model,
)
from .mlp import AdaptConfig, MlpModel, adapt_mlp, estimate_priors, splice_frames, train_mlp
from .model import (
    EMIT_FLOOR,
    TRANS_FLOOR,
    VAR_FLOOR,
    AcousticModel,
    GmmState,
    HmmTopology,
    LayoutMismatchError,
    ModelError,
)
from .train import em_train, flat_start, map_adapt_gmm, split_components
from .viterbi import DecodeGraph, DecodeResult, NoPathError, force_align_states, viterbi_decode

__all__ = [
    "AcousticModel", "AdaptConfig", "DecodeGraph", "DecodeResult", "GmmState",
    "HmmTopology", "LayoutMismatchError", "MlpModel", "ModelChecksumError",
    "ModelError", "ModelFormatError", "ModelVersionError", "NoPathError",
    "EMIT_FLOOR", "TRANS_FLOOR", "VAR_FLOOR",
    "adapt_mlp", "dumps_model", "em_train", "estimate_priors", "flat_start",
    "force_align_states", "load_model", "loads_model", "map_adapt_gmm",
    "model_sha256", "save_model", "splice_frames", "split_components",
    "train_mlp", "viterbi_decode",
]

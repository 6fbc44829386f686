"""Feature configuration and assembly of per-group matrices.

Group ids and their per-frame dimensionalities:

    MFCC  39 (gmm variant: 13 cepstra + deltas + delta-deltas)
          40 (nn variant: 40 cepstra from a 40-band filterbank, no deltas)
    A     52 (26 RASTA-filtered auditory bands + deltas)
    E      8 (loudness, RASTA sum, RMS, ZCR + deltas)
    C     12 (pitch-class intensities, no deltas)
    S     30 (15 spectral descriptors + deltas)
    V     12 (6 voice-quality measures + deltas)

Named presets follow the experiment grid: C1 is the 39-d gmm-variant MFCC
alone; C2 is the 40-d nn-variant MFCC plus all five groups (154 total);
C2-A .. C2-V add a single group to the 40-d base.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..audio import CANONICAL_RATE_HZ, AudioBuffer
from .descriptors import chroma, energy_group, spectral_group
from .framing import FrameSpec, frame_and_window, power_spectrum
from .mel import add_deltas, cmvn, filterbank_energies, log_mel, mel_filter_weights, mfcc
from .rasta import rasta_filter
from .voicing import voicing_group

GROUP_ORDER = ("MFCC", "A", "E", "C", "S", "V")
LLD_GROUPS = ("A", "E", "C", "S", "V")
N_MEL_BANDS = 26
_NN_BANDS = 40


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    """Which groups to extract and how; MFCC is always included."""

    groups: tuple[str, ...] = ("MFCC",)
    mfcc_variant: str = "gmm"
    delta_window: int = 2
    cmvn: bool = False

    def __post_init__(self):
        for g in self.groups:
            if g not in GROUP_ORDER:
                raise FeatureError(f"unknown feature group {g!r}")
        ordered = tuple(g for g in GROUP_ORDER if g == "MFCC" or g in self.groups)
        object.__setattr__(self, "groups", ordered)
        if self.mfcc_variant not in ("gmm", "nn"):
            raise FeatureError(f"mfcc_variant must be 'gmm' or 'nn', got {self.mfcc_variant!r}")
        if self.delta_window < 1:
            raise FeatureError("delta_window must be >= 1")

    @property
    def mfcc_dim(self) -> int:
        return 39 if self.mfcc_variant == "gmm" else 40

    def group_dim(self, group: str) -> int:
        return {"MFCC": self.mfcc_dim, "A": 52, "E": 8, "C": 12, "S": 30, "V": 12}[group]

    @property
    def layout(self) -> tuple[tuple[str, int], ...]:
        return tuple((g, self.group_dim(g)) for g in self.groups)

    @property
    def total_dim(self) -> int:
        return sum(d for _, d in self.layout)

    @classmethod
    def from_name(cls, name: str, delta_window: int = 2, cmvn: bool = False) -> "FeatureConfig":
        name = name.upper()
        if name == "C1":
            return cls(("MFCC",), "gmm", delta_window, cmvn)
        if name == "C2":
            return cls(GROUP_ORDER, "nn", delta_window, cmvn)
        if name.startswith("C2-") and name[3:] in LLD_GROUPS:
            return cls(("MFCC", name[3:]), "nn", delta_window, cmvn)
        raise FeatureError(f"unknown feature preset {name!r}")


@dataclass
class FeatureMatrix:
    """Per-frame feature vectors with a named (group, dim) column layout."""

    layout: tuple[tuple[str, int], ...]
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise FeatureError("values must be a 2-D matrix")
        self.layout = tuple((str(g), int(d)) for g, d in self.layout)
        if sum(d for _, d in self.layout) != self.values.shape[1]:
            raise FeatureError(
                f"layout dims {self.layout} do not sum to {self.values.shape[1]} columns")
        if not np.all(np.isfinite(self.values)):
            raise FeatureError("feature values must be finite")

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def total_dim(self) -> int:
        return self.values.shape[1]

    def group_values(self, group: str) -> np.ndarray:
        start = 0
        for g, d in self.layout:
            if g == group:
                return self.values[:, start:start + d]
            start += d
        raise KeyError(group)


def assemble(config: FeatureConfig, group_matrices: dict[str, np.ndarray]) -> FeatureMatrix:
    """Concatenate the requested groups in canonical order.

    All groups must cover the same frame count. When config.cmvn is set,
    per-utterance mean/variance normalization is applied to the MFCC block
    only; the descriptor groups stay raw.
    """
    missing = [g for g in config.groups if g not in group_matrices]
    if missing:
        raise FeatureError(f"missing group matrices: {missing}")
    counts = {g: np.atleast_2d(group_matrices[g]).shape[0] for g in config.groups}
    if len(set(counts.values())) != 1:
        raise FeatureError(f"frame-count mismatch between groups: {counts}")
    blocks = []
    for g in config.groups:
        block = np.atleast_2d(np.asarray(group_matrices[g], dtype=np.float64))
        if block.shape[1] != config.group_dim(g):
            raise FeatureError(
                f"group {g} has {block.shape[1]} dims, expected {config.group_dim(g)}")
        if g == "MFCC" and config.cmvn:
            block = cmvn(block)
        blocks.append(block)
    return FeatureMatrix(config.layout, np.concatenate(blocks, axis=1))


def extract_features(buf: AudioBuffer, config: FeatureConfig,
                     spec: FrameSpec = FrameSpec()) -> FeatureMatrix:
    """Run the full per-utterance extraction chain for one configuration."""
    if buf.sample_rate_hz != CANONICAL_RATE_HZ:
        raise FeatureError(
            f"features assume {CANONICAL_RATE_HZ} Hz input, got {buf.sample_rate_hz}; resample first")
    sr = buf.sample_rate_hz
    frames = frame_and_window(buf, spec)
    pspec = power_spectrum(frames, spec.fft_size)
    weights26 = mel_filter_weights(N_MEL_BANDS, spec.fft_size, sr)
    logmel26 = log_mel(pspec, weights26)

    groups: dict[str, np.ndarray] = {}
    if config.mfcc_variant == "gmm":
        groups["MFCC"] = add_deltas(mfcc(logmel26, 13), config.delta_window, order=2)
    else:
        weights40 = mel_filter_weights(_NN_BANDS, spec.fft_size, sr)
        groups["MFCC"] = mfcc(log_mel(pspec, weights40), _NN_BANDS)

    if set(config.groups) & {"A", "E"}:
        rasta_out = rasta_filter(logmel26)
        if "A" in config.groups:
            groups["A"] = add_deltas(rasta_out, config.delta_window)
        if "E" in config.groups:
            groups["E"] = energy_group(logmel26, rasta_out, frames, config.delta_window)
    if "C" in config.groups:
        groups["C"] = chroma(pspec, sr)
    if "S" in config.groups:
        fbank = filterbank_energies(pspec, weights26)
        groups["S"] = spectral_group(frames, pspec, fbank, sr, config.delta_window)
    if "V" in config.groups:
        groups["V"] = voicing_group(buf, spec, config.delta_window)

    return assemble(config, groups)

"""Mel filterbank energies, cepstra, deltas and per-utterance normalization."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

LOG_FLOOR_VALUE = 1e-10
LOG_FLOOR = float(np.log(LOG_FLOOR_VALUE))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def mel_filter_weights(n_filters: int, fft_size: int, sample_rate_hz: int,
                       f_lo: float = 0.0, f_hi: float | None = None) -> np.ndarray:
    """Triangular filters equally spaced on the mel scale, shape (n_filters, bins).

    Triangles are evaluated at exact bin frequencies (no edge quantization),
    so each filter's support can be recomputed directly from the mel formula.
    """
    if f_hi is None:
        f_hi = sample_rate_hz / 2.0
    edges = mel_to_hz(np.linspace(hz_to_mel(f_lo), hz_to_mel(f_hi), n_filters + 2))
    bin_freqs = np.arange(fft_size // 2 + 1) * sample_rate_hz / fft_size
    weights = np.zeros((n_filters, bin_freqs.size))
    for j in range(n_filters):
        lo, mid, hi = edges[j], edges[j + 1], edges[j + 2]
        up = (bin_freqs - lo) / (mid - lo)
        down = (hi - bin_freqs) / (hi - mid)
        weights[j] = np.maximum(0.0, np.minimum(up, down))
    weights.setflags(write=False)
    return weights


def filterbank_energies(power_spec: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Linear-domain band energies (n_frames, n_filters)."""
    return np.atleast_2d(power_spec) @ weights.T


def log_mel(power_spec: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Log band energies floored at log(1e-10)."""
    return np.log(np.maximum(filterbank_energies(power_spec, weights), LOG_FLOOR_VALUE))


@lru_cache(maxsize=8)
def _dct_matrix(n: int) -> np.ndarray:
    # Orthonormal DCT-II: row 0 scaled by 1/sqrt(2); constant input v maps to
    # c0 = v * sqrt(n), higher coefficients exactly zero.
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    mat = np.sqrt(2.0 / n) * np.cos(np.pi * k * (2 * m + 1) / (2 * n))
    mat[0] /= np.sqrt(2.0)
    mat.setflags(write=False)
    return mat


def mfcc(log_mel_energies: np.ndarray, n_ceps: int) -> np.ndarray:
    """DCT-II cepstra of log-mel energies, keeping the first n_ceps (c0 included)."""
    log_mel_energies = np.atleast_2d(log_mel_energies)
    n_bands = log_mel_energies.shape[1]
    if n_ceps > n_bands:
        raise ValueError(f"n_ceps {n_ceps} exceeds {n_bands} mel bands")
    return log_mel_energies @ _dct_matrix(n_bands)[:n_ceps].T


def deltas(values: np.ndarray, window: int = 2) -> np.ndarray:
    """Regression deltas with edge replication; deltas of a constant are 0."""
    values = np.atleast_2d(values)
    if values.shape[0] < 1:
        raise ValueError("need at least one frame")
    padded = np.concatenate([
        np.repeat(values[:1], window, axis=0),
        values,
        np.repeat(values[-1:], window, axis=0),
    ])
    num = np.zeros_like(values)
    for n in range(1, window + 1):
        num += n * (padded[window + n:window + n + values.shape[0]]
                    - padded[window - n:window - n + values.shape[0]])
    return num / (2.0 * sum(n * n for n in range(1, window + 1)))


def add_deltas(values: np.ndarray, window: int = 2, order: int = 1) -> np.ndarray:
    """Append delta (and higher-order delta) columns to a feature block."""
    blocks = [values]
    for _ in range(order):
        blocks.append(deltas(blocks[-1], window))
    return np.concatenate(blocks, axis=1)


def cmvn(values: np.ndarray) -> np.ndarray:
    """Per-utterance mean/variance normalization (columnwise)."""
    mean = values.mean(axis=0)
    std = np.maximum(values.std(axis=0), 1e-8)
    return (values - mean) / std

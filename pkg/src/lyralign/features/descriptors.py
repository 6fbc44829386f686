"""Frame-level descriptor groups: energy, chroma, and the spectral shape set.

The spectral group layout (15 values per frame, before deltas) is:

    [energy 250-650 Hz, energy 1-4 kHz,
     rolloff 25%, rolloff 50%, rolloff 75%, rolloff 90%,
     flux, centroid, entropy, variance, skewness, kurtosis,
     slope, sharpness, harmonicity]

Band energies are normalized by total frame energy; rolloffs are reported in
Hz; moments treat the normalized power spectrum as a distribution over bin
frequencies. Silent frames yield all zeros (rolloffs included).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .mel import add_deltas
from .voicing import F0_MAX_HZ, F0_MIN_HZ, _next_pow2

_EPS = 1e-12

SPECTRAL_NAMES = (
    "energy_250_650", "energy_1k_4k",
    "rolloff_25", "rolloff_50", "rolloff_75", "rolloff_90",
    "flux", "centroid", "entropy", "variance", "skewness", "kurtosis",
    "slope", "sharpness", "harmonicity",
)


# ---------------------------------------------------------------- energy ---

def zero_crossing_rate(frames: np.ndarray) -> np.ndarray:
    """Fraction of adjacent sample pairs that change sign, in [0, 1]."""
    sb = np.signbit(np.atleast_2d(frames))
    return (sb[:, 1:] != sb[:, :-1]).mean(axis=1)


def energy_group(log_mel_traj: np.ndarray, rasta_traj: np.ndarray,
                 frames: np.ndarray, delta_window: int = 2) -> np.ndarray:
    """[loudness, RASTA band sum, frame RMS, zero-crossing rate] + deltas."""
    loudness = np.exp(log_mel_traj).sum(axis=1)
    rasta_sum = rasta_traj.sum(axis=1)
    rms = np.sqrt((frames ** 2).mean(axis=1))
    zcr = zero_crossing_rate(frames)
    return add_deltas(np.stack([loudness, rasta_sum, rms, zcr], axis=1), delta_window)


# ---------------------------------------------------------------- chroma ---

@lru_cache(maxsize=8)
def _chroma_map(fft_size: int, sample_rate_hz: int) -> np.ndarray:
    # Pitch classes with C=0 so A=9; bin folded by round(12*log2(f/440)) + 9.
    freqs = np.arange(fft_size // 2 + 1) * sample_rate_hz / fft_size
    mapping = np.zeros((12, freqs.size))
    for k, f in enumerate(freqs):
        if f > 55.0:
            cls = int(np.round(12.0 * np.log2(f / 440.0)) + 9) % 12
            mapping[cls, k] = 1.0
    mapping.setflags(write=False)
    return mapping


def chroma(power_spec: np.ndarray, sample_rate_hz: int = 16000) -> np.ndarray:
    """12-d pitch-class intensities, L1-normalized; silence stays all-zero."""
    power_spec = np.atleast_2d(power_spec)
    fft_size = (power_spec.shape[1] - 1) * 2
    out = power_spec @ _chroma_map(fft_size, sample_rate_hz).T
    totals = out.sum(axis=1, keepdims=True)
    return np.divide(out, totals, out=np.zeros_like(out), where=totals > _EPS)


# -------------------------------------------------------------- spectral ---

def spectral_entropy(power_spec: np.ndarray) -> float:
    """Shannon entropy (nats) of the normalized spectrum; 0 for single-bin/silence."""
    total = power_spec.sum()
    if total < _EPS:
        return 0.0
    p = power_spec / total
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def spectral_rolloff(power_spec: np.ndarray, freqs: np.ndarray, fraction: float) -> float:
    """Lowest bin frequency at which cumulative energy reaches the fraction."""
    total = power_spec.sum()
    if total < _EPS:
        return 0.0
    k = int(np.searchsorted(np.cumsum(power_spec), fraction * total))
    return float(freqs[min(k, freqs.size - 1)])


def spectral_moments(power_spec: np.ndarray, freqs: np.ndarray) -> tuple[float, float, float, float]:
    """(centroid, variance, skewness, kurtosis) of power over bin frequency."""
    total = power_spec.sum()
    if total < _EPS:
        return 0.0, 0.0, 0.0, 0.0
    p = power_spec / total
    centroid = float(p @ freqs)
    dev = freqs - centroid
    variance = float(p @ dev ** 2)
    if variance < _EPS:
        return centroid, 0.0, 0.0, 0.0
    skew = float(p @ dev ** 3 / variance ** 1.5)
    kurt = float(p @ dev ** 4 / variance ** 2)
    return centroid, variance, skew, kurt


def spectral_slope(power_spec: np.ndarray, freqs: np.ndarray) -> float:
    """Least-squares slope of normalized power against Hz."""
    total = power_spec.sum()
    if total < _EPS:
        return 0.0
    p = power_spec / total
    df = freqs - freqs.mean()
    return float(df @ (p - p.mean()) / (df @ df))


def spectral_flux(prev_power: np.ndarray, cur_power: np.ndarray) -> float:
    """Squared distance between unit-energy magnitude spectra; 0 if either is silent."""
    a = np.sqrt(prev_power)
    b = np.sqrt(cur_power)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < _EPS or nb < _EPS:
        return 0.0
    return float(((a / na - b / nb) ** 2).sum())


def zwicker_sharpness(band_energies: np.ndarray) -> float:
    """Loudness centroid over the 26 bands with the high-band Zwicker weighting."""
    total = band_energies.sum()
    if total < _EPS:
        return 0.0
    z = np.arange(1, band_energies.size + 1, dtype=np.float64)
    g = np.where(z <= 14.0, 1.0, np.exp(0.171 * (z - 14.0)))
    return float((g * z) @ band_energies / total)


def harmonicity(frame: np.ndarray, sample_rate_hz: int) -> float:
    """Max normalized autocorrelation of the frame in the 55-880 Hz lag range."""
    n = frame.size
    nfft = _next_pow2(2 * n)
    acf = np.fft.irfft(np.abs(np.fft.rfft(frame, nfft)) ** 2, nfft)
    if acf[0] < _EPS:
        return 0.0
    lag_lo = int(np.ceil(sample_rate_hz / F0_MAX_HZ))
    lag_hi = min(int(np.floor(sample_rate_hz / F0_MIN_HZ)), n - 1)
    if lag_lo >= lag_hi:
        return 0.0
    return float(np.clip(acf[lag_lo:lag_hi + 1].max() / acf[0], 0.0, 1.0))


def spectral_group(frames: np.ndarray, power_specs: np.ndarray,
                   band_energies: np.ndarray, sample_rate_hz: int = 16000,
                   delta_window: int = 2) -> np.ndarray:
    """The 15 spectral descriptors per frame plus deltas: (frames, 30)."""
    power_specs = np.atleast_2d(power_specs)
    n_frames, n_bins = power_specs.shape
    freqs = np.arange(n_bins) * sample_rate_hz / ((n_bins - 1) * 2)
    low_band = (freqs >= 250.0) & (freqs <= 650.0)
    mid_band = (freqs >= 1000.0) & (freqs <= 4000.0)
    rows = np.zeros((n_frames, 15))
    for t in range(n_frames):
        p = power_specs[t]
        total = p.sum()
        if total < _EPS:
            continue
        centroid, variance, skew, kurt = spectral_moments(p, freqs)
        rows[t] = [
            p[low_band].sum() / total,
            p[mid_band].sum() / total,
            spectral_rolloff(p, freqs, 0.25),
            spectral_rolloff(p, freqs, 0.50),
            spectral_rolloff(p, freqs, 0.75),
            spectral_rolloff(p, freqs, 0.90),
            spectral_flux(power_specs[t - 1], p) if t > 0 else 0.0,
            centroid, spectral_entropy(p), variance, skew, kurt,
            spectral_slope(p, freqs),
            zwicker_sharpness(band_energies[t]),
            harmonicity(frames[t], sample_rate_hz),
        ]
    return add_deltas(rows, delta_window)

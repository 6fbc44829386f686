"""Voice-quality descriptors: F0, voicing strength, jitter, shimmer, log HNR.

These are computed over a 50 ms analysis window centered on each 10 ms hop
(the 25 ms spectral window cannot hold two periods of a 55 Hz fundamental),
so the frame count matches every other feature group.

F0 comes from the peak of the unbiased normalized autocorrelation in the
55-880 Hz lag range. The ACF is evaluated on a 4x oversampled lag grid
(trigonometric interpolation of the Wiener-Khinchin ACF) and refined with a
parabolic fit, which gives sub-sample period precision and lets a clean tone
reach the HNR ceiling instead of being capped by lag quantization.
"""

from __future__ import annotations

import numpy as np

from ..audio import AudioBuffer
from .framing import FrameSpec
from .mel import add_deltas

F0_MIN_HZ = 55.0
F0_MAX_HZ = 880.0
VOICING_THRESHOLD = 0.45
HNR_FLOOR_DB = -20.0
HNR_CEIL_DB = 40.0
VOICING_WINDOW_MS = 50.0
_OVERSAMPLE = 4
_SILENCE_POWER = 1e-12
# Small per-octave penalty so the fundamental beats its own period multiples,
# whose unbiased-ACF peaks tie with the true one on clean periodic signals.
_OCTAVE_COST = 0.02


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def oversampled_acf(x: np.ndarray, oversample: int = _OVERSAMPLE) -> tuple[np.ndarray, int]:
    """Linear autocorrelation of x on a lag grid of 1/oversample samples.

    Returns (acf, oversample); acf[m] ~ r(m / oversample), raw (biased) sums.
    """
    n = x.size
    nfft = _next_pow2(2 * n)
    spec = np.abs(np.fft.rfft(x, nfft)) ** 2
    acf = np.fft.irfft(spec, nfft * oversample) * oversample
    return acf[:(n - 1) * oversample + 1], oversample


def _parabolic_refine(y: np.ndarray, k: int) -> tuple[float, float]:
    """Refine a local maximum of y at index k; returns (offset, value)."""
    if k <= 0 or k >= y.size - 1:
        return 0.0, float(y[k])
    denom = y[k - 1] - 2.0 * y[k] + y[k + 1]
    if denom >= 0.0:
        return 0.0, float(y[k])
    offset = 0.5 * (y[k - 1] - y[k + 1]) / denom
    value = y[k] - 0.25 * (y[k - 1] - y[k + 1]) * offset
    return float(offset), float(value)


def acf_peak(x: np.ndarray, sample_rate_hz: int,
             f_min: float = F0_MIN_HZ, f_max: float = F0_MAX_HZ) -> tuple[float, float]:
    """Strongest unbiased-normalized ACF peak in the [f_min, f_max] lag range.

    Returns (lag_samples, peak_ratio); (0, 0) when the window is silent or no
    admissible lag exists. peak_ratio is clamped to [0, 1].
    """
    n = x.size
    acf, os = oversampled_acf(x)
    r0 = acf[0] / n
    if r0 < _SILENCE_POWER:
        return 0.0, 0.0
    lag_lo = int(np.ceil(sample_rate_hz / f_max * os))
    lag_hi = int(np.floor(sample_rate_hz / f_min * os))
    lag_hi = min(lag_hi, acf.size - 2)
    if lag_lo >= lag_hi:
        return 0.0, 0.0
    lags = np.arange(lag_lo, lag_hi + 1)
    norm = acf[lag_lo:lag_hi + 1] * n / ((n - lags / os) * acf[0])
    interior = (norm[1:-1] > norm[:-2]) & (norm[1:-1] >= norm[2:])
    candidates = np.nonzero(interior)[0] + 1
    candidates = np.union1d(candidates, [int(np.argmax(norm))])
    scores = norm[candidates] - _OCTAVE_COST * np.log2((lag_lo + candidates) / lag_lo)
    k = int(candidates[np.argmax(scores)])
    offset, value = _parabolic_refine(norm, k)
    lag = (lag_lo + k + offset) / os
    return float(lag), float(min(max(value, 0.0), 1.0))


def _mark_periods(x: np.ndarray, period: float) -> tuple[np.ndarray, np.ndarray]:
    """Successive waveform peaks roughly one period apart: (positions, amplitudes)."""
    n = x.size
    first_hi = min(n, int(np.ceil(period)) + 1)
    positions, amplitudes = [], []
    k = int(np.argmax(x[:first_hi]))
    while True:
        off, amp = _parabolic_refine(x, k)
        positions.append(k + off)
        amplitudes.append(amp)
        lo = int(np.floor(positions[-1] + 0.8 * period))
        hi = min(n, int(np.ceil(positions[-1] + 1.25 * period)) + 1)
        if lo >= hi or lo >= n:
            break
        k = lo + int(np.argmax(x[lo:hi]))
    return np.array(positions), np.array(amplitudes)


def _voicing_measures(window: np.ndarray, sample_rate_hz: int,
                      f_min: float, f_max: float) -> np.ndarray:
    x = window - window.mean()
    lag, strength = acf_peak(x, sample_rate_hz, f_min, f_max)
    if lag == 0.0 and strength == 0.0:
        return np.array([0.0, 0.0, 0.0, 0.0, 0.0, HNR_FLOOR_DB])
    voiced = strength >= VOICING_THRESHOLD
    f0 = sample_rate_hz / lag if voiced else 0.0
    jitter_local = jitter_delta = shimmer = 0.0
    hnr = HNR_FLOOR_DB
    if voiced:
        if strength >= 1.0 - 1e-12:
            hnr = HNR_CEIL_DB
        else:
            hnr = float(np.clip(10.0 * np.log10(strength / (1.0 - strength)),
                                HNR_FLOOR_DB, HNR_CEIL_DB))
        marks, amps = _mark_periods(x, lag)
        periods = np.diff(marks)
        if periods.size >= 3:
            mean_t = periods.mean()
            jitter_local = float(np.mean(np.abs(np.diff(periods))) / mean_t)
            jitter_delta = float(np.mean(np.abs(np.diff(periods, n=2))) / mean_t)
        if amps.size >= 3:
            mean_a = max(float(np.mean(np.abs(amps))), 1e-12)
            shimmer = float(np.mean(np.abs(np.diff(amps))) / mean_a)
    return np.array([f0, strength, jitter_local, jitter_delta, shimmer, hnr])


def voicing_group(buf: AudioBuffer, spec: FrameSpec = FrameSpec(), delta_window: int = 2,
                  f_min: float = F0_MIN_HZ, f_max: float = F0_MAX_HZ) -> np.ndarray:
    """Per-frame [F0, voicing, jitter local, jitter delta, shimmer, log HNR] + deltas.

    Unvoiced and silent frames report zeros with log HNR at the -20 dB floor.
    """
    sr = buf.sample_rate_hz
    n_frames = spec.frame_count(len(buf), sr)
    if n_frames == 0:
        raise ValueError("buffer shorter than one analysis window")
    half = int(round(VOICING_WINDOW_MS * sr / 1000.0)) // 2
    hop = spec.hop_samples(sr)
    center0 = spec.window_samples(sr) // 2
    padded = np.concatenate([np.zeros(half), buf.samples, np.zeros(half)])
    rows = np.empty((n_frames, 6))
    for t in range(n_frames):
        center = center0 + t * hop + half
        rows[t] = _voicing_measures(padded[center - half:center + half], sr, f_min, f_max)
    return add_deltas(rows, delta_window)

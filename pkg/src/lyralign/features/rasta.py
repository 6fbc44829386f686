"""Band-pass filtering of log band-energy trajectories (RASTA-style).

Each band of the log-mel trajectory is passed through the band-pass IIR

    H(z) = 0.1 * (2 + z^-1 - z^-3 - 2 z^-4) / (1 - 0.98 z^-1)

which suppresses modulation rates atypical of a sung/spoken articulation
rate, including DC, so stationary spectral background (accompaniment,
channel) is attenuated. The filter needs a 4-frame history: the delay line
is charged over the first 4 frames with the recursive part disengaged and
those startup outputs are emitted as 0, so a constant trajectory maps to
exactly 0 after frame 4 instead of a slowly decaying transient.
"""

from __future__ import annotations

import numpy as np

from .mel import add_deltas

RASTA_POLE = 0.98
_FIR = (0.2, 0.1, 0.0, -0.1, -0.2)  # 0.1 * (2 + z^-1 - z^-3 - 2 z^-4)
_WARMUP = 4


def rasta_filter(trajectory: np.ndarray) -> np.ndarray:
    """Filter each column of a (frames, bands) trajectory; causal, zero warmup."""
    x = np.atleast_2d(np.asarray(trajectory, dtype=np.float64))
    n = x.shape[0]
    u = np.zeros_like(x)
    for k, c in enumerate(_FIR):
        if c != 0.0 and k < n:
            u[k:] += c * x[:n - k]
    y = np.zeros_like(x)
    for t in range(_WARMUP, n):
        y[t] = RASTA_POLE * y[t - 1] + u[t]
    return y


def rasta_frequency_response(mod_freq_hz: float, frame_rate_hz: float = 100.0) -> float:
    """|H| at a modulation frequency, from the transfer function directly."""
    w = 2.0 * np.pi * mod_freq_hz / frame_rate_hz
    z = np.exp(1j * w)
    num = 0.1 * (2.0 + z ** -1 - z ** -3 - 2.0 * z ** -4)
    den = 1.0 - RASTA_POLE * z ** -1
    return float(np.abs(num / den))


def auditory_group(log_mel_trajectory: np.ndarray, delta_window: int = 2) -> np.ndarray:
    """RASTA-filtered auditory spectrum plus deltas: (frames, 2 * bands)."""
    return add_deltas(rasta_filter(log_mel_trajectory), delta_window)

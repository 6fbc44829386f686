"""Short-time framing, windowing and power spectra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..audio import AudioBuffer


class FramingError(ValueError):
    pass


@dataclass(frozen=True)
class FrameSpec:
    """Analysis frame geometry: 25 ms Hamming windows every 10 ms, 512-point FFT."""

    window_ms: float = 25.0
    hop_ms: float = 10.0
    window_fn: str = "hamming"
    fft_size: int = 512

    def __post_init__(self):
        if self.hop_ms > self.window_ms:
            raise FramingError("hop_ms must not exceed window_ms")
        if self.window_fn != "hamming":
            raise FramingError(f"unsupported window function {self.window_fn!r}")
        if self.fft_size < 1 or self.fft_size & (self.fft_size - 1):
            raise FramingError("fft_size must be a power of two")

    def window_samples(self, sample_rate_hz: int) -> int:
        return int(round(self.window_ms * sample_rate_hz / 1000.0))

    def hop_samples(self, sample_rate_hz: int) -> int:
        return int(round(self.hop_ms * sample_rate_hz / 1000.0))

    def frame_count(self, n_samples: int, sample_rate_hz: int) -> int:
        win = self.window_samples(sample_rate_hz)
        hop = self.hop_samples(sample_rate_hz)
        if n_samples < win:
            return 0
        return 1 + (n_samples - win) // hop


def frame_and_window(buf: AudioBuffer, spec: FrameSpec = FrameSpec()) -> np.ndarray:
    """Slice a buffer into Hamming-windowed frames, shape (n_frames, window).

    The trailing partial window is dropped. Raises FramingError when the
    buffer is shorter than one window.
    """
    win = spec.window_samples(buf.sample_rate_hz)
    hop = spec.hop_samples(buf.sample_rate_hz)
    if spec.fft_size < win:
        raise FramingError(f"fft_size {spec.fft_size} < window of {win} samples")
    n = spec.frame_count(len(buf), buf.sample_rate_hz)
    if n == 0:
        raise FramingError(f"buffer of {len(buf)} samples shorter than one {win}-sample window")
    starts = np.arange(n) * hop
    frames = buf.samples[starts[:, None] + np.arange(win)[None, :]]
    return frames * np.hamming(win)


def power_spectrum(frames: np.ndarray, fft_size: int = 512) -> np.ndarray:
    """|FFT|^2 of windowed frames, shape (n_frames, fft_size//2 + 1)."""
    frames = np.atleast_2d(frames)
    if fft_size < frames.shape[1]:
        raise FramingError("fft_size smaller than frame length")
    spec = np.fft.rfft(frames, n=fft_size)
    return (spec.real ** 2 + spec.imag ** 2)

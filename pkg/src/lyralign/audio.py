"""WAV decoding, canonical mono buffers, resampling, and speed perturbation.

All audio enters the toolkit here: 16-bit PCM RIFF/WAVE bytes become float
mono buffers, which are then resampled to the canonical 16 kHz rate that
every downstream stage assumes (the analysis bands top out at 8 kHz).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

CANONICAL_RATE_HZ = 16000
SUPPORTED_RATES = (8000, 16000, 22050, 44100, 48000)

# Half-width of the windowed-sinc interpolation kernel, in input samples.
# Wide enough that a pure tone below 0.4x Nyquist of either rate keeps its
# RMS within 5% through a resample; plain linear interpolation loses ~10%
# there, which is why it is not used.
_KERNEL_HALF = 16


class AudioError(ValueError):
    """Base class for audio decoding/processing failures."""


class MalformedWavError(AudioError):
    """Byte stream is not a readable RIFF/WAVE container."""


class UnsupportedWavError(AudioError):
    """Valid container, but a codec or channel layout this toolkit does not read."""


class EmptyAudioError(AudioError):
    """WAV decoded successfully but carries no samples."""


class UnsupportedRateError(AudioError):
    """Requested sample rate outside SUPPORTED_RATES."""


@dataclass(frozen=True)
class AudioBuffer:
    """Immutable mono PCM buffer: float64 samples in [-1, 1] plus sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioError(f"expected mono 1-D samples, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise AudioError("samples must be finite")
        if samples.size and (samples.min() < -1.0 or samples.max() > 1.0):
            raise AudioError("samples must lie in [-1.0, 1.0]")
        if not isinstance(self.sample_rate_hz, int) or self.sample_rate_hz <= 0:
            raise AudioError(f"sample_rate_hz must be a positive int, got {self.sample_rate_hz!r}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_sec(self) -> float:
        return self.samples.size / self.sample_rate_hz


def decode_wav(data: bytes) -> AudioBuffer:
    """Decode 16-bit PCM WAV bytes to a mono AudioBuffer.

    Stereo input is downmixed by channel average; integer samples are scaled
    by 1/32768. The sample rate is kept as found in the file; callers resample
    to the canonical rate separately.
    """
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedWavError("not a RIFF/WAVE stream")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + chunk_size]
        if len(body) < chunk_size:
            raise MalformedWavError(f"truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise MalformedWavError("fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            payload = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None or payload is None:
        raise MalformedWavError("missing fmt or data chunk")

    audio_format, channels, rate, _byte_rate, _block_align, bits = fmt
    if audio_format != 1 or bits != 16:
        raise UnsupportedWavError(f"only 16-bit PCM supported (format={audio_format}, bits={bits})")
    if channels not in (1, 2):
        raise UnsupportedWavError(f"only mono/stereo supported, got {channels} channels")
    if rate <= 0:
        raise MalformedWavError(f"invalid sample rate {rate}")
    if len(payload) == 0:
        raise EmptyAudioError("zero-length data payload")
    if len(payload) % (2 * channels) != 0:
        raise MalformedWavError("data chunk is not a whole number of frames")

    ints = np.frombuffer(payload, dtype="<i2").astype(np.float64)
    if channels == 2:
        ints = ints.reshape(-1, 2).mean(axis=1)
    return AudioBuffer(ints / 32768.0, rate)


def encode_wav(buf: AudioBuffer) -> bytes:
    """Encode a buffer as mono 16-bit PCM WAV bytes (round to nearest LSB)."""
    ints = np.clip(np.rint(buf.samples * 32768.0), -32768, 32767).astype("<i2")
    payload = ints.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, 1, 1, buf.sample_rate_hz,
        buf.sample_rate_hz * 2, 2, 16,
        b"data", len(payload),
    )
    return header + payload


def read_wav(path) -> AudioBuffer:
    with open(path, "rb") as fh:
        return decode_wav(fh.read())


def write_wav(path, buf: AudioBuffer) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_wav(buf))


def _sinc_interpolate(x: np.ndarray, positions: np.ndarray, cutoff: float) -> np.ndarray:
    """Evaluate x at fractional sample positions with a Hann-windowed sinc.

    cutoff is the low-pass cutoff relative to the input Nyquist (1.0 = none);
    kernel weights are renormalized per output sample so constants pass
    through exactly. Edge samples are replicated.
    """
    base = np.floor(positions).astype(np.int64)
    frac = positions - base
    offsets = np.arange(-_KERNEL_HALF + 1, _KERNEL_HALF + 1)
    idx = np.clip(base[:, None] + offsets[None, :], 0, len(x) - 1)
    t = offsets[None, :] - frac[:, None]
    kernel = cutoff * np.sinc(cutoff * t) * (0.5 + 0.5 * np.cos(np.pi * t / _KERNEL_HALF))
    kernel /= kernel.sum(axis=1, keepdims=True)
    return np.clip((x[idx] * kernel).sum(axis=1), -1.0, 1.0)


def resample(buf: AudioBuffer, target_hz: int) -> AudioBuffer:
    """Resample to target_hz; output length = round(len * target/source)."""
    if target_hz not in SUPPORTED_RATES:
        raise UnsupportedRateError(f"target rate {target_hz} not in {SUPPORTED_RATES}")
    if target_hz == buf.sample_rate_hz:
        return buf
    out_len = int(round(len(buf) * target_hz / buf.sample_rate_hz))
    step = buf.sample_rate_hz / target_hz
    positions = np.arange(out_len) * step
    out = _sinc_interpolate(buf.samples, positions, cutoff=min(1.0, 1.0 / step))
    return AudioBuffer(out, target_hz)


def speed_perturb(buf: AudioBuffer, factor: float) -> AudioBuffer:
    """Change tempo (and pitch) by resampling: duration becomes duration/factor.

    factor 1.0 is the identity; the recipe values are 0.9, 1.0 and 1.1 but any
    positive factor is accepted.
    """
    if not factor > 0:
        raise AudioError(f"speed factor must be positive, got {factor}")
    if factor == 1.0:
        return buf
    out_len = int(round(len(buf) / factor))
    positions = np.arange(out_len) * factor
    out = _sinc_interpolate(buf.samples, positions, cutoff=min(1.0, 1.0 / factor))
    return AudioBuffer(out, buf.sample_rate_hz)

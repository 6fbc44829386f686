import io
import wave

import numpy as np
import pytest


def tone(freq_hz, duration_sec=1.0, sample_rate=16000, amplitude=0.6, phase=0.0):
    t = np.arange(int(round(duration_sec * sample_rate))) / sample_rate
    return amplitude * np.sin(2 * np.pi * freq_hz * t + phase)


def stdlib_wav_bytes(samples, sample_rate, channels=1):
    """Independent WAV writer (stdlib wave module) used as a decode oracle."""
    ints = np.clip(np.rint(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")
    bio = io.BytesIO()
    with wave.open(bio, "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(ints.tobytes())
    return bio.getvalue()


def dft_peak_hz(samples, sample_rate):
    """Dominant frequency by direct DFT magnitude (oracle)."""
    spectrum = np.abs(np.fft.rfft(samples))
    spectrum[0] = 0.0
    return np.argmax(spectrum) * sample_rate / len(samples)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

import numpy as np
import pytest

from lyralign.audio import (
    AudioBuffer,
    AudioError,
    EmptyAudioError,
    MalformedWavError,
    UnsupportedRateError,
    UnsupportedWavError,
    decode_wav,
    encode_wav,
    resample,
    speed_perturb,
)

from conftest import dft_peak_hz, stdlib_wav_bytes, tone


class TestDecodeWav:
    def test_mono_full_scale(self):
        data = stdlib_wav_bytes(np.ones(160), 16000)
        buf = decode_wav(data)
        assert buf.sample_rate_hz == 16000
        assert len(buf) == 160
        assert np.allclose(buf.samples, 32767 / 32768)

    def test_stereo_downmix_symmetry(self):
        left = np.full(100, 0.5)
        right = np.full(100, -0.5)
        interleaved = np.stack([left, right], axis=1).ravel()
        buf = decode_wav(stdlib_wav_bytes(interleaved, 16000, channels=2))
        assert np.allclose(buf.samples, 0.0)

    def test_441k_stereo_fixture_keeps_rate(self, rng):
        samples = rng.uniform(-0.5, 0.5, 2000)
        buf = decode_wav(stdlib_wav_bytes(samples, 44100, channels=2))
        assert buf.sample_rate_hz == 44100
        assert len(buf) == 1000

    def test_malformed_header(self):
        with pytest.raises(MalformedWavError):
            decode_wav(b"NOT A WAV FILE AT ALL....")

    def test_unsupported_codec(self):
        data = bytearray(stdlib_wav_bytes(np.zeros(10), 16000))
        data[20] = 3  # format tag -> IEEE float
        with pytest.raises(UnsupportedWavError):
            decode_wav(bytes(data))

    def test_empty_payload(self):
        with pytest.raises(EmptyAudioError):
            decode_wav(stdlib_wav_bytes(np.zeros(0), 16000))

    def test_decode_matches_stdlib_reader(self, rng):
        samples = rng.uniform(-0.9, 0.9, 1234)
        data = stdlib_wav_bytes(samples, 22050)
        buf = decode_wav(data)
        expected = np.clip(np.rint(samples * 32768), -32768, 32767) / 32768.0
        assert np.array_equal(buf.samples, expected)


class TestEncodeWav:
    def test_roundtrip_within_one_lsb(self, rng):
        samples = rng.uniform(-1.0, 1.0, 5000)
        buf = AudioBuffer(samples, 16000)
        back = decode_wav(encode_wav(buf))
        assert back.sample_rate_hz == 16000
        assert np.abs(back.samples - samples).max() <= 1.0 / 32768

    def test_roundtrip_exact_on_quantized(self, rng):
        quantized = np.rint(rng.uniform(-1, 1, 400) * 20000) / 32768.0
        buf = AudioBuffer(quantized, 8000)
        assert np.array_equal(decode_wav(encode_wav(buf)).samples, quantized)


class TestResample:
    def test_identity_same_rate(self, rng):
        buf = AudioBuffer(rng.uniform(-1, 1, 777), 16000)
        out = resample(buf, 16000)
        assert out.sample_rate_hz == 16000
        assert np.array_equal(out.samples, buf.samples)

    def test_constant_upsample(self):
        buf = AudioBuffer(np.full(4000, 0.25), 8000)
        out = resample(buf, 16000)
        assert len(out) == 8000
        assert np.allclose(out.samples, 0.25, atol=1e-12)

    def test_output_length_rule(self):
        buf = AudioBuffer(np.zeros(44100), 44100)
        assert len(resample(buf, 16000)) == round(44100 * 16000 / 44100)
        buf = AudioBuffer(np.zeros(10001), 22050)
        assert len(resample(buf, 16000)) == round(10001 * 16000 / 22050)

    def test_tone_frequency_preserved(self):
        buf = AudioBuffer(tone(1000, 0.5, 48000), 48000)
        out = resample(buf, 16000)
        peak = dft_peak_hz(out.samples, 16000)
        bin_width = 16000 / len(out)
        assert abs(peak - 1000) <= bin_width

    def test_unsupported_rate(self):
        with pytest.raises(UnsupportedRateError):
            resample(AudioBuffer(np.zeros(100), 16000), 11025)

    @pytest.mark.parametrize("src,tgt", [(8000, 16000), (16000, 8000), (16000, 22050),
                                         (44100, 16000), (48000, 16000), (16000, 48000)])
    def test_rms_preserved_below_04_nyquist(self, src, tgt):
        freq = 0.39 * 0.5 * min(src, tgt)
        x = tone(freq, 0.5, src, amplitude=0.8)
        out = resample(AudioBuffer(x, src), tgt)
        lo_in, hi_in = len(x) // 10, -(len(x) // 10)
        lo_out, hi_out = len(out) // 10, -(len(out) // 10)
        rms_in = np.sqrt(np.mean(x[lo_in:hi_in] ** 2))
        rms_out = np.sqrt(np.mean(out.samples[lo_out:hi_out] ** 2))
        assert abs(rms_out - rms_in) / rms_in < 0.05


class TestSpeedPerturb:
    def test_identity(self, rng):
        buf = AudioBuffer(rng.uniform(-1, 1, 500), 16000)
        out = speed_perturb(buf, 1.0)
        assert np.array_equal(out.samples, buf.samples)

    def test_duration_stretch(self):
        buf = AudioBuffer(np.zeros(16000), 16000)
        out = speed_perturb(buf, 0.9)
        assert abs(len(out) - 16000 / 0.9) <= 1

    def test_pitch_shift_by_dft(self):
        buf = AudioBuffer(tone(440, 1.0, 16000), 16000)
        out = speed_perturb(buf, 1.1)
        bin_width = 16000 / len(out)
        assert abs(dft_peak_hz(out.samples, 16000) - 484) <= bin_width

    def test_invalid_factor(self):
        with pytest.raises(AudioError):
            speed_perturb(AudioBuffer(np.zeros(10), 16000), 0.0)

    @pytest.mark.parametrize("factor", [0.9, 1.1])
    def test_round_trip_duration(self, factor, rng):
        buf = AudioBuffer(rng.uniform(-0.5, 0.5, 12345), 16000)
        back = speed_perturb(speed_perturb(buf, factor), 1.0 / factor)
        assert abs(len(back) - len(buf)) <= 2


class TestAudioBuffer:
    def test_rejects_out_of_range(self):
        with pytest.raises(AudioError):
            AudioBuffer(np.array([0.0, 1.5]), 16000)

    def test_rejects_nonfinite(self):
        with pytest.raises(AudioError):
            AudioBuffer(np.array([0.0, np.nan]), 16000)

    def test_immutable(self):
        buf = AudioBuffer(np.zeros(4), 16000)
        with pytest.raises(ValueError):
            buf.samples[0] = 1.0

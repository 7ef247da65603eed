import logging
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phrasematch.audio import (
    ACTIVITY_GATE_DBFS,
    HOP_SAMPLES,
    LOG_FLOOR,
    SAMPLE_RATE,
    WINDOW_SAMPLES,
    AudioClip,
    compute_log_mel,
    load_audio,
    mel_center_frequencies,
    mix_noise_at_snr,
    num_mel_frames,
)
from phrasematch.errors import (
    EmptyAudioError,
    SilentNoiseError,
    SilentSpeechError,
    TooShortError,
    UnsupportedFormatError,
)

from oracles import reference_log_mel


def _clip(samples):
    return AudioClip(samples=np.asarray(samples, dtype=np.float64),
                     sample_rate_hz=SAMPLE_RATE)


def _sine(freq, dur_s=1.0, amp=1.0):
    t = np.arange(int(dur_s * SAMPLE_RATE)) / SAMPLE_RATE
    return amp * np.sin(2 * np.pi * freq * t)


class TestLoadAudio:
    def test_silence_16k(self, wav_factory):
        clip = load_audio(wav_factory(np.zeros(16000)))
        assert clip.sample_rate_hz == 16000
        assert clip.samples.shape == (16000,)
        assert np.all(clip.samples == 0.0)

    def test_8k_is_upsampled_2x(self, wav_factory):
        path = wav_factory(np.zeros(8000), rate=8000)
        clip = load_audio(path)
        assert clip.samples.size == 16000

    def test_44k1_resample_length(self, wav_factory):
        path = wav_factory(np.zeros(44100), rate=44100)
        assert load_audio(path).samples.size == 16000

    def test_stereo_opposite_channels_cancel(self, tmp_path):
        x = (np.sin(2 * np.pi * 440 * np.arange(16000) / 16000) * 20000)
        stereo = np.stack([x, -x], axis=1).astype(np.int16)
        from scipy.io import wavfile
        path = tmp_path / "stereo.wav"
        wavfile.write(path, 16000, stereo)
        clip = load_audio(path)
        assert np.all(clip.samples == 0.0)

    def test_int16_scaling(self, tmp_path):
        from scipy.io import wavfile
        path = tmp_path / "fs.wav"
        wavfile.write(path, 16000, np.full(1000, -32768, dtype=np.int16))
        clip = load_audio(path)
        assert np.all(clip.samples == -1.0)

    def test_float32_wav(self, wav_factory):
        x = np.linspace(-0.5, 0.5, 16000)
        clip = load_audio(wav_factory(x, dtype=np.float32))
        assert np.allclose(clip.samples, x, atol=1e-6)

    def test_24bit_pcm(self, tmp_path):
        x = np.array([0, 1 << 22, -(1 << 22), (1 << 23) - 1], dtype=np.int64)
        payload = b"".join(int(v).to_bytes(3, "little", signed=True) for v in x)
        fmt = struct.pack("<HHIIHH", 1, 1, 16000, 48000, 3, 24)
        chunks = (b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
                  + b"data" + struct.pack("<I", len(payload)) + payload)
        path = tmp_path / "pcm24.wav"
        path.write_bytes(b"RIFF" + struct.pack("<I", len(chunks)) + chunks)
        clip = load_audio(path)
        assert clip.samples.size == 4
        assert abs(clip.samples[1] - 0.5) < 1e-6
        assert abs(clip.samples[2] + 0.5) < 1e-6

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_audio(tmp_path / "nope.wav")

    def test_non_pcm_codec(self, tmp_path):
        fmt = struct.pack("<HHIIHH", 0x55, 1, 16000, 32000, 2, 16)
        data = b"\x00" * 64
        chunks = (b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
                  + b"data" + struct.pack("<I", len(data)) + data)
        path = tmp_path / "mp3ish.wav"
        path.write_bytes(b"RIFF" + struct.pack("<I", len(chunks)) + chunks)
        with pytest.raises(UnsupportedFormatError):
            load_audio(path)

    def test_empty_audio(self, tmp_path):
        fmt = struct.pack("<HHIIHH", 1, 1, 16000, 32000, 2, 16)
        chunks = (b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
                  + b"data" + struct.pack("<I", 0))
        path = tmp_path / "empty.wav"
        path.write_bytes(b"RIFF" + struct.pack("<I", len(chunks)) + chunks)
        with pytest.raises(EmptyAudioError):
            load_audio(path)


class TestLogMel:
    def test_silence_one_second(self):
        mel = compute_log_mel(_clip(np.zeros(16000)))
        assert mel.frames.shape == (98, 64)
        assert np.all(mel.frames == np.log(LOG_FLOOR))

    @given(st.integers(min_value=WINDOW_SAMPLES, max_value=40000))
    @settings(max_examples=60, deadline=None)
    def test_frame_count_formula(self, n):
        mel = compute_log_mel(_clip(np.zeros(n)))
        assert mel.frames.shape[0] == (n - WINDOW_SAMPLES) // HOP_SAMPLES + 1
        assert mel.frames.shape[0] == num_mel_frames(n)

    def test_too_short(self):
        with pytest.raises(TooShortError):
            compute_log_mel(_clip(np.zeros(WINDOW_SAMPLES - 1)))

    def test_1khz_sine_argmax_matches_reference(self):
        mel = compute_log_mel(_clip(_sine(1000.0)))
        peaks = mel.frames.argmax(axis=1)
        assert np.all(peaks == peaks[0])
        centers = mel_center_frequencies()
        assert peaks[0] == int(np.argmin(np.abs(centers - 1000.0)))
        ref = reference_log_mel(_sine(1000.0))
        np.testing.assert_allclose(mel.frames, ref, rtol=1e-9, atol=1e-9)

    def test_reference_match_random_signal(self):
        rng = np.random.default_rng(3)
        x = 0.5 * rng.standard_normal(6000).clip(-2, 2)
        mel = compute_log_mel(_clip(x))
        np.testing.assert_allclose(mel.frames, reference_log_mel(x),
                                   rtol=1e-9, atol=1e-9)

    def test_half_amplitude_shifts_by_2log_half(self):
        x = _sine(1000.0, amp=0.9)
        loud = compute_log_mel(_clip(x)).frames
        soft = compute_log_mel(_clip(0.5 * x)).frames
        mask = loud > 0.0  # power >> additive floor so the identity is clean
        assert mask.any()
        np.testing.assert_allclose((soft - loud)[mask], 2 * np.log(0.5),
                                   atol=1e-5)

    def test_floor_invariant(self):
        rng = np.random.default_rng(5)
        mel = compute_log_mel(_clip(0.1 * rng.standard_normal(4000)))
        assert np.all(mel.frames >= np.log(LOG_FLOOR))

    def test_deterministic(self):
        x = _sine(440.0, dur_s=0.5)
        a = compute_log_mel(_clip(x)).frames
        b = compute_log_mel(_clip(x)).frames
        assert np.array_equal(a, b)


class TestMixNoise:
    def test_equal_rms_snr0_scale_is_one(self):
        speech = _clip(np.full(16000, 0.1))
        noise = _clip(0.1 * np.tile([1.0, -1.0], 8000))
        mixed = mix_noise_at_snr(speech, noise, 0.0)
        added = mixed.samples - speech.samples
        assert abs(np.sqrt(np.mean(added ** 2)) - 0.1) < 1e-12

    def test_snr20_scale_is_tenth(self):
        speech = _clip(np.full(16000, 0.1))
        noise = _clip(0.1 * np.tile([1.0, -1.0], 8000))
        mixed = mix_noise_at_snr(speech, noise, 20.0)
        added = mixed.samples - speech.samples
        assert abs(np.sqrt(np.mean(added ** 2)) - 0.01) < 1e-12

    @pytest.mark.parametrize("snr_db", [-5.0, 0.0, 7.5, 20.0])
    def test_remeasured_snr_within_tenth_db(self, snr_db):
        rng = np.random.default_rng(int(10 * snr_db) + 100)
        body = 0.1 * rng.standard_normal(12000).clip(-3, 3)
        speech = _clip(np.concatenate([np.zeros(2000), body, np.zeros(2000)]))
        noise = _clip(0.05 * rng.standard_normal(5000).clip(-3, 3))
        mixed = mix_noise_at_snr(speech, noise, snr_db)
        added = mixed.samples - speech.samples
        assert np.abs(mixed.samples).max() < 1.0  # invariant holds clip-free
        # re-derive the active mask the way the contract states it
        gate = 10.0 ** (ACTIVITY_GATE_DBFS / 20.0)
        t = num_mel_frames(speech.samples.size)
        mask = np.zeros(speech.samples.size, dtype=bool)
        for j in range(t):
            seg = speech.samples[j * HOP_SAMPLES: j * HOP_SAMPLES + WINDOW_SAMPLES]
            if np.sqrt(np.mean(seg ** 2)) > gate:
                mask[j * HOP_SAMPLES: j * HOP_SAMPLES + WINDOW_SAMPLES] = True
        measured = 10 * np.log10(np.mean(speech.samples[mask] ** 2)
                                 / np.mean(added[mask] ** 2))
        assert abs(measured - snr_db) < 0.1

    def test_infinite_snr_returns_speech_unchanged(self):
        speech = _clip(np.full(8000, 0.2))
        noise = _clip(np.full(8000, 0.2))
        mixed = mix_noise_at_snr(speech, noise, np.inf)
        assert np.array_equal(mixed.samples, speech.samples)

    def test_noise_shorter_than_speech_loops(self):
        speech = _clip(np.full(16000, 0.1))
        noise = _clip(0.1 * np.tile([1.0, -1.0], 100))
        mixed = mix_noise_at_snr(speech, noise, 0.0)
        assert mixed.samples.size == 16000

    def test_silent_noise(self):
        with pytest.raises(SilentNoiseError):
            mix_noise_at_snr(_clip(np.full(8000, 0.1)), _clip(np.zeros(8000)), 10.0)

    def test_silent_speech(self):
        quiet = _clip(np.full(8000, 1e-5))
        noise = _clip(np.full(8000, 0.1))
        with pytest.raises(SilentSpeechError):
            mix_noise_at_snr(quiet, noise, 10.0)

    def test_clipping_is_counted_and_clamped(self, caplog):
        speech = _clip(np.full(8000, 0.9))
        noise = _clip(np.tile([0.9, -0.9], 4000))
        with caplog.at_level(logging.WARNING, logger="phrasematch.audio"):
            mixed = mix_noise_at_snr(speech, noise, -10.0)
        assert any("clipped" in r.message for r in caplog.records)
        assert mixed.samples.max() <= 1.0 and mixed.samples.min() >= -1.0

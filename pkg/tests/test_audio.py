"""WAV I/O, resampling, gain math, and the transform round trip."""

import math
import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepfuse import (
    PIPELINE_RATE,
    StftParams,
    Waveform,
    istft,
    mix_add,
    read_wav,
    resample,
    snr_gain,
    stft,
    write_wav,
)
from sepfuse.audio import energy, rms
from sepfuse.errors import (
    RateMismatchError,
    SilentSignalError,
    UnreadableFileError,
    UnsupportedEncodingError,
    ZeroLengthAudioError,
)


def test_pcm16_round_trip_is_exact(tmp_path):
    ints = np.array([-32768, -1, 0, 1, 32767, 12345], dtype=np.int16)
    w = Waveform(ints.astype(np.float64) / 32768.0, 16000)
    path = tmp_path / "a.wav"
    assert write_wav(w, path) == 0
    back = read_wav(path)
    assert back.sample_rate == 16000
    np.testing.assert_array_equal(
        np.rint(back.samples * 32768.0).astype(np.int16), ints
    )


def test_write_reports_clipped_samples(tmp_path):
    w = Waveform(np.array([0.0, 1.5, -2.0, 0.5]), 8000)
    clipped = write_wav(w, tmp_path / "c.wav")
    assert clipped == 2
    back = read_wav(tmp_path / "c.wav")
    assert back.samples.max() <= 1.0
    assert back.samples.min() >= -1.0


def test_stereo_reads_as_channel_mean(tmp_path):
    path = tmp_path / "st.wav"
    left = np.array([1000, -2000, 300], dtype=np.int16)
    right = np.array([3000, 2000, 300], dtype=np.int16)
    inter = np.empty(6, dtype=np.int16)
    inter[0::2] = left
    inter[1::2] = right
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(2)
        fh.setsampwidth(2)
        fh.setframerate(16000)
        fh.writeframes(inter.tobytes())
    w = read_wav(path)
    expected = (left.astype(np.float64) + right) / 2.0 / 32768.0
    np.testing.assert_allclose(w.samples, expected)


def test_float32_wav_reads_without_scaling(tmp_path):
    path = tmp_path / "f32.wav"
    data = np.array([0.25, -0.5, 0.75], dtype="<f4")
    payload = data.tobytes()
    fmt = struct.pack("<HHIIHH", 3, 1, 16000, 16000 * 4, 4, 32)
    body = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    path.write_bytes(b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body)
    w = read_wav(path)
    np.testing.assert_allclose(w.samples, data.astype(np.float64), atol=1e-7)


def test_missing_file_is_unreadable(tmp_path):
    with pytest.raises(UnreadableFileError):
        read_wav(tmp_path / "nope.wav")


def test_not_a_wav_is_unsupported(tmp_path):
    p = tmp_path / "x.wav"
    p.write_bytes(b"this is not RIFF data at all....")
    with pytest.raises(UnsupportedEncodingError):
        read_wav(p)


def test_alaw_encoding_rejected(tmp_path):
    path = tmp_path / "alaw.wav"
    payload = b"\x55" * 8
    fmt = struct.pack("<HHIIHH", 6, 1, 8000, 8000, 1, 8)  # format 6 = A-law
    body = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    path.write_bytes(b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body)
    with pytest.raises(UnsupportedEncodingError):
        read_wav(path)


def test_zero_length_audio_rejected(tmp_path):
    path = tmp_path / "z.wav"
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(16000)
        fh.writeframes(b"")
    with pytest.raises(ZeroLengthAudioError):
        read_wav(path)


def test_resample_preserves_tone_and_rejects_images():
    # 1 kHz tone at 48 kHz down to 16 kHz: the tone survives, everything
    # above the new Nyquist must sit at least 60 dB down.
    rate_in, rate_out = 48000, 16000
    t = np.arange(rate_in) / rate_in
    w = Waveform(0.5 * np.sin(2 * np.pi * 1000.0 * t), rate_in)
    out = resample(w, rate_out)
    assert out.sample_rate == rate_out
    assert abs(len(out) - rate_out) <= 2
    spec = np.abs(np.fft.rfft(out.samples * np.hanning(len(out))))
    freqs = np.fft.rfftfreq(len(out), 1.0 / rate_out)
    peak = spec[np.argmin(np.abs(freqs - 1000.0))]
    stop = spec[freqs > 2000.0].max()
    assert 20 * np.log10(stop / peak) < -60.0


def test_resample_same_rate_is_identity():
    w = Waveform(np.linspace(-0.5, 0.5, 100), 16000)
    out = resample(w, 16000)
    np.testing.assert_array_equal(out.samples, w.samples)


def test_snr_gain_values():
    assert snr_gain(1.0, 1.0, 0.0) == pytest.approx(1.0)
    assert snr_gain(1.0, 1.0, 10.0) == pytest.approx(0.31622776601, abs=1e-9)
    assert snr_gain(1.0, 1.0, -10.0) == pytest.approx(3.1622776601, abs=1e-9)
    # scaling the noise by the gain hits the target ratio exactly
    sig_e, noise_e = 2.7, 0.9
    g = snr_gain(sig_e, noise_e, 7.0)
    assert 10 * math.log10(sig_e / (g * g * noise_e)) == pytest.approx(7.0)


def test_snr_gain_rejects_silent_inputs():
    with pytest.raises(SilentSignalError):
        snr_gain(0.0, 1.0, 0.0)
    with pytest.raises(SilentSignalError):
        snr_gain(1.0, 0.0, 0.0)


def test_stft_frame_count_is_ceil_len_over_hop():
    p = StftParams(window_size=1024, hop_size=256)
    for n in (1024, 1030, 4096, 5000, 16000):
        w = Waveform(np.random.default_rng(n).standard_normal(n) * 0.1, 16000)
        spec = stft(w, p)
        assert spec.frames.shape == (513, math.ceil(n / 256))


def test_stft_rejects_signal_shorter_than_window():
    from sepfuse.errors import ShortSignalError

    w = Waveform(np.zeros(256), 16000)
    with pytest.raises(ShortSignalError):
        stft(w, StftParams(window_size=1024, hop_size=256))


def test_stft_round_trip_below_1e6():
    rng = np.random.default_rng(42)
    p = StftParams()
    for _ in range(10):
        n = int(rng.integers(2000, 32000))
        w = Waveform(rng.standard_normal(n) * 0.3, 16000)
        back = istft(stft(w, p), p, out_len=n)
        assert len(back) == n
        assert np.max(np.abs(back.samples - w.samples)) < 1e-6


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(min_value=1500, max_value=20000),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_stft_round_trip_property(n, seed):
    w = Waveform(np.random.default_rng(seed).standard_normal(n) * 0.2, 16000)
    p = StftParams(window_size=512, hop_size=128)
    back = istft(stft(w, p), p, out_len=n)
    assert np.max(np.abs(back.samples - w.samples)) < 1e-6


def test_stft_energy_tracks_signal_energy():
    # windowed overlap-add keeps total energy within 1% for signals much
    # longer than the window (edge taper dominates below ~1 s)
    p = StftParams()
    w = Waveform(np.random.default_rng(3).standard_normal(32000) * 0.1, 16000)
    spec = stft(w, p)
    win = p.window()
    scale = np.sum(win**2) * p.window_size / p.hop_size
    spec_e = (
        np.sum(np.abs(spec.frames[0]) ** 2)
        + 2 * np.sum(np.abs(spec.frames[1:-1]) ** 2)
        + np.sum(np.abs(spec.frames[-1]) ** 2)
    )
    assert spec_e / scale == pytest.approx(energy(w), rel=0.01)


def test_istft_out_len_truncates_and_pads():
    p = StftParams(window_size=512, hop_size=128)
    w = Waveform(np.random.default_rng(9).standard_normal(5000) * 0.2, 16000)
    spec = stft(w, p)
    short = istft(spec, p, out_len=4000)
    assert len(short) == 4000
    np.testing.assert_allclose(short.samples, w.samples[:4000], atol=1e-6)


def test_bad_hop_fails_cola():
    with pytest.raises(ValueError):
        StftParams(window_size=1024, hop_size=768)


def test_hop_must_divide_window():
    with pytest.raises(ValueError):
        StftParams(window_size=1024, hop_size=300)


def test_mix_add_pads_shorter_tail():
    a = Waveform(np.ones(5) * 0.1, 16000)
    b = Waveform(np.ones(3) * 0.2, 16000)
    out = mix_add(a, b)
    np.testing.assert_allclose(
        out.samples, [0.3, 0.3, 0.3, 0.1, 0.1], atol=1e-12
    )


def test_mix_add_rejects_rate_mismatch():
    with pytest.raises(RateMismatchError):
        mix_add(Waveform(np.zeros(4), 16000), Waveform(np.zeros(4), 8000))


def test_rms_and_energy():
    w = Waveform(np.array([3.0, -4.0]), 16000)
    assert energy(w) == pytest.approx(25.0)
    assert rms(w) == pytest.approx(math.sqrt(12.5))


def test_waveform_is_immutable():
    w = Waveform(np.zeros(4), 16000)
    with pytest.raises(ValueError):
        w.samples[0] = 1.0


def test_pipeline_rate_constant():
    assert PIPELINE_RATE == 16000

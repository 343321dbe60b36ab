"""Waveform container, WAV I/O, resampling, SNR arithmetic, and STFT/ISTFT.

Everything downstream (separation, fusion, mixing, metrics) works on the
types defined here. Samples are float64 internally; 16-bit PCM exists only
at file boundaries.
"""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy.signal import check_COLA, get_window, resample_poly

from .errors import (
    RateMismatchError,
    ShortSignalError,
    SilentSignalError,
    UnreadableFileError,
    UnsupportedEncodingError,
    UnwritableFileError,
    ZeroLengthAudioError,
)

PathLike = Union[str, Path]

# Canonical pipeline rate; every stem is brought to this before processing.
PIPELINE_RATE = 16000

_PCM_SCALE = 32768.0

# WAVE format codes
_FMT_PCM = 0x0001
_FMT_IEEE_FLOAT = 0x0003
_FMT_EXTENSIBLE = 0xFFFE

_WINDOW_KINDS = {"hann": "hann", "hamming": "hamming", "rect": "boxcar"}


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono audio: float samples (nominal [-1, 1]) plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError(f"waveform must be mono 1-D, got shape {arr.shape}")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class StftParams:
    """Analysis window geometry. Defaults suit 16 kHz speech."""

    window_size: int = 1024
    hop_size: int = 256
    window_kind: str = "hann"

    def __post_init__(self):
        w, h = self.window_size, self.hop_size
        if w <= 0 or (w & (w - 1)) != 0:
            raise ValueError(f"window_size must be a power of two, got {w}")
        if h <= 0 or w % h != 0:
            raise ValueError(f"hop_size must divide window_size, got hop={h} window={w}")
        if self.window_kind not in _WINDOW_KINDS:
            raise ValueError(f"unknown window_kind {self.window_kind!r}")
        win = self.window()
        if not check_COLA(win, w, w - h):
            raise ValueError(
                f"window {self.window_kind!r} with hop {h}/{w} violates the "
                "constant-overlap-add condition"
            )

    def window(self) -> np.ndarray:
        return get_window(_WINDOW_KINDS[self.window_kind], self.window_size, fftbins=True)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Complex STFT frames, shape (window_size//2 + 1 bins, n_frames)."""

    frames: np.ndarray
    window_size: int
    hop_size: int
    sample_rate: int

    def __post_init__(self):
        arr = np.asarray(self.frames, dtype=np.complex128)
        if arr.ndim != 2:
            raise ValueError(f"frames must be 2-D, got shape {arr.shape}")
        if arr.shape[0] != self.window_size // 2 + 1:
            raise ValueError(
                f"bin count {arr.shape[0]} does not match window {self.window_size}"
            )
        if self.hop_size > self.window_size:
            raise ValueError("hop_size must not exceed window_size")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "frames", arr)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[1]


def read_wav(path: PathLike) -> Waveform:
    """Read a RIFF/WAVE file as a mono Waveform.

    Accepts 16-bit integer PCM and 32-bit float PCM, 1-2 channels. 16-bit
    samples are scaled by 1/32768; stereo is averaged down to mono.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise UnreadableFileError(f"cannot read {path}: {exc}") from exc

    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise UnsupportedEncodingError(f"{path}: not a RIFF/WAVE container")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        cid = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if cid == b"fmt " and len(body) >= 16:
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == _FMT_EXTENSIBLE and len(body) >= 40:
                # actual format code lives in the first two GUID bytes
                (sub,) = struct.unpack_from("<H", body, 24)
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)

    if fmt is None or data is None:
        raise UnsupportedEncodingError(f"{path}: missing fmt or data chunk")

    code, channels, rate, _byte_rate, _block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedEncodingError(f"{path}: {channels} channels unsupported")
    if code == _FMT_PCM and bits == 16:
        samples = np.frombuffer(data[: len(data) - len(data) % 2], dtype="<i2")
        samples = samples.astype(np.float64) / _PCM_SCALE
    elif code == _FMT_IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(data[: len(data) - len(data) % 4], dtype="<f4")
        samples = samples.astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{path}: format code {code} at {bits} bits unsupported"
        )

    if channels == 2:
        samples = samples[: len(samples) - len(samples) % 2]
        samples = samples.reshape(-1, 2).mean(axis=1)
    if samples.size == 0:
        raise ZeroLengthAudioError(f"{path}: zero-length audio")
    return Waveform(samples, rate)


def write_wav(w: Waveform, path: PathLike) -> int:
    """Write a Waveform as mono 16-bit PCM. Returns the clipped-sample count.

    Samples outside [-1, 1] are clipped, never rescaled, so SNR bookkeeping
    done upstream stays valid.
    """
    x = w.samples
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot write non-finite samples")
    n_clipped = int(np.sum(np.abs(x) > 1.0))
    q = np.rint(np.clip(x, -1.0, 1.0) * _PCM_SCALE)
    q = np.clip(q, -32768, 32767).astype("<i2")
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        with wave.open(str(p), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(w.sample_rate)
            wf.writeframes(q.tobytes())
    except OSError as exc:
        raise UnwritableFileError(f"cannot write {path}: {exc}") from exc
    return n_clipped


def resample(w: Waveform, target_rate: int) -> Waveform:
    """Band-limited (polyphase windowed-sinc) resampling to target_rate."""
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == w.sample_rate:
        return w
    g = np.gcd(int(target_rate), w.sample_rate)
    up, down = target_rate // g, w.sample_rate // g
    y = resample_poly(w.samples, up, down, window=("kaiser", 8.0))
    return Waveform(y, target_rate)


def rms(w: Waveform) -> float:
    """Root-mean-square amplitude."""
    if len(w) == 0:
        raise ValueError("rms undefined on empty waveform")
    return float(np.sqrt(np.mean(w.samples**2)))


def energy(w: Waveform) -> float:
    """Sum of squared samples over the full duration."""
    return float(np.sum(w.samples**2))


def snr_gain(signal_energy: float, noise_energy: float, snr_db: float) -> float:
    """Gain to apply to the noise so signal/noise energy hits snr_db.

    Solves signal_energy / (g^2 * noise_energy) = 10^(snr_db/10).
    """
    if signal_energy <= 0.0 or noise_energy <= 0.0:
        raise SilentSignalError(
            f"snr_gain needs positive energies, got {signal_energy}, {noise_energy}"
        )
    return float(np.sqrt(signal_energy / (noise_energy * 10.0 ** (snr_db / 10.0))))


def stft(w: Waveform, p: StftParams) -> Spectrogram:
    """Centered STFT with reflective padding; frame count = ceil(len/hop)."""
    n = len(w)
    if n < p.window_size:
        raise ShortSignalError(
            f"signal of {n} samples shorter than window {p.window_size}"
        )
    pad = p.window_size // 2
    xp = np.pad(w.samples, pad, mode="reflect")
    n_frames = -(-n // p.hop_size)
    view = np.lib.stride_tricks.sliding_window_view(xp, p.window_size)
    segs = view[:: p.hop_size][:n_frames]
    frames = np.fft.rfft(segs * p.window(), axis=1).T
    return Spectrogram(frames, p.window_size, p.hop_size, w.sample_rate)


def istft(s: Spectrogram, p: StftParams, out_len: int) -> Waveform:
    """Weighted overlap-add inverse of stft(), truncated to out_len samples."""
    if s.window_size != p.window_size or s.hop_size != p.hop_size:
        raise ValueError(
            f"params ({p.window_size},{p.hop_size}) do not match spectrogram "
            f"geometry ({s.window_size},{s.hop_size})"
        )
    win = p.window()
    pad = p.window_size // 2
    total = (s.n_frames - 1) * p.hop_size + p.window_size
    if out_len > total - pad:
        raise ValueError(
            f"out_len {out_len} exceeds synthesizable span {total - pad}"
        )
    segs = np.fft.irfft(s.frames.T, n=p.window_size, axis=1)
    acc = np.zeros(total)
    wsum = np.zeros(total)
    wsq = win * win
    for t in range(s.n_frames):
        start = t * p.hop_size
        acc[start : start + p.window_size] += win * segs[t]
        wsum[start : start + p.window_size] += wsq
    good = wsum > 1e-12
    acc[good] /= wsum[good]
    return Waveform(acc[pad : pad + out_len], s.sample_rate)


def mix_add(a: Waveform, b: Waveform) -> Waveform:
    """Sample-wise sum over the longer length; the shorter tail is zero-padded."""
    if a.sample_rate != b.sample_rate:
        raise RateMismatchError(
            f"cannot mix {a.sample_rate} Hz with {b.sample_rate} Hz"
        )
    n = max(len(a), len(b))
    out = np.zeros(n)
    out[: len(a)] += a.samples
    out[: len(b)] += b.samples
    return Waveform(out, a.sample_rate)

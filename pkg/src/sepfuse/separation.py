"""Two-stem source separation front ends.

Three interchangeable separators produce a (speech, non-speech) stem pair
from a mixture:

* oracle-irm: soft ratio mask built from the known clean stems; the quality
  ceiling, usable only when references exist.
* spectral-gate: blind binary mask over a per-bin noise floor estimated from
  the quietest frames; the reference-free baseline.
* external: stems come from an adapter over the wire protocol.

Both in-process methods use complementary masks, so the stems always sum
back to the mixture (up to transform round-trip error).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .audio import Spectrogram, StftParams, Waveform, istft, resample, stft
from .errors import LengthMismatchError, RateMismatchError
from .protocol import AdapterEndpoint, decode_audio, encode_audio

ORACLE_IRM = "oracle-irm"
SPECTRAL_GATE = "spectral-gate"
EXTERNAL = "external"
SEPARATOR_KINDS = (ORACLE_IRM, SPECTRAL_GATE, EXTERNAL)

MASK_EPS = 1e-8
GATE_THRESHOLD_DB = 6.0
GATE_QUIET_FRACTION = 0.1


@dataclass(frozen=True)
class SeparationResult:
    """A stem pair plus the tag of the separator that produced it."""

    speech: Waveform
    nonspeech: Waveform
    source_tag: str

    def __post_init__(self):
        if self.speech.sample_rate != self.nonspeech.sample_rate:
            raise RateMismatchError(
                f"stem rates differ: {self.speech.sample_rate} vs "
                f"{self.nonspeech.sample_rate}"
            )
        if len(self.speech) != len(self.nonspeech):
            raise LengthMismatchError(
                f"stem lengths differ: {len(self.speech)} vs {len(self.nonspeech)}"
            )


@dataclass(frozen=True)
class SeparatorConfig:
    kind: str = SPECTRAL_GATE
    stft: StftParams = field(default_factory=StftParams)
    mask_floor: float = MASK_EPS
    gate_threshold_db: float = GATE_THRESHOLD_DB
    gate_quiet_fraction: float = GATE_QUIET_FRACTION
    adapter: Optional[AdapterEndpoint] = None

    def __post_init__(self):
        if self.kind not in SEPARATOR_KINDS:
            raise ValueError(f"unknown separator kind {self.kind!r}")
        if self.mask_floor <= 0:
            raise ValueError("mask_floor must be positive")
        if not 0 < self.gate_quiet_fraction <= 1:
            raise ValueError("gate_quiet_fraction must be in (0, 1]")
        if self.kind == EXTERNAL and self.adapter is None:
            raise ValueError("external separator needs an adapter endpoint")
        if self.kind != EXTERNAL and self.adapter is not None:
            raise ValueError(f"{self.kind} separator takes no adapter endpoint")


def oracle_masks(
    speech_ref: Spectrogram, noise_ref: Spectrogram, eps: float = MASK_EPS
) -> tuple[np.ndarray, np.ndarray]:
    """Ratio mask from reference stems and its complement.

    M = |S| / (|S| + |N| + eps); by construction both masks lie in [0, 1)
    and sum to strictly less than 1 by eps' share, so the complement is
    taken as 1 - M to keep the pair exactly complementary.
    """
    s_mag = np.abs(speech_ref.frames)
    n_mag = np.abs(noise_ref.frames)
    m = s_mag / (s_mag + n_mag + eps)
    return m, 1.0 - m


def _apply_masks(
    mixture: Waveform,
    spec: Spectrogram,
    speech_mask: np.ndarray,
    noise_mask: np.ndarray,
    params: StftParams,
    tag: str,
) -> SeparationResult:
    speech_spec = Spectrogram(
        spec.frames * speech_mask, spec.window_size, spec.hop_size, spec.sample_rate
    )
    noise_spec = Spectrogram(
        spec.frames * noise_mask, spec.window_size, spec.hop_size, spec.sample_rate
    )
    out_len = len(mixture)
    return SeparationResult(
        speech=istft(speech_spec, params, out_len),
        nonspeech=istft(noise_spec, params, out_len),
        source_tag=tag,
    )


def oracle_irm_separate(
    mixture: Waveform,
    speech_ref: Waveform,
    noise_ref: Waveform,
    params: StftParams = StftParams(),
    eps: float = MASK_EPS,
) -> SeparationResult:
    """Mask the mixture with the ideal ratio mask from the true stems."""
    for name, ref in (("speech", speech_ref), ("noise", noise_ref)):
        if ref.sample_rate != mixture.sample_rate:
            raise RateMismatchError(
                f"{name} reference rate {ref.sample_rate} != mixture rate "
                f"{mixture.sample_rate}"
            )
        if len(ref) != len(mixture):
            raise LengthMismatchError(
                f"{name} reference length {len(ref)} != mixture length {len(mixture)}"
            )
    spec = stft(mixture, params)
    m_speech, m_noise = oracle_masks(
        stft(speech_ref, params), stft(noise_ref, params), eps
    )
    return _apply_masks(mixture, spec, m_speech, m_noise, params, ORACLE_IRM)


def gate_mask(
    spec: Spectrogram,
    threshold_db: float = GATE_THRESHOLD_DB,
    quiet_fraction: float = GATE_QUIET_FRACTION,
) -> np.ndarray:
    """Binary keep-mask over a per-bin noise floor.

    The floor for each frequency bin is the mean magnitude of that bin's
    quietest frames (the lowest `quiet_fraction` of them, at least one);
    bins land in the speech stem when they clear floor + threshold_db.
    """
    mag = np.abs(spec.frames)
    n_frames = mag.shape[1]
    k = max(1, math.ceil(quiet_fraction * n_frames))
    quiet = np.sort(mag, axis=1)[:, :k]
    floor = quiet.mean(axis=1, keepdims=True)
    return (mag > floor * 10.0 ** (threshold_db / 20.0)).astype(np.float64)


def spectral_gate_separate(
    mixture: Waveform,
    params: StftParams = StftParams(),
    threshold_db: float = GATE_THRESHOLD_DB,
    quiet_fraction: float = GATE_QUIET_FRACTION,
) -> SeparationResult:
    """Blind separation: gated bins form one stem, the rest the other."""
    spec = stft(mixture, params)
    keep = gate_mask(spec, threshold_db, quiet_fraction)
    return _apply_masks(mixture, spec, keep, 1.0 - keep, params, SPECTRAL_GATE)


def _conform_stem(stem: Waveform, mixture: Waveform, name: str) -> Waveform:
    """Bring an adapter stem onto the mixture's rate and length.

    Rate differences are resampled; length is padded or trimmed only within
    a small tolerance (resampling rounding), larger drift is an error.
    """
    if stem.sample_rate != mixture.sample_rate:
        stem = resample(stem, mixture.sample_rate)
    target = len(mixture)
    tol = 2 + int(1e-3 * target)
    if abs(len(stem) - target) > tol:
        raise LengthMismatchError(
            f"{name} stem length {len(stem)} too far from mixture length {target}"
        )
    samples = stem.samples
    if len(samples) < target:
        samples = np.pad(samples, (0, target - len(samples)))
    else:
        samples = samples[:target]
    return Waveform(samples, mixture.sample_rate)


def external_separate(client, mixture: Waveform) -> SeparationResult:
    """Fetch stems from an adapter and conform them to the mixture."""
    result = client.request("separate", {"audio": encode_audio(mixture)})
    try:
        speech = decode_audio(result["speech"])
        nonspeech = decode_audio(result["nonspeech"])
    except KeyError as exc:
        raise LengthMismatchError(
            f"separate result missing stem {exc}: {sorted(result)}"
        ) from None
    return SeparationResult(
        speech=_conform_stem(speech, mixture, "speech"),
        nonspeech=_conform_stem(nonspeech, mixture, "nonspeech"),
        source_tag=EXTERNAL,
    )


def separate(
    mixture: Waveform,
    config: SeparatorConfig,
    refs: Optional[tuple[Waveform, Waveform]] = None,
    client=None,
) -> SeparationResult:
    """Dispatch on the configured separator kind.

    refs (speech, noise) are required by oracle-irm and rejected elsewhere;
    an open adapter client is required by external.
    """
    if config.kind == ORACLE_IRM:
        if refs is None:
            raise ValueError("oracle-irm requires reference stems")
        return oracle_irm_separate(mixture, refs[0], refs[1], config.stft, config.mask_floor)
    if refs is not None:
        raise ValueError(f"{config.kind} takes no reference stems")
    if config.kind == SPECTRAL_GATE:
        return spectral_gate_separate(
            mixture, config.stft, config.gate_threshold_db, config.gate_quiet_fraction
        )
    if client is None:
        raise ValueError("external separator needs an open adapter client")
    return external_separate(client, mixture)

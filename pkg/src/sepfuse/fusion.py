"""Modality-aware blending of a separated stem back into the raw mixture.

The routed modality picks which stem matters and how hard to lean on it:

* speech: out = a_sp * speech_stem + (1 - a_sp) * raw
* non-speech: out = a_ns * nonspeech_stem + (1 - a_ns) * raw
* mixture: the raw waveform passes through untouched (same object, so the
  bytes written downstream are identical to the no-enhancement path).

Defaults keep half the raw signal under speech (separators smear speech
content into both stems) and lean 90% on the stem for non-speech.
"""

from __future__ import annotations

from dataclasses import dataclass

from .audio import Waveform
from .errors import LengthMismatchError, RateMismatchError
from .routing import Modality
from .separation import SeparationResult

SPEECH_ALPHA = 0.5
NON_SPEECH_ALPHA = 0.9


@dataclass(frozen=True)
class FusionWeights:
    speech_alpha: float = SPEECH_ALPHA
    non_speech_alpha: float = NON_SPEECH_ALPHA

    def __post_init__(self):
        for name, a in (
            ("speech_alpha", self.speech_alpha),
            ("non_speech_alpha", self.non_speech_alpha),
        ):
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {a}")

    def alpha_for(self, modality: Modality) -> float:
        if modality is Modality.SPEECH:
            return self.speech_alpha
        if modality is Modality.NON_SPEECH:
            return self.non_speech_alpha
        raise ValueError(f"no blend weight for {modality}")


def default_weights() -> FusionWeights:
    return FusionWeights()


def blend(raw: Waveform, stem: Waveform, alpha: float) -> Waveform:
    """alpha * stem + (1 - alpha) * raw, with rate/length checked."""
    if raw.sample_rate != stem.sample_rate:
        raise RateMismatchError(
            f"raw rate {raw.sample_rate} != stem rate {stem.sample_rate}"
        )
    if len(raw) != len(stem):
        raise LengthMismatchError(
            f"raw length {len(raw)} != stem length {len(stem)}"
        )
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return Waveform(alpha * stem.samples + (1.0 - alpha) * raw.samples, raw.sample_rate)


def fuse(
    raw: Waveform,
    stems: SeparationResult,
    modality: Modality,
    weights: FusionWeights = FusionWeights(),
) -> Waveform:
    """Blend the modality's stem with the raw mixture; mixture is a no-op."""
    if modality is Modality.MIXTURE:
        return raw
    if modality is Modality.SPEECH:
        return blend(raw, stems.speech, weights.speech_alpha)
    return blend(raw, stems.nonspeech, weights.non_speech_alpha)

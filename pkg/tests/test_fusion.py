"""Blend rules: interpolation identity, endpoints, mixture passthrough."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepfuse import FusionWeights, Modality, Waveform, blend, default_weights, fuse
from sepfuse.errors import LengthMismatchError, RateMismatchError
from sepfuse.separation import SeparationResult


def _stems(n=512, seed=0):
    rng = np.random.default_rng(seed)
    raw = Waveform(rng.standard_normal(n) * 0.1, 16000)
    sp = Waveform(rng.standard_normal(n) * 0.1, 16000)
    ns = Waveform(raw.samples - sp.samples, 16000)
    return raw, SeparationResult(speech=sp, nonspeech=ns, source_tag="test")


def test_default_weights():
    w = default_weights()
    assert w.speech_alpha == 0.5
    assert w.non_speech_alpha == 0.9


def test_weights_validated():
    with pytest.raises(ValueError):
        FusionWeights(speech_alpha=1.2)
    with pytest.raises(ValueError):
        FusionWeights(non_speech_alpha=-0.1)


def test_speech_branch_uses_speech_alpha():
    raw, stems = _stems()
    w = FusionWeights(speech_alpha=0.25, non_speech_alpha=0.75)
    out = fuse(raw, stems, Modality.SPEECH, w)
    expected = 0.25 * stems.speech.samples + 0.75 * raw.samples
    assert np.max(np.abs(out.samples - expected)) < 1e-9


def test_non_speech_branch_uses_non_speech_alpha():
    raw, stems = _stems(seed=1)
    w = FusionWeights(speech_alpha=0.25, non_speech_alpha=0.75)
    out = fuse(raw, stems, Modality.NON_SPEECH, w)
    expected = 0.75 * stems.nonspeech.samples + 0.25 * raw.samples
    assert np.max(np.abs(out.samples - expected)) < 1e-9


def test_mixture_branch_returns_raw_object():
    raw, stems = _stems(seed=2)
    out = fuse(raw, stems, Modality.MIXTURE, default_weights())
    assert out is raw


def test_alpha_endpoints():
    raw, stems = _stems(seed=3)
    zero = fuse(raw, stems, Modality.SPEECH, FusionWeights(0.0, 0.0))
    one = fuse(raw, stems, Modality.SPEECH, FusionWeights(1.0, 1.0))
    assert np.max(np.abs(zero.samples - raw.samples)) < 1e-9
    assert np.max(np.abs(one.samples - stems.speech.samples)) < 1e-9


@settings(max_examples=60, deadline=None)
@given(
    alpha=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    seed=st.integers(min_value=0, max_value=10_000),
)
def test_blend_interpolation_identity(alpha, seed):
    rng = np.random.default_rng(seed)
    raw = Waveform(rng.standard_normal(128) * 0.2, 16000)
    stem = Waveform(rng.standard_normal(128) * 0.2, 16000)
    out = blend(raw, stem, alpha)
    expected = alpha * stem.samples + (1.0 - alpha) * raw.samples
    assert np.max(np.abs(out.samples - expected)) < 1e-9


def test_blend_validates_inputs():
    raw = Waveform(np.zeros(10), 16000)
    with pytest.raises(LengthMismatchError):
        blend(raw, Waveform(np.zeros(9), 16000), 0.5)
    with pytest.raises(RateMismatchError):
        blend(raw, Waveform(np.zeros(10), 8000), 0.5)
    with pytest.raises(ValueError):
        blend(raw, Waveform(np.zeros(10), 16000), 1.5)

"""Instruction routing: keyword rule, label parsing, adapter path."""

import pytest

from sepfuse import Modality, correct_rate, external_route, parse_modality, rule_route
from sepfuse.errors import RouteParseError
from sepfuse.routing import NON_SPEECH_LEXICON, SPEECH_LEXICON

ASR_INSTRUCTIONS = [
    "Transcribe the speech.",
    "Write down the words the speaker said.",
    "What was spoken in this utterance?",
    "Please transcribe every word you hear.",
]

AT_INSTRUCTIONS = [
    "List every sound event you hear.",
    "Tag the acoustic scene.",
    "Describe the background noise and music.",
    "What environment does this audio come from?",
]


def test_asr_instructions_route_to_speech():
    for text in ASR_INSTRUCTIONS:
        assert rule_route(text).modality is Modality.SPEECH


def test_at_instructions_route_to_non_speech():
    for text in AT_INSTRUCTIONS:
        assert rule_route(text).modality is Modality.NON_SPEECH


def test_tie_falls_back_to_mixture():
    assert rule_route("Do something with this clip.").modality is Modality.MIXTURE
    # one keyword each side is still a tie
    assert (
        rule_route("Transcribe the music.").modality is Modality.MIXTURE
    )


def test_keywords_match_whole_words_only():
    # "soundly" must not count as "sound"
    assert rule_route("She slept soundly, he said.").modality is Modality.SPEECH


def test_multiword_keyword():
    assert "acoustic scene" in NON_SPEECH_LEXICON
    assert rule_route("Classify the acoustic scene.").modality is Modality.NON_SPEECH


def test_lexicons_are_disjoint():
    assert not set(SPEECH_LEXICON) & set(NON_SPEECH_LEXICON)


def test_empty_instruction_rejected():
    with pytest.raises(ValueError):
        rule_route("")


def test_parse_modality_canonical_labels():
    assert parse_modality("speech") is Modality.SPEECH
    assert parse_modality(" Non-Speech ") is Modality.NON_SPEECH
    assert parse_modality("MIXTURE") is Modality.MIXTURE


def test_parse_modality_rejects_junk():
    for bad in ("", "voice", "non speech", "speech!", "both"):
        with pytest.raises(RouteParseError):
            parse_modality(bad)


class _FakeClient:
    def __init__(self, reply):
        self.reply = reply
        self.last = None

    def request(self, op, payload):
        self.last = (op, payload)
        return self.reply


def test_external_route_parses_canonical_label():
    client = _FakeClient({"modality": "Speech"})
    decision = external_route(client, "Transcribe this.")
    assert decision.modality is Modality.SPEECH
    assert decision.router_tag == "external"
    assert decision.raw_response == "Speech"
    assert client.last[0] == "route"
    assert client.last[1] == {"instruction": "Transcribe this."}


def test_external_route_fails_loudly_on_junk():
    with pytest.raises(RouteParseError):
        external_route(_FakeClient({"modality": "the speech one"}), "x")
    with pytest.raises(RouteParseError):
        external_route(_FakeClient({"label": "speech"}), "x")


def test_correct_rate():
    pred = [Modality.SPEECH, Modality.SPEECH, Modality.MIXTURE]
    gold = [Modality.SPEECH, Modality.NON_SPEECH, Modality.MIXTURE]
    assert correct_rate(pred, gold) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        correct_rate(pred, gold[:2])
    with pytest.raises(ValueError):
        correct_rate([], [])

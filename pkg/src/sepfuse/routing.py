"""Instruction-to-modality routing.

A deterministic keyword router keeps the pipeline testable offline; an
external LLM can be swapped in over the adapter protocol. Router accuracy
is scored by correct_rate.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .errors import RouteParseError


class Modality(enum.Enum):
    SPEECH = "speech"
    NON_SPEECH = "non-speech"
    MIXTURE = "mixture"


def parse_modality(text: str) -> Modality:
    """Parse a canonical modality label after trimming and case-folding.

    Anything else raises RouteParseError; labels are never silently coerced,
    since a wrong route directly costs downstream accuracy.
    """
    norm = text.strip().casefold()
    for m in Modality:
        if norm == m.value:
            return m
    raise RouteParseError(f"not a canonical modality label: {text!r}")


# Swappable defaults; these exist so the pipeline runs without an LLM.
SPEECH_LEXICON = (
    "transcribe",
    "said",
    "speaker",
    "spoken",
    "words",
    "speech",
    "utterance",
)
NON_SPEECH_LEXICON = (
    "sound",
    "event",
    "noise",
    "music",
    "environment",
    "acoustic scene",
    "tagging",
)


@dataclass(frozen=True)
class RoutingDecision:
    modality: Modality
    router_tag: str
    raw_response: Optional[str] = None


@dataclass(frozen=True)
class Lexicon:
    speech: tuple[str, ...] = SPEECH_LEXICON
    non_speech: tuple[str, ...] = NON_SPEECH_LEXICON


DEFAULT_LEXICON = Lexicon()


def _hits(instruction: str, keywords: Sequence[str]) -> int:
    """Count keywords present (whole-word; multi-word entries as phrases)."""
    text = instruction.casefold()
    n = 0
    for kw in keywords:
        if re.search(r"\b" + re.escape(kw.casefold()) + r"\b", text):
            n += 1
    return n


def rule_route(instruction: str, lexicon: Lexicon = DEFAULT_LEXICON) -> RoutingDecision:
    """Keyword-count router: strictly more hits on one side wins, ties fall
    back to mixture (which downstream fusion treats as a no-op)."""
    if not instruction:
        raise ValueError("instruction must be non-empty")
    sp = _hits(instruction, lexicon.speech)
    ns = _hits(instruction, lexicon.non_speech)
    if sp > ns:
        m = Modality.SPEECH
    elif ns > sp:
        m = Modality.NON_SPEECH
    else:
        m = Modality.MIXTURE
    return RoutingDecision(modality=m, router_tag="rule")


def external_route(client, instruction: str) -> RoutingDecision:
    """Ask an adapter for the modality decision.

    The adapter answers {"modality": <canonical label>}; anything that does
    not parse as a canonical label fails loudly instead of being coerced.
    """
    if not instruction:
        raise ValueError("instruction must be non-empty")
    result = client.request("route", {"instruction": instruction})
    raw = result.get("modality")
    if not isinstance(raw, str):
        raise RouteParseError(
            f"adapter route result lacked a modality string: {result}"
        )
    return RoutingDecision(
        modality=parse_modality(raw), router_tag="external", raw_response=raw
    )


def correct_rate(
    decisions: Sequence[Modality], labels: Sequence[Modality]
) -> float:
    """Fraction of items whose routed modality matches the ground truth."""
    if len(decisions) != len(labels):
        raise ValueError(
            f"{len(decisions)} decisions vs {len(labels)} labels"
        )
    if not decisions:
        raise ValueError("correct_rate needs at least one item")
    return sum(d == l for d, l in zip(decisions, labels)) / len(decisions)

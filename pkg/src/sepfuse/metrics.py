"""Evaluation metrics: WER with hallucination filtering, AP/mAP, SDR, QA accuracy.

All functions are pure and permutation-invariant over items (AP ties break by
stable input order, so permuting distinct-score items is safe).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .audio import Waveform
from .errors import LengthMismatchError, SilentSignalError

# Items with WER strictly above this are counted as hallucinations and
# excluded from the mean.
HALLUCINATION_WER = 2.0

SDR_CAP_DB = 120.0

_PUNCT_RE = re.compile(r"[^\w\s]+", re.UNICODE)


@dataclass(frozen=True)
class AsrScore:
    """Aggregate ASR result: hallucination rate plus mean WER of the rest."""

    hallucination_rate: float
    mean_wer: float  # NaN when every item hallucinated
    n_total: int
    n_hallucinated: int


@dataclass(frozen=True)
class TagPrediction:
    """Per-class scores for one item, aligned with a label vocabulary."""

    classes: tuple[str, ...]
    scores: tuple[float, ...]

    def __post_init__(self):
        if len(self.classes) != len(self.scores):
            raise ValueError(
                f"{len(self.scores)} scores for {len(self.classes)} classes"
            )

    def score_for(self, cls: str) -> float:
        return self.scores[self.classes.index(cls)]


@dataclass(frozen=True)
class MeanApResult:
    mean_ap: float
    per_class: dict[str, float]
    excluded_classes: tuple[str, ...]  # classes with no positive item


def normalize_text(t: str) -> list[str]:
    """Case-fold, strip punctuation, split on whitespace."""
    return _PUNCT_RE.sub("", t.casefold()).split()


def wer(ref: str, hyp: str) -> float:
    """Word error rate: unit-cost Levenshtein distance / reference length."""
    r = normalize_text(ref)
    h = normalize_text(hyp)
    if not r:
        raise ValueError("WER undefined for empty reference")
    # two-row DP over word tokens
    prev = list(range(len(h) + 1))
    for i, rw in enumerate(r, start=1):
        cur = [i] + [0] * len(h)
        for j, hw in enumerate(h, start=1):
            sub = prev[j - 1] + (rw != hw)
            cur[j] = min(sub, prev[j] + 1, cur[j - 1] + 1)
        prev = cur
    return prev[len(h)] / len(r)


def asr_scores(pairs: Sequence[tuple[str, str]]) -> AsrScore:
    """Score (reference, hypothesis) pairs with the hallucination filter.

    Items with WER > 2.0 (strictly) count as hallucinated and are excluded
    before averaging; WER exactly 2.0 stays in the mean.
    """
    if not pairs:
        raise ValueError("asr_scores needs at least one pair")
    wers = [wer(ref, hyp) for ref, hyp in pairs]
    kept = [v for v in wers if v <= HALLUCINATION_WER]
    n_hall = len(wers) - len(kept)
    mean = sum(kept) / len(kept) if kept else math.nan
    return AsrScore(
        hallucination_rate=n_hall / len(wers),
        mean_wer=mean,
        n_total=len(wers),
        n_hallucinated=n_hall,
    )


def average_precision(scores: Sequence[float], labels: Sequence[int]) -> float:
    """AP over one ranking: mean precision at each positive item's rank.

    Items are ranked by descending score; ties keep input order.
    """
    if len(scores) != len(labels):
        raise LengthMismatchError(
            f"{len(scores)} scores vs {len(labels)} labels"
        )
    if not any(labels):
        raise ValueError("average precision needs at least one positive label")
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits = 0
    precisions = []
    for rank, idx in enumerate(order, start=1):
        if labels[idx]:
            hits += 1
            precisions.append(hits / rank)
    return sum(precisions) / len(precisions)


def mean_ap(
    preds: Sequence[TagPrediction],
    truth: Sequence[Iterable[str]],
) -> MeanApResult:
    """Macro-average AP over classes that have at least one positive item.

    Classes without positives cannot be ranked and are excluded but reported.
    """
    if len(preds) != len(truth):
        raise LengthMismatchError(f"{len(preds)} predictions vs {len(truth)} truths")
    if not preds:
        raise ValueError("mean_ap needs at least one item")
    vocab = preds[0].classes
    for p in preds:
        if p.classes != vocab:
            raise ValueError("all predictions must share one vocabulary")
    truth_sets = [frozenset(t) for t in truth]
    per_class: dict[str, float] = {}
    excluded: list[str] = []
    for cls in vocab:
        labels = [int(cls in ts) for ts in truth_sets]
        if not any(labels):
            excluded.append(cls)
            continue
        scores = [p.score_for(cls) for p in preds]
        per_class[cls] = average_precision(scores, labels)
    if not per_class:
        raise ValueError("no class has a positive item; mAP undefined")
    return MeanApResult(
        mean_ap=sum(per_class.values()) / len(per_class),
        per_class=per_class,
        excluded_classes=tuple(excluded),
    )


def sdr(reference: Waveform, estimate: Waveform) -> float:
    """Signal-to-distortion ratio in dB, capped at +120 for near-zero residual."""
    if len(reference) != len(estimate):
        raise LengthMismatchError(
            f"reference {len(reference)} vs estimate {len(estimate)} samples"
        )
    if reference.sample_rate != estimate.sample_rate:
        raise LengthMismatchError("reference and estimate sample rates differ")
    ref_e = float(np.sum(reference.samples**2))
    if ref_e <= 0.0:
        raise SilentSignalError("SDR undefined for a silent reference")
    resid_e = float(np.sum((reference.samples - estimate.samples) ** 2))
    if resid_e < 1e-12 * ref_e:
        return SDR_CAP_DB
    return 10.0 * math.log10(ref_e / resid_e)


def qa_acc(preds: Sequence[str], answers: Sequence[str]) -> float:
    """Exact-match accuracy after trimming and case-folding."""
    if len(preds) != len(answers):
        raise LengthMismatchError(f"{len(preds)} predictions vs {len(answers)} answers")
    if not preds:
        raise ValueError("qa_acc needs at least one item")
    hits = sum(
        p.strip().casefold() == a.strip().casefold() for p, a in zip(preds, answers)
    )
    return hits / len(preds)

"""Per-item enhancement flow and run-level orchestration.

One item moves through separate -> route -> fuse -> write. Items are
independent: a bounded thread pool may process them in any order, each
worker owns its adapter connections, and every output (log rows, WAV
bytes, report rows) is emitted in canonical id order so results do not
depend on the worker count. A failing item becomes a log row, not a dead
run; only a run where every item fails is an error.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .audio import Waveform, read_wav, write_wav
from .config import (
    ROUTER_EXTERNAL,
    ROUTER_FIXED,
    RouterConfig,
    RunConfig,
    config_hash,
)
from .errors import SepfuseError
from .fusion import FusionWeights, fuse
from .metrics import asr_scores, mean_ap, qa_acc, sdr, TagPrediction
from .mixgen import (
    TASK_ASR,
    TASK_AT,
    TASK_QA,
    MixtureItem,
    read_manifest,
)
from .protocol import AdapterClient, AdapterEndpoint
from .report import EvalReport, ReportRow, make_provenance
from .routing import Modality, RoutingDecision, external_route, rule_route
from .separation import ORACLE_IRM, SeparationResult, separate

PathLike = Union[str, Path]


class ClientPool:
    """Thread-local adapter clients; each worker dials its own connections."""

    def __init__(self):
        self._local = threading.local()
        self._all: list[AdapterClient] = []
        self._lock = threading.Lock()

    def get(self, endpoint: AdapterEndpoint) -> AdapterClient:
        cache = getattr(self._local, "cache", None)
        if cache is None:
            cache = {}
            self._local.cache = cache
        key = (endpoint.transport, endpoint.address)
        if key not in cache:
            client = AdapterClient(endpoint)
            cache[key] = client
            with self._lock:
                self._all.append(client)
        return cache[key]

    def close_all(self):
        with self._lock:
            clients, self._all = self._all, []
        for c in clients:
            try:
                c.close()
            except Exception:
                pass


@dataclass(frozen=True)
class EnhanceRecord:
    """One log row per item: the decision trail plus quality numbers."""

    id: str
    status: str  # ok | failed
    modality: Optional[str] = None
    router_tag: Optional[str] = None
    alpha: Optional[float] = None
    enhanced_path: Optional[str] = None
    mixture_sdr_db: Optional[float] = None
    stem_sdr_db: Optional[float] = None
    enhanced_sdr_db: Optional[float] = None
    clipped_samples: int = 0
    error: Optional[dict] = None

    def to_obj(self) -> dict:
        obj = {
            "id": self.id,
            "status": self.status,
            "modality": self.modality,
            "router_tag": self.router_tag,
            "alpha": self.alpha,
            "enhanced_path": self.enhanced_path,
            "mixture_sdr_db": _round(self.mixture_sdr_db),
            "stem_sdr_db": _round(self.stem_sdr_db),
            "enhanced_sdr_db": _round(self.enhanced_sdr_db),
            "clipped_samples": self.clipped_samples,
            "error": self.error,
        }
        return obj


def _round(v: Optional[float]) -> Optional[float]:
    return None if v is None else round(v, 6)


def route_item(item: MixtureItem, router: RouterConfig, pool: ClientPool) -> RoutingDecision:
    if router.kind == ROUTER_FIXED:
        return RoutingDecision(modality=router.fixed_label, router_tag="fixed")
    if router.kind == ROUTER_EXTERNAL:
        client = pool.get(router.adapter)
        return external_route(client, item.task.instruction)
    return rule_route(item.task.instruction)


def _oracle_refs(item: MixtureItem, mixture: Waveform) -> tuple[Waveform, Waveform]:
    """(speech-side, non-speech-side) references from the stored stems.

    The task target may sit on either side; the interferer is always the
    opposite modality. Clean rows have no noise stem, so the other side is
    silence.
    """
    target = read_wav(item.target_path)
    if item.noise_path is not None:
        noise = read_wav(item.noise_path)
    else:
        noise = Waveform(np.zeros(len(mixture)), mixture.sample_rate)
    if item.modality_label is Modality.SPEECH:
        return target, noise
    return noise, target


def enhance_item(
    item: MixtureItem,
    config: RunConfig,
    pool: ClientPool,
    out_dir: Path,
    weights: Optional[FusionWeights] = None,
) -> EnhanceRecord:
    weights = weights or config.weights
    mixture = read_wav(item.mixture_path)

    refs: Optional[tuple[Waveform, Waveform]] = None
    client = None
    if config.separator.kind == ORACLE_IRM:
        refs = _oracle_refs(item, mixture)
    elif config.separator.adapter is not None:
        client = pool.get(config.separator.adapter)
    stems: SeparationResult = separate(mixture, config.separator, refs, client)

    decision = route_item(item, config.router, pool)
    enhanced = fuse(mixture, stems, decision.modality, weights)

    out_path = out_dir / f"{item.id}.wav"
    clipped = write_wav(enhanced, out_path)

    # quality numbers against the task-target stem, when it is on disk
    mixture_sdr = stem_sdr = enhanced_sdr = None
    try:
        target = read_wav(item.target_path)
        if len(target) == len(mixture):
            mixture_sdr = sdr(target, mixture)
            enhanced_sdr = sdr(target, enhanced)
            own_stem = (
                stems.speech
                if item.modality_label is Modality.SPEECH
                else stems.nonspeech
            )
            stem_sdr = sdr(target, own_stem)
    except SepfuseError:
        pass

    alpha = (
        weights.alpha_for(decision.modality)
        if decision.modality is not Modality.MIXTURE
        else 0.0
    )
    return EnhanceRecord(
        id=item.id,
        status="ok",
        modality=decision.modality.value,
        router_tag=decision.router_tag,
        alpha=alpha,
        enhanced_path=str(out_path),
        mixture_sdr_db=mixture_sdr,
        stem_sdr_db=stem_sdr,
        enhanced_sdr_db=enhanced_sdr,
        clipped_samples=clipped,
    )


@dataclass(frozen=True)
class EnhanceRunResult:
    records: tuple[EnhanceRecord, ...]
    log_path: Path
    n_ok: int
    n_failed: int

    @property
    def all_failed(self) -> bool:
        return self.n_ok == 0


def run_enhance(
    items: Sequence[MixtureItem],
    config: RunConfig,
    out_dir: Optional[PathLike] = None,
    weights: Optional[FusionWeights] = None,
) -> EnhanceRunResult:
    """Enhance every item; failures become log rows, never aborts."""
    out = Path(out_dir) if out_dir is not None else Path(config.out_dir)
    enhanced_dir = out / "enhanced"
    enhanced_dir.mkdir(parents=True, exist_ok=True)
    pool = ClientPool()

    def work(item: MixtureItem) -> EnhanceRecord:
        try:
            return enhance_item(item, config, pool, enhanced_dir, weights)
        except Exception as exc:
            return EnhanceRecord(
                id=item.id,
                status="failed",
                error={"type": type(exc).__name__, "message": str(exc)},
            )

    try:
        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as ex:
                records = list(ex.map(work, items))
        else:
            records = [work(it) for it in items]
    finally:
        pool.close_all()

    records.sort(key=lambda r: r.id)
    log_path = out / "enhance_log.jsonl"
    with open(log_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_obj(), sort_keys=True) + "\n")

    n_ok = sum(1 for r in records if r.status == "ok")
    return EnhanceRunResult(
        records=tuple(records),
        log_path=log_path,
        n_ok=n_ok,
        n_failed=len(records) - n_ok,
    )


def _snr_groups(items: Sequence[MixtureItem]) -> dict[float, list[MixtureItem]]:
    groups: dict[float, list[MixtureItem]] = {}
    for it in items:
        groups.setdefault(it.snr_db, []).append(it)
    return groups


def sweep_alpha(
    items: Sequence[MixtureItem],
    config: RunConfig,
    alpha_grid: Sequence[float],
) -> EvalReport:
    """Re-run enhancement per blend weight; score each (alpha, snr) cell.

    The scorer is target-stem SDR of the enhanced output, which needs no
    external model: at alpha 0 it reduces to the raw-mixture SDR.
    """
    report = EvalReport(
        provenance=make_provenance(config_hash(config), config.seed)
    )
    out = Path(config.out_dir)
    by_kind: dict[str, list[MixtureItem]] = {}
    for it in items:
        by_kind.setdefault(it.task.kind, []).append(it)
    for alpha in alpha_grid:
        weights = FusionWeights(speech_alpha=alpha, non_speech_alpha=alpha)
        run = run_enhance(items, config, out / f"alpha_{alpha:g}", weights)
        by_id = {r.id: r for r in run.records}
        for kind, kind_items in sorted(by_kind.items()):
            for snr, group in sorted(
                _snr_groups(kind_items).items(), key=lambda kv: -kv[0]
            ):
                sdrs = []
                excluded = 0
                for it in group:
                    rec = by_id[it.id]
                    if rec.status == "ok" and rec.enhanced_sdr_db is not None:
                        sdrs.append(rec.enhanced_sdr_db)
                    else:
                        excluded += 1
                metrics = {}
                if sdrs:
                    metrics = {
                        "sdr_mean": float(np.mean(sdrs)),
                        "sdr_min": float(np.min(sdrs)),
                        "sdr_max": float(np.max(sdrs)),
                    }
                report.add_row(
                    ReportRow(
                        task=kind,
                        snr_db=snr,
                        separator=config.separator.kind,
                        router=config.router.kind,
                        alpha=alpha,
                        metrics=metrics,
                        n_items=len(sdrs),
                        n_excluded=excluded,
                    )
                )
    return report


def read_predictions(path: PathLike) -> dict[str, dict]:
    preds: dict[str, dict] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            preds[obj["id"]] = obj
    return preds


def evaluate(
    items: Sequence[MixtureItem],
    predictions: dict[str, dict],
    config: RunConfig,
    alpha: Optional[float] = None,
) -> EvalReport:
    """Score predictions per (task kind, snr) cell.

    Items without a prediction are excluded and counted. Per-kind fields:
    asr wants "text", at wants "scores" (class -> score), qa wants
    "choice"; any row may carry "modality" (routing accuracy) and
    "enhanced_path" (target-stem SDR).
    """
    report = EvalReport(
        provenance=make_provenance(config_hash(config), config.seed)
    )
    alpha_key = alpha if alpha is not None else -1.0
    by_kind: dict[str, list[MixtureItem]] = {}
    for it in items:
        by_kind.setdefault(it.task.kind, []).append(it)

    for kind, kind_items in sorted(by_kind.items()):
        for snr, group in sorted(
            _snr_groups(kind_items).items(), key=lambda kv: -kv[0]
        ):
            present = [it for it in group if it.id in predictions]
            excluded = len(group) - len(present)
            metrics: dict[str, float] = {}
            if present:
                metrics.update(_task_metrics(kind, present, predictions))
                metrics.update(_common_metrics(present, predictions))
            report.add_row(
                ReportRow(
                    task=kind,
                    snr_db=snr,
                    separator=config.separator.kind,
                    router=config.router.kind,
                    alpha=alpha_key,
                    metrics=metrics,
                    n_items=len(present),
                    n_excluded=excluded,
                )
            )
    return report


def _task_metrics(
    kind: str, group: Sequence[MixtureItem], predictions: dict[str, dict]
) -> dict[str, float]:
    if kind == TASK_ASR:
        pairs = [(it.task.reference, predictions[it.id].get("text", "")) for it in group]
        score = asr_scores(pairs)
        return {
            "mean_wer": score.mean_wer,
            "hallucination_rate": score.hallucination_rate,
        }
    if kind == TASK_AT:
        vocab = tuple(sorted({c for it in group for c in it.task.reference}))
        preds = []
        truth = []
        for it in group:
            scores = predictions[it.id].get("scores", {})
            preds.append(
                TagPrediction(
                    classes=vocab,
                    scores=tuple(float(scores.get(c, 0.0)) for c in vocab),
                )
            )
            truth.append(set(it.task.reference))
        result = mean_ap(preds, truth)
        return {"map": result.mean_ap}
    if kind == TASK_QA:
        golds = [it.task.reference["answer"] for it in group]
        choices = [predictions[it.id].get("choice", "") for it in group]
        return {"qa_acc": qa_acc(choices, golds)}
    raise ValueError(f"unknown task kind {kind!r}")


def _common_metrics(
    group: Sequence[MixtureItem], predictions: dict[str, dict]
) -> dict[str, float]:
    metrics: dict[str, float] = {}
    routed = [predictions[it.id].get("modality") for it in group]
    if all(isinstance(m, str) for m in routed):
        hits = sum(
            1
            for it, m in zip(group, routed)
            if m.strip().casefold() == it.modality_label.value
        )
        metrics["correct_rate"] = hits / len(group)
    sdrs = []
    for it in group:
        path = predictions[it.id].get("enhanced_path")
        if path:
            target = read_wav(it.target_path)
            est = read_wav(path)
            if len(est) == len(target):
                sdrs.append(sdr(target, est))
    if sdrs:
        metrics["sdr_mean"] = float(np.mean(sdrs))
        metrics["sdr_min"] = float(np.min(sdrs))
        metrics["sdr_max"] = float(np.max(sdrs))
    return metrics


def load_items(manifest_path: PathLike) -> list[MixtureItem]:
    return read_manifest(manifest_path)

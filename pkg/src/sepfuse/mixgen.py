"""SNR-controlled mixture synthesis and dataset manifests.

A dataset is built from a source manifest of clean task targets plus a pool
of interferer stems. Each (target, snr) cell gets one interferer of the
opposite modality, placed into the target timeline (random insertion when
shorter, head crop when longer), scaled for the requested SNR, and summed.
The target stays at unity gain; both gains, the placement offset, and the
per-item seed land in the output manifest so no downstream tool ever needs
to re-run the PRNG.

Manifests are JSON lines sorted by item id; +inf SNR (the clean condition)
is spelled "inf". Nothing here depends on wall-clock time, so a rebuild
with the same seed is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .audio import (
    PIPELINE_RATE,
    Waveform,
    energy,
    mix_add,
    read_wav,
    resample,
    snr_gain,
    write_wav,
)
from .errors import EmptyPoolError, ManifestError, ZeroLengthAudioError
from .routing import Modality, parse_modality

DEFAULT_SNR_GRID = (10.0, 5.0, 0.0, -5.0, -10.0)

TASK_ASR = "asr"
TASK_AT = "at"
TASK_QA = "qa"
TASK_KINDS = (TASK_ASR, TASK_AT, TASK_QA)

PathLike = Union[str, Path]


@dataclass(frozen=True)
class TaskPayload:
    """What to do with an item and what the right answer is.

    reference shape depends on kind: a transcript string for asr, a label
    tuple for at, and {"question", "options", "answer"} for qa.
    """

    kind: str
    instruction: str
    reference: object

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        if not self.instruction:
            raise ValueError("instruction must be non-empty")
        if self.kind == TASK_ASR:
            if not isinstance(self.reference, str) or not self.reference.strip():
                raise ValueError("asr reference must be a non-empty transcript")
        elif self.kind == TASK_AT:
            if isinstance(self.reference, (list, tuple)):
                object.__setattr__(self, "reference", tuple(self.reference))
            ref = self.reference
            if not isinstance(ref, tuple) or not ref or not all(
                isinstance(c, str) for c in ref
            ):
                raise ValueError("at reference must be a non-empty label tuple")
        else:
            ref = self.reference
            if not isinstance(ref, dict):
                raise ValueError("qa reference must be a mapping")
            options = ref.get("options")
            answer = ref.get("answer")
            if not ref.get("question") or not options:
                raise ValueError("qa reference needs a question and options")
            if not isinstance(options, (list, tuple)) or len(options) < 1:
                raise ValueError("qa options must be a non-empty sequence")
            if sum(1 for o in options if o == answer) != 1:
                raise ValueError("qa answer must appear exactly once in options")

    def to_obj(self) -> dict:
        ref = self.reference
        if isinstance(ref, tuple):
            ref = list(ref)
        return {"kind": self.kind, "instruction": self.instruction, "reference": ref}

    @classmethod
    def from_obj(cls, obj: dict) -> "TaskPayload":
        return cls(
            kind=obj["kind"],
            instruction=obj["instruction"],
            reference=obj["reference"],
        )


@dataclass(frozen=True)
class MixtureItem:
    """One synthesized evaluation item, with enough provenance to rebuild it."""

    id: str
    target_path: str
    noise_path: Optional[str]
    snr_db: float
    offset_samples: int
    noise_gain: float
    target_gain: float
    mixture_path: str
    modality_label: Modality
    task: TaskPayload
    item_seed: int

    def __post_init__(self):
        if not self.id:
            raise ValueError("id must be non-empty")
        if self.offset_samples < 0:
            raise ValueError("offset_samples must be >= 0")
        if self.noise_gain < 0:
            raise ValueError("noise_gain must be >= 0")
        finite = math.isfinite(self.snr_db)
        if finite and self.noise_path is None:
            raise ValueError("finite-SNR items need a noise stem path")
        if not finite and self.noise_gain != 0.0:
            raise ValueError("clean items must have zero noise gain")

    def to_obj(self) -> dict:
        return {
            "id": self.id,
            "target_path": self.target_path,
            "noise_path": self.noise_path,
            "snr_db": "inf" if math.isinf(self.snr_db) else self.snr_db,
            "offset_samples": self.offset_samples,
            "noise_gain": self.noise_gain,
            "target_gain": self.target_gain,
            "mixture_path": self.mixture_path,
            "modality_label": self.modality_label.value,
            "task": self.task.to_obj(),
            "item_seed": self.item_seed,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "MixtureItem":
        snr = obj["snr_db"]
        return cls(
            id=obj["id"],
            target_path=obj["target_path"],
            noise_path=obj["noise_path"],
            snr_db=math.inf if snr == "inf" else float(snr),
            offset_samples=int(obj["offset_samples"]),
            noise_gain=float(obj["noise_gain"]),
            target_gain=float(obj.get("target_gain", 1.0)),
            mixture_path=obj["mixture_path"],
            modality_label=parse_modality(obj["modality_label"]),
            task=TaskPayload.from_obj(obj["task"]),
            item_seed=int(obj["item_seed"]),
        )


def item_seed(global_seed: int, item_id: str) -> int:
    """Stable 64-bit per-item seed: blake2b-8 of "<seed>:<id>"."""
    digest = hashlib.blake2b(
        f"{global_seed}:{item_id}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def place_noise(
    target_len: int, noise: Waveform, rng: np.random.Generator
) -> tuple[Waveform, int]:
    """Drop the noise into a target-length timeline.

    Shorter noise is inserted whole at a uniformly drawn offset; noise at
    least as long as the target is cropped to its head (offset 0).
    """
    if target_len <= 0:
        raise ValueError("target_len must be positive")
    if len(noise) == 0:
        raise ZeroLengthAudioError("noise stem is empty")
    n = len(noise)
    if n >= target_len:
        return Waveform(noise.samples[:target_len].copy(), noise.sample_rate), 0
    offset = int(rng.integers(0, target_len - n + 1))
    placed = np.zeros(target_len)
    placed[offset : offset + n] = noise.samples
    return Waveform(placed, noise.sample_rate), offset


@dataclass(frozen=True)
class SynthesizedMix:
    """make_mixture output: the audio plus the numbers that produced it."""

    mixture: Waveform
    placed_noise: Waveform  # already scaled; zeros for the clean condition
    offset_samples: int
    noise_gain: float
    item_seed: int


def make_mixture(
    target: Waveform,
    noise: Optional[Waveform],
    snr_db: float,
    seed: int,
    item_id: str,
) -> SynthesizedMix:
    """Place and scale noise against a unity-gain target at the given SNR.

    The per-item generator is seeded from (seed, item_id); it draws the
    placement offset. +inf SNR means the clean condition: the mixture is
    the target itself and the noise gain is exactly 0.
    """
    seed64 = item_seed(seed, item_id)
    if math.isinf(snr_db) and snr_db > 0:
        silent = Waveform(np.zeros(len(target)), target.sample_rate)
        return SynthesizedMix(target, silent, 0, 0.0, seed64)
    if noise is None:
        raise ValueError("finite SNR needs a noise stem")
    rng = np.random.default_rng(seed64)
    placed, offset = place_noise(len(target), noise, rng)
    gain = snr_gain(energy(target), energy(placed), snr_db)
    scaled = Waveform(placed.samples * gain, placed.sample_rate)
    return SynthesizedMix(mix_add(target, scaled), scaled, offset, gain, seed64)


def measured_snr_db(target: Waveform, placed_noise: Waveform) -> float:
    """Energy-ratio SNR of stored stems over their full duration."""
    return 10.0 * math.log10(energy(target) / energy(placed_noise))


@dataclass(frozen=True)
class SourceRow:
    """One line of a source manifest: a task target or an interferer stem."""

    role: str  # target | interferer
    id: str
    path: str
    modality: Modality
    task: Optional[TaskPayload] = None

    def __post_init__(self):
        if self.role not in ("target", "interferer"):
            raise ValueError(f"unknown role {self.role!r}")
        if self.role == "target" and self.task is None:
            raise ValueError("target rows need a task payload")


def read_source_manifest(path: PathLike) -> list[SourceRow]:
    rows: list[SourceRow] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                task = obj.get("task")
                rows.append(
                    SourceRow(
                        role=obj["role"],
                        id=obj["id"],
                        path=obj["path"],
                        modality=parse_modality(obj["modality"]),
                        task=TaskPayload.from_obj(task) if task else None,
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
            if rows[-1].id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate id {rows[-1].id!r}")
            seen.add(rows[-1].id)
    if not rows:
        raise ManifestError(f"{path}: no rows")
    return rows


def write_manifest(items: Sequence[MixtureItem], path: PathLike) -> None:
    ordered = sorted(items, key=lambda it: it.id)
    with open(path, "w", encoding="utf-8") as fh:
        for it in ordered:
            fh.write(json.dumps(it.to_obj(), sort_keys=True) + "\n")


def read_manifest(path: PathLike) -> list[MixtureItem]:
    items: list[MixtureItem] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                items.append(MixtureItem.from_obj(json.loads(line)))
            except (KeyError, ValueError, TypeError) as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
    if not items:
        raise ManifestError(f"{path}: no rows")
    return items


def _snr_tag(snr_db: float) -> str:
    if math.isinf(snr_db):
        return "clean"
    return f"{snr_db:g}db"


def _load_at_rate(path: PathLike) -> Waveform:
    w = read_wav(path)
    if w.sample_rate != PIPELINE_RATE:
        w = resample(w, PIPELINE_RATE)
    return w


def build_dataset(
    source_manifest: PathLike,
    snr_grid: Sequence[float] = DEFAULT_SNR_GRID,
    seed: int = 0,
    out_dir: PathLike = "dataset",
    workers: int = 1,
) -> Path:
    """Synthesize every (target, snr) cell plus one clean row per target.

    Interferers come from the pool of the opposite modality; the per-item
    generator draws the pool index first, then the placement offset. All
    audio is written at the pipeline rate; the manifest is sorted by id, so
    output bytes do not depend on the worker count.
    """
    rows = read_source_manifest(source_manifest)
    targets = [r for r in rows if r.role == "target"]
    pools: dict[Modality, list[SourceRow]] = {
        Modality.SPEECH: [],
        Modality.NON_SPEECH: [],
    }
    for r in rows:
        if r.role == "interferer":
            pools[r.modality].append(r)
    for m in pools:
        pools[m].sort(key=lambda r: r.id)
    if not targets:
        raise ManifestError(f"{source_manifest}: no target rows")

    out = Path(out_dir)
    (out / "mix").mkdir(parents=True, exist_ok=True)
    (out / "stems").mkdir(parents=True, exist_ok=True)

    cells: list[tuple[SourceRow, float]] = []
    for t in sorted(targets, key=lambda r: r.id):
        opposite = (
            Modality.NON_SPEECH if t.modality is Modality.SPEECH else Modality.SPEECH
        )
        if not pools[opposite]:
            raise EmptyPoolError(
                f"no {opposite.value} interferers for target {t.id!r}"
            )
        for snr in snr_grid:
            cells.append((t, float(snr)))
        cells.append((t, math.inf))

    def synth(cell: tuple[SourceRow, float]) -> MixtureItem:
        t, snr = cell
        iid = f"{t.id}__{_snr_tag(snr)}"
        target_w = _load_at_rate(t.path)
        target_stem = out / "stems" / f"{t.id}.target.wav"
        if not target_stem.exists():
            write_wav(target_w, target_stem)

        if math.isinf(snr):
            mix = make_mixture(target_w, None, snr, seed, iid)
            noise_path = None
        else:
            opposite = (
                Modality.NON_SPEECH
                if t.modality is Modality.SPEECH
                else Modality.SPEECH
            )
            pool = pools[opposite]
            # distinct stream from the offset draw inside make_mixture
            rng = np.random.default_rng(item_seed(seed, iid + ":pick"))
            pick = pool[int(rng.integers(0, len(pool)))]
            noise_w = _load_at_rate(pick.path)
            mix = make_mixture(target_w, noise_w, snr, seed, iid)
            noise_stem = out / "stems" / f"{iid}.noise.wav"
            write_wav(mix.placed_noise, noise_stem)
            noise_path = str(noise_stem)

        mix_path = out / "mix" / f"{iid}.wav"
        write_wav(mix.mixture, mix_path)
        return MixtureItem(
            id=iid,
            target_path=str(target_stem),
            noise_path=noise_path,
            snr_db=snr,
            offset_samples=mix.offset_samples,
            noise_gain=mix.noise_gain,
            target_gain=1.0,
            mixture_path=str(mix_path),
            modality_label=t.modality,
            task=t.task,
            item_seed=mix.item_seed,
        )

    if workers > 1:
        # Stem writes race per target; pre-write them serially, then fan out.
        for t in sorted(targets, key=lambda r: r.id):
            stem = out / "stems" / f"{t.id}.target.wav"
            if not stem.exists():
                write_wav(_load_at_rate(t.path), stem)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            items = list(pool.map(synth, cells))
    else:
        items = [synth(c) for c in cells]

    manifest_path = out / "dataset.jsonl"
    write_manifest(items, manifest_path)
    return manifest_path

"""Noise-robust audio front end: separate a mixture into stems, route the
instruction to a modality, and blend the right stem back into the raw
signal before any downstream model sees it."""

__version__ = "0.1.0"

from .audio import (
    PIPELINE_RATE,
    Spectrogram,
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
from .errors import SepfuseError
from .fusion import FusionWeights, blend, default_weights, fuse
from .metrics import (
    AsrScore,
    MeanApResult,
    TagPrediction,
    asr_scores,
    average_precision,
    mean_ap,
    qa_acc,
    sdr,
    wer,
)
from .mixgen import (
    DEFAULT_SNR_GRID,
    MixtureItem,
    TaskPayload,
    build_dataset,
    make_mixture,
    measured_snr_db,
    place_noise,
    read_manifest,
    write_manifest,
)
from .protocol import (
    AdapterClient,
    AdapterEndpoint,
    AdapterMessage,
    AdapterResponse,
    adapter_call,
    run_adapter_check,
)
from .routing import (
    Modality,
    RoutingDecision,
    correct_rate,
    external_route,
    parse_modality,
    rule_route,
)
from .separation import (
    SeparationResult,
    SeparatorConfig,
    oracle_irm_separate,
    separate,
    spectral_gate_separate,
)

__all__ = [
    "PIPELINE_RATE",
    "Spectrogram",
    "StftParams",
    "Waveform",
    "istft",
    "mix_add",
    "read_wav",
    "resample",
    "snr_gain",
    "stft",
    "write_wav",
    "SepfuseError",
    "FusionWeights",
    "blend",
    "default_weights",
    "fuse",
    "AsrScore",
    "MeanApResult",
    "TagPrediction",
    "asr_scores",
    "average_precision",
    "mean_ap",
    "qa_acc",
    "sdr",
    "wer",
    "DEFAULT_SNR_GRID",
    "MixtureItem",
    "TaskPayload",
    "build_dataset",
    "make_mixture",
    "measured_snr_db",
    "place_noise",
    "read_manifest",
    "write_manifest",
    "AdapterClient",
    "AdapterEndpoint",
    "AdapterMessage",
    "AdapterResponse",
    "adapter_call",
    "run_adapter_check",
    "Modality",
    "RoutingDecision",
    "correct_rate",
    "external_route",
    "parse_modality",
    "rule_route",
    "SeparationResult",
    "SeparatorConfig",
    "oracle_irm_separate",
    "separate",
    "spectral_gate_separate",
    "__version__",
]

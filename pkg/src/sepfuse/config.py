"""Run configuration: a JSON file resolved into typed pieces.

Example:

    {
      "seed": 7,
      "out_dir": "runs/demo",
      "workers": 2,
      "snr_grid": [10, 5, 0, -5, -10],
      "separator": {"kind": "oracle-irm"},
      "router": {"kind": "rule"},
      "weights": {"speech_alpha": 0.5, "non_speech_alpha": 0.9},
      "adapters": {
        "echo": {"transport": "subprocess-stdio", "address": "python echo.py"}
      }
    }

Separator/router blocks reference adapters by name ({"kind": "external",
"adapter": "echo"}); names resolve against the adapters map at load time so
a dangling reference fails before any work starts.
"""

from __future__ import annotations

import hashlib
import json
import shlex
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

from .audio import StftParams
from .errors import ManifestError
from .fusion import FusionWeights
from .mixgen import DEFAULT_SNR_GRID
from .protocol import LOCAL_SOCKET, SUBPROCESS_STDIO, AdapterEndpoint
from .routing import Modality, parse_modality
from .separation import EXTERNAL, SEPARATOR_KINDS, SeparatorConfig

PathLike = Union[str, Path]

ROUTER_RULE = "rule"
ROUTER_EXTERNAL = "external"
ROUTER_FIXED = "fixed"
ROUTER_KINDS = (ROUTER_RULE, ROUTER_EXTERNAL, ROUTER_FIXED)


@dataclass(frozen=True)
class RouterConfig:
    kind: str = ROUTER_RULE
    adapter: Optional[AdapterEndpoint] = None
    fixed_label: Optional[Modality] = None

    def __post_init__(self):
        if self.kind not in ROUTER_KINDS:
            raise ValueError(f"unknown router kind {self.kind!r}")
        if self.kind == ROUTER_EXTERNAL and self.adapter is None:
            raise ValueError("external router needs an adapter endpoint")
        if self.kind == ROUTER_FIXED and self.fixed_label is None:
            raise ValueError("fixed router needs a label")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out_dir: str = "out"
    workers: int = 1
    snr_grid: tuple[float, ...] = DEFAULT_SNR_GRID
    separator: SeparatorConfig = field(default_factory=SeparatorConfig)
    router: RouterConfig = field(default_factory=RouterConfig)
    weights: FusionWeights = field(default_factory=FusionWeights)
    adapters: dict = field(default_factory=dict)  # name -> AdapterEndpoint

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not self.snr_grid:
            raise ValueError("snr_grid must be non-empty")


def _endpoint_from_obj(obj: dict) -> AdapterEndpoint:
    return AdapterEndpoint(
        transport=obj.get("transport", SUBPROCESS_STDIO),
        address=obj["address"],
        timeout=float(obj.get("timeout", 10.0)),
    )


def _resolve_adapter(ref: Optional[str], adapters: dict, ctx: str) -> AdapterEndpoint:
    if ref is None:
        raise ManifestError(f"{ctx}: external kind needs an 'adapter' name")
    if ref not in adapters:
        raise ManifestError(f"{ctx}: unknown adapter {ref!r}")
    return adapters[ref]


def config_from_obj(obj: dict) -> RunConfig:
    adapters = {
        name: _endpoint_from_obj(ep_obj)
        for name, ep_obj in obj.get("adapters", {}).items()
    }

    sep_obj = dict(obj.get("separator", {}))
    stft_obj = sep_obj.pop("stft", {})
    sep_kind = sep_obj.get("kind", "spectral-gate")
    if sep_kind not in SEPARATOR_KINDS:
        raise ManifestError(f"separator: unknown kind {sep_kind!r}")
    sep_adapter = None
    if sep_kind == EXTERNAL:
        sep_adapter = _resolve_adapter(sep_obj.pop("adapter", None), adapters, "separator")
    else:
        sep_obj.pop("adapter", None)
    separator = SeparatorConfig(
        kind=sep_kind,
        stft=StftParams(**stft_obj),
        mask_floor=float(sep_obj.get("mask_floor", 1e-8)),
        gate_threshold_db=float(sep_obj.get("gate_threshold_db", 6.0)),
        gate_quiet_fraction=float(sep_obj.get("gate_quiet_fraction", 0.1)),
        adapter=sep_adapter,
    )

    rt_obj = dict(obj.get("router", {}))
    rt_kind = rt_obj.get("kind", ROUTER_RULE)
    rt_adapter = None
    fixed = None
    if rt_kind == ROUTER_EXTERNAL:
        rt_adapter = _resolve_adapter(rt_obj.get("adapter"), adapters, "router")
    elif rt_kind == ROUTER_FIXED:
        label = rt_obj.get("label")
        if label is None:
            raise ManifestError("router: fixed kind needs a 'label'")
        fixed = parse_modality(label)
    router = RouterConfig(kind=rt_kind, adapter=rt_adapter, fixed_label=fixed)

    w_obj = obj.get("weights", {})
    weights = FusionWeights(
        speech_alpha=float(w_obj.get("speech_alpha", 0.5)),
        non_speech_alpha=float(w_obj.get("non_speech_alpha", 0.9)),
    )

    return RunConfig(
        seed=int(obj.get("seed", 0)),
        out_dir=str(obj.get("out_dir", "out")),
        workers=int(obj.get("workers", 1)),
        snr_grid=tuple(float(s) for s in obj.get("snr_grid", DEFAULT_SNR_GRID)),
        separator=separator,
        router=router,
        weights=weights,
        adapters=adapters,
    )


def load_config(path: PathLike) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ManifestError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ManifestError(f"config {path} must hold a JSON object")
    return config_from_obj(obj)


def apply_overrides(
    config: RunConfig,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    out_dir: Optional[str] = None,
) -> RunConfig:
    """Command-line flags win over file values."""
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if workers is not None:
        updates["workers"] = workers
    if out_dir is not None:
        updates["out_dir"] = out_dir
    return replace(config, **updates) if updates else config


def check_endpoints_resolvable(config: RunConfig) -> None:
    """Fail before the run if a configured adapter cannot exist.

    Subprocess commands must name a findable executable; socket paths must
    already exist on disk.
    """
    for name, ep in sorted(config.adapters.items()):
        if ep.transport == SUBPROCESS_STDIO:
            argv = shlex.split(ep.address)
            exe = argv[0] if argv else ""
            if not (shutil.which(exe) or Path(exe).exists()):
                raise ManifestError(
                    f"adapter {name!r}: executable {exe!r} not found"
                )
        elif ep.transport == LOCAL_SOCKET:
            if not Path(ep.address).exists():
                raise ManifestError(
                    f"adapter {name!r}: socket {ep.address} does not exist"
                )


def config_hash(config: RunConfig) -> str:
    """Stable digest of the resolved configuration, for report provenance."""
    obj = {
        "seed": config.seed,
        "out_dir": config.out_dir,
        "workers": config.workers,
        "snr_grid": list(config.snr_grid),
        "separator": {
            "kind": config.separator.kind,
            "stft": {
                "window_size": config.separator.stft.window_size,
                "hop_size": config.separator.stft.hop_size,
                "window_kind": config.separator.stft.window_kind,
            },
            "mask_floor": config.separator.mask_floor,
            "gate_threshold_db": config.separator.gate_threshold_db,
            "gate_quiet_fraction": config.separator.gate_quiet_fraction,
            "adapter": config.separator.adapter.address
            if config.separator.adapter
            else None,
        },
        "router": {
            "kind": config.router.kind,
            "adapter": config.router.adapter.address if config.router.adapter else None,
            "label": config.router.fixed_label.value
            if config.router.fixed_label
            else None,
        },
        "weights": {
            "speech_alpha": config.weights.speech_alpha,
            "non_speech_alpha": config.weights.non_speech_alpha,
        },
        "adapters": {
            name: {"transport": ep.transport, "address": ep.address}
            for name, ep in sorted(config.adapters.items())
        },
    }
    blob = json.dumps(obj, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]

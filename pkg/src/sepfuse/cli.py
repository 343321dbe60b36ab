"""Command-line front end.

Subcommands: mix, enhance, sweep-alpha, eval, sdr, route, separate,
adapter-check. Global flags (--config, --seed, --workers, --out) apply to
every subcommand; flag values override the config file. Every command
prints a single machine-readable JSON summary line last; exit code 0 means
success, anything else comes with that summary naming the failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional

from .audio import read_wav, write_wav
from .config import (
    ROUTER_EXTERNAL,
    RunConfig,
    apply_overrides,
    check_endpoints_resolvable,
    load_config,
)
from .errors import SepfuseError
from .metrics import sdr
from .mixgen import build_dataset, read_manifest
from .pipeline import (
    ClientPool,
    evaluate,
    read_predictions,
    run_enhance,
    sweep_alpha,
)
from .protocol import AdapterEndpoint, run_adapter_check
from .routing import external_route, rule_route
from .separation import (
    ORACLE_IRM,
    SPECTRAL_GATE,
    oracle_irm_separate,
    spectral_gate_separate,
)


def _emit(obj: dict) -> None:
    print(json.dumps(obj, sort_keys=True))


def _fail(command: str, exc: Exception) -> int:
    _emit(
        {
            "status": "error",
            "command": command,
            "error": {"type": type(exc).__name__, "message": str(exc)},
        }
    )
    return 1


def _load_run_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    return apply_overrides(config, args.seed, args.workers, args.out)


def cmd_mix(args) -> int:
    config = _load_run_config(args)
    manifest = build_dataset(
        source_manifest=args.source,
        snr_grid=config.snr_grid,
        seed=config.seed,
        out_dir=config.out_dir,
        workers=config.workers,
    )
    items = read_manifest(manifest)
    counts: dict[str, int] = {}
    for it in items:
        key = "inf" if math.isinf(it.snr_db) else f"{it.snr_db:g}"
        counts[key] = counts.get(key, 0) + 1
    _emit(
        {
            "status": "ok",
            "command": "mix",
            "manifest": str(manifest),
            "n_items": len(items),
            "counts_per_snr": counts,
        }
    )
    return 0


def cmd_enhance(args) -> int:
    config = _load_run_config(args)
    check_endpoints_resolvable(config)
    items = read_manifest(args.manifest)
    run = run_enhance(items, config)
    _emit(
        {
            "status": "ok" if not run.all_failed else "error",
            "command": "enhance",
            "log": str(run.log_path),
            "n_ok": run.n_ok,
            "n_failed": run.n_failed,
        }
    )
    return 0 if not run.all_failed else 1


def cmd_sweep_alpha(args) -> int:
    config = _load_run_config(args)
    check_endpoints_resolvable(config)
    items = read_manifest(args.manifest)
    grid = [float(a) for a in args.alphas.split(",") if a.strip()]
    if not grid:
        raise SepfuseError("empty alpha grid")
    report = sweep_alpha(items, config, grid)
    report_path = Path(config.out_dir) / "sweep_report.jsonl"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report.write_jsonl(report_path)
    sys.stdout.write(report.render_text())
    _emit(
        {
            "status": "ok",
            "command": "sweep-alpha",
            "report": str(report_path),
            "n_rows": len(report.rows),
        }
    )
    return 0


def cmd_eval(args) -> int:
    config = _load_run_config(args)
    items = read_manifest(args.manifest)
    predictions = read_predictions(args.predictions)
    report = evaluate(items, predictions, config)
    report_path = Path(config.out_dir) / "eval_report.jsonl"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report.write_jsonl(report_path)
    sys.stdout.write(report.render_text())
    n_excluded = sum(r.n_excluded for r in report.rows)
    _emit(
        {
            "status": "ok",
            "command": "eval",
            "report": str(report_path),
            "n_rows": len(report.rows),
            "n_excluded_items": n_excluded,
        }
    )
    return 0


def cmd_sdr(args) -> int:
    ref = read_wav(args.ref)
    est = read_wav(args.est)
    value = sdr(ref, est)
    _emit({"status": "ok", "command": "sdr", "sdr_db": round(value, 6)})
    return 0


def cmd_route(args) -> int:
    config = _load_run_config(args)
    if args.router == "rule":
        decision = rule_route(args.instruction)
    else:
        check_endpoints_resolvable(config)
        router = config.router
        if router.kind != ROUTER_EXTERNAL:
            raise SepfuseError("config does not define an external router")
        pool = ClientPool()
        try:
            decision = external_route(pool.get(router.adapter), args.instruction)
        finally:
            pool.close_all()
    _emit(
        {
            "status": "ok",
            "command": "route",
            "modality": decision.modality.value,
            "router": decision.router_tag,
        }
    )
    return 0


def cmd_separate(args) -> int:
    config = _load_run_config(args)
    mixture = read_wav(args.input)
    kind = args.kind or config.separator.kind
    if kind == ORACLE_IRM:
        if not (args.speech_ref and args.noise_ref):
            raise SepfuseError("oracle-irm needs --speech-ref and --noise-ref")
        stems = oracle_irm_separate(
            mixture,
            read_wav(args.speech_ref),
            read_wav(args.noise_ref),
            config.separator.stft,
            config.separator.mask_floor,
        )
    elif kind == SPECTRAL_GATE:
        stems = spectral_gate_separate(
            mixture,
            config.separator.stft,
            config.separator.gate_threshold_db,
            config.separator.gate_quiet_fraction,
        )
    else:
        raise SepfuseError(f"separate subcommand does not drive kind {kind!r}")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = Path(args.input).stem
    speech_path = out / f"{base}.speech.wav"
    nonspeech_path = out / f"{base}.nonspeech.wav"
    write_wav(stems.speech, speech_path)
    write_wav(stems.nonspeech, nonspeech_path)
    _emit(
        {
            "status": "ok",
            "command": "separate",
            "separator": stems.source_tag,
            "speech": str(speech_path),
            "nonspeech": str(nonspeech_path),
        }
    )
    return 0


def cmd_adapter_check(args) -> int:
    if args.adapter:
        config = _load_run_config(args)
        if args.adapter not in config.adapters:
            raise SepfuseError(f"config defines no adapter named {args.adapter!r}")
        endpoint = config.adapters[args.adapter]
    elif args.address:
        endpoint = AdapterEndpoint(
            transport=args.transport, address=args.address, timeout=args.timeout
        )
    else:
        raise SepfuseError("adapter-check needs --adapter <name> or --address")
    results = run_adapter_check(endpoint)
    for r in results:
        line = f"{'PASS' if r.passed else 'FAIL'} {r.name}"
        if r.detail:
            line += f": {r.detail}"
        print(line)
    ok = all(r.passed for r in results)
    _emit(
        {
            "status": "ok" if ok else "error",
            "command": "adapter-check",
            "n_checks": len(results),
            "n_failed": sum(1 for r in results if not r.passed),
            "failed": [r.name for r in results if not r.passed],
        }
    )
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sepfuse",
        description="Separate, route, and blend noisy audio; build and score "
        "SNR-controlled evaluation sets.",
    )
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--workers", type=int, help="override worker count")
    parser.add_argument("--out", help="override output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mix", help="synthesize an SNR-graded dataset")
    p.add_argument("--source", required=True, help="source manifest (JSONL)")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("enhance", help="separate/route/fuse every manifest item")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("sweep-alpha", help="re-enhance across blend weights")
    p.add_argument("--manifest", required=True)
    p.add_argument("--alphas", required=True, help="comma-separated weights")
    p.set_defaults(func=cmd_sweep_alpha)

    p = sub.add_parser("eval", help="score a predictions file against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--predictions", required=True, help="JSONL keyed by item id")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sdr", help="signal-to-distortion ratio of two WAVs")
    p.add_argument("--ref", required=True)
    p.add_argument("--est", required=True)
    p.set_defaults(func=cmd_sdr)

    p = sub.add_parser("route", help="route one instruction to a modality")
    p.add_argument("--instruction", required=True)
    p.add_argument("--router", choices=["rule", "external"], default="rule")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("separate", help="split one WAV into stems")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=[ORACLE_IRM, SPECTRAL_GATE])
    p.add_argument("--speech-ref")
    p.add_argument("--noise-ref")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("adapter-check", help="run the adapter conformance suite")
    p.add_argument("--adapter", help="adapter name from the config file")
    p.add_argument("--transport", default="subprocess-stdio")
    p.add_argument("--address", help="command line or socket path")
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=cmd_adapter_check)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SepfuseError as exc:
        return _fail(args.command, exc)
    except (OSError, ValueError) as exc:
        return _fail(args.command, exc)


if __name__ == "__main__":
    sys.exit(main())

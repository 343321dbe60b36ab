#!/usr/bin/env python3
"""Bridge adapter template: protocol on one side, an inference backend on the other.

The wire handling here is production-shaped; the backend is a stand-in. To
wrap a real model, implement the Backend interface (load, rate, separate,
route, transcribe, tag, answer) and register it in BACKENDS. The bridge owns
all audio-rate conversion: requests arrive at the caller's rate, the backend
sees its native rate, and responses go back out at the caller's rate. Model
dependencies stay inside the backend so this file never imports them at
parse time.

Two deliberate duplications with the harness side of the boundary:
modality-label normalization and the malformed-line error shape. Each side
validates independently rather than trusting the other.
"""

from __future__ import annotations

import argparse
import array
import base64
import json
import sys
import wave

PROTOCOL = "sepfuse-adapter/1"
HANDSHAKE = "handshake"
ALL_OPS = ("separate", "route", "answer", "transcribe", "tag")

# Accepted canonical wire labels plus spellings a backend might emit.
_LABEL_CANON = {
    "speech": "speech",
    "voice": "speech",
    "spoken": "speech",
    "non-speech": "non-speech",
    "nonspeech": "non-speech",
    "non speech": "non-speech",
    "mixture": "mixture",
    "mixed": "mixture",
    "both": "mixture",
}


def canonical_label(raw: str) -> str:
    """Normalize a backend routing label to a canonical wire label.

    Case, surrounding whitespace, and a few spelling variants are forgiven;
    anything else is a backend bug and raises.
    """
    key = str(raw).strip().casefold()
    if key not in _LABEL_CANON:
        raise ValueError(f"backend produced an unknown modality label: {raw!r}")
    return _LABEL_CANON[key]


def _pcm_to_floats(pcm: bytes) -> list[float]:
    ints = array.array("h")
    ints.frombytes(pcm)
    if sys.byteorder == "big":
        ints.byteswap()
    return [v / 32768.0 for v in ints]


def _floats_to_pcm(samples) -> bytes:
    ints = array.array(
        "h",
        (max(-32768, min(32767, round(v * 32768.0))) for v in samples),
    )
    if sys.byteorder == "big":
        ints.byteswap()
    return ints.tobytes()


def resample_linear(samples: list[float], src_rate: int, dst_rate: int) -> list[float]:
    """Linear-interpolation rate conversion.

    Good enough for shuttling audio to a backend and back in a template;
    swap in a polyphase resampler when wrapping a model that cares.
    """
    if src_rate <= 0 or dst_rate <= 0:
        raise ValueError("sample rates must be positive")
    if src_rate == dst_rate or len(samples) < 2:
        return list(samples)
    n_out = max(1, round(len(samples) * dst_rate / src_rate))
    if n_out == 1:
        return [samples[0]]
    step = (len(samples) - 1) / (n_out - 1)
    out = []
    last = len(samples) - 1
    for i in range(n_out):
        pos = i * step
        j = int(pos)
        if j >= last:
            out.append(samples[last])
            continue
        frac = pos - j
        out.append(samples[j] * (1.0 - frac) + samples[j + 1] * frac)
    return out


def _fit_length(samples: list[float], n: int) -> list[float]:
    if len(samples) >= n:
        return samples[:n]
    return samples + [0.0] * (n - len(samples))


class StubBackend:
    """Deterministic fake model with a non-native sample rate.

    separate() is a one-pole lowpass plus its residual, so the two stems sum
    back to the input at the backend rate; route() answers in deliberately
    messy casing to prove the bridge normalizes labels before they reach the
    wire.
    """

    name = "stub"
    rate = 8000

    def load(self) -> None:
        return None

    def separate(self, samples: list[float]) -> tuple[list[float], list[float]]:
        smoothed = []
        acc = 0.0
        for v in samples:
            acc += 0.25 * (v - acc)
            smoothed.append(acc)
        residual = [v - s for v, s in zip(samples, smoothed)]
        return smoothed, residual

    def route(self, instruction: str) -> str:
        text = instruction.casefold()
        if any(w in text for w in ("transcribe", "speech", "spoken", "said", "words")):
            return "Speech"
        if any(w in text for w in ("sound", "noise", "music", "background", "scene")):
            return "NON-SPEECH"
        return "Mixture"

    def transcribe(self, samples: list[float], instruction: str) -> str:
        return "stub transcript"

    def tag(self, samples: list[float], classes: list[str]) -> dict:
        return {c: round(1.0 / (i + 1), 4) for i, c in enumerate(classes)}

    def answer(self, samples: list[float], question: str, options: list[str]) -> str:
        return options[0] if options else ""


class BrokenBackend:
    """Fails at load time; exists to exercise the handshake error path."""

    name = "broken"
    rate = 8000

    def load(self) -> None:
        raise RuntimeError("backend weights are not available in this environment")


BACKENDS = {"stub": StubBackend, "broken": BrokenBackend}


class Bridge:
    def __init__(self, backend_name: str, ops: tuple[str, ...]):
        self.ops = ops
        self.load_error = None
        try:
            self.backend = BACKENDS[backend_name]()
            self.backend.load()
        except Exception as exc:
            self.backend = None
            self.load_error = f"{type(exc).__name__}: {exc}"

    def _load_audio(self, payload: dict) -> tuple[list[float], int]:
        audio = payload.get("audio")
        if not isinstance(audio, dict):
            raise ValueError("payload lacks an audio object")
        if "pcm16_b64" in audio:
            pcm = base64.b64decode(audio["pcm16_b64"])
            return _pcm_to_floats(pcm), int(audio["rate"])
        if "path" in audio:
            with wave.open(str(audio["path"]), "rb") as fh:
                if fh.getsampwidth() != 2 or fh.getnchannels() != 1:
                    raise ValueError("only 16-bit mono wav paths are supported")
                pcm = fh.readframes(fh.getnframes())
                return _pcm_to_floats(pcm), fh.getframerate()
        raise ValueError("audio object needs pcm16_b64 or path")

    def _backend_audio(self, payload: dict) -> tuple[list[float], int, int]:
        samples, rate = self._load_audio(payload)
        return resample_linear(samples, rate, self.backend.rate), rate, len(samples)

    def _inline(self, samples: list[float], caller_rate: int, n: int) -> dict:
        back = resample_linear(samples, self.backend.rate, caller_rate)
        return {
            "pcm16_b64": base64.b64encode(_floats_to_pcm(_fit_length(back, n))).decode(
                "ascii"
            ),
            "rate": caller_rate,
        }

    def _dispatch(self, op: str, payload: dict) -> dict:
        if op == "separate":
            native, caller_rate, n = self._backend_audio(payload)
            speech, nonspeech = self.backend.separate(native)
            # Both stems leave at the caller's rate and the input's length.
            return {
                "speech": self._inline(speech, caller_rate, n),
                "nonspeech": self._inline(nonspeech, caller_rate, n),
            }
        if op == "route":
            instruction = str(payload.get("instruction", ""))
            if not instruction:
                raise ValueError("route needs a non-empty instruction")
            return {"modality": canonical_label(self.backend.route(instruction))}
        if op == "transcribe":
            native, _, _ = self._backend_audio(payload)
            text = self.backend.transcribe(native, str(payload.get("instruction", "")))
            return {"text": str(text)}
        if op == "tag":
            classes = payload.get("classes", [])
            if not isinstance(classes, list):
                raise ValueError("classes must be a list")
            native, _, _ = self._backend_audio(payload)
            scores = self.backend.tag(native, [str(c) for c in classes])
            return {"scores": {str(k): float(v) for k, v in scores.items()}}
        if op == "answer":
            options = payload.get("options", [])
            if not isinstance(options, list):
                raise ValueError("options must be a list")
            native, _, _ = self._backend_audio(payload)
            choice = self.backend.answer(
                native, str(payload.get("question", "")), [str(o) for o in options]
            )
            return {"choice": str(choice)}
        raise AssertionError(f"dispatch on undeclared op {op!r}")

    def respond(self, line: str) -> dict:
        try:
            msg = json.loads(line)
        except ValueError:
            return _error(None, "malformed-line", f"not a protocol object: {line!r}")
        if not isinstance(msg, dict):
            return _error(None, "malformed-line", f"not a protocol object: {line!r}")
        req_id = msg.get("id")
        if req_id is not None and not isinstance(req_id, str):
            req_id = None
        op = msg.get("op")
        if not isinstance(op, str):
            return _error(req_id, "malformed-line", f"request lacks an op: {line!r}")
        payload = msg.get("payload", {})
        if payload is None:
            payload = {}
        if not isinstance(payload, dict):
            return _error(req_id, "bad-payload", "payload must be an object")
        if self.load_error is not None:
            # The process keeps serving so the caller sees the reason per
            # request instead of a dead pipe.
            return _error(req_id, "backend-unavailable", self.load_error)
        if op == HANDSHAKE:
            return {
                "id": req_id,
                "result": {
                    "protocol": PROTOCOL,
                    "name": f"bridge/{self.backend.name}",
                    "ops": list(self.ops),
                },
            }
        if op not in ALL_OPS:
            return _error(req_id, "unknown-op", f"unsupported op {op!r}")
        if op not in self.ops:
            return _error(req_id, "undeclared-op", f"op {op!r} is not exposed")
        try:
            return {"id": req_id, "result": self._dispatch(op, payload)}
        except (ValueError, OSError, wave.Error) as exc:
            return _error(req_id, "bad-payload", str(exc))
        except Exception as exc:
            return _error(req_id, "backend-error", f"{type(exc).__name__}: {exc}")


def _error(req_id, code: str, message: str) -> dict:
    return {"id": req_id, "error": {"code": code, "message": message}}


def serve(bridge: Bridge, in_stream, out_stream) -> None:
    for raw in in_stream:
        line = raw.strip()
        if not line:
            continue
        out_stream.write(json.dumps(bridge.respond(line), sort_keys=True) + "\n")
        out_stream.flush()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="adapter that forwards wire-protocol ops to a pluggable backend"
    )
    parser.add_argument("--backend", default="stub", choices=sorted(BACKENDS))
    parser.add_argument(
        "--ops",
        default=",".join(ALL_OPS),
        help="comma-separated subset of ops to expose",
    )
    args = parser.parse_args(argv)
    ops = tuple(s.strip() for s in args.ops.split(",") if s.strip())
    bad = [op for op in ops if op not in ALL_OPS]
    if bad or not ops:
        parser.error(f"--ops must name a non-empty subset of {ALL_OPS}, got {args.ops!r}")
    serve(Bridge(args.backend, ops), sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())

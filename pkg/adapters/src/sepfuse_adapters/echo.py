#!/usr/bin/env python3
"""Identity adapter: the smallest useful speaker of the wire protocol.

Every op answers with either the input itself or a fixed sentinel, so a
harness pointed at this process can exercise framing, id echo, and error
handling without any model in the loop. One JSON request per stdin line,
one JSON response per stdout line, nothing else on stdout.

Runs as a plain script (`python3 echo.py`) or via the packaged
`sepfuse-echo-adapter` entry point.
"""

from __future__ import annotations

import base64
import json
import sys
import wave

PROTOCOL = "sepfuse-adapter/1"
HANDSHAKE = "handshake"
OPS = ("separate", "route", "answer", "transcribe", "tag")

TRANSCRIPT_SENTINEL = "echo adapter fixed transcript"
CHOICE_SENTINEL = "echo"


def _error(req_id, code: str, message: str) -> dict:
    return {"id": req_id, "error": {"code": code, "message": message}}


def _load_pcm(payload: dict) -> tuple[bytes, int]:
    """Return (pcm16 bytes, rate) from an inline or path audio payload."""
    audio = payload.get("audio")
    if not isinstance(audio, dict):
        raise ValueError("payload lacks an audio object")
    if "pcm16_b64" in audio:
        return base64.b64decode(audio["pcm16_b64"]), int(audio["rate"])
    if "path" in audio:
        with wave.open(str(audio["path"]), "rb") as fh:
            if fh.getsampwidth() != 2 or fh.getnchannels() != 1:
                raise ValueError("only 16-bit mono wav paths are supported")
            return fh.readframes(fh.getnframes()), fh.getframerate()
    raise ValueError("audio object needs pcm16_b64 or path")


def _inline(pcm: bytes, rate: int) -> dict:
    return {"pcm16_b64": base64.b64encode(pcm).decode("ascii"), "rate": rate}


def _dispatch(op: str, payload: dict) -> dict:
    if op == "separate":
        pcm, rate = _load_pcm(payload)
        # Identity split: input becomes the speech stem, digital silence of
        # the same length becomes the nonspeech stem.
        return {
            "speech": _inline(pcm, rate),
            "nonspeech": _inline(b"\x00" * len(pcm), rate),
        }
    if op == "route":
        if not str(payload.get("instruction", "")):
            raise ValueError("route needs a non-empty instruction")
        return {"modality": "mixture"}
    if op == "transcribe":
        return {"text": TRANSCRIPT_SENTINEL}
    if op == "tag":
        classes = payload.get("classes", [])
        if not isinstance(classes, list):
            raise ValueError("classes must be a list")
        return {"scores": {str(c): 0.0 for c in classes}}
    if op == "answer":
        return {"choice": CHOICE_SENTINEL}
    raise AssertionError(f"dispatch on undeclared op {op!r}")


def respond(line: str) -> dict:
    """Map one raw request line to one response object.

    Malformed lines never kill the stream; they come back as an error object
    quoting the offending line, with a null id when none could be recovered.
    """
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
    if op == HANDSHAKE:
        return {
            "id": req_id,
            "result": {"protocol": PROTOCOL, "name": "echo", "ops": list(OPS)},
        }
    if op not in OPS:
        return _error(req_id, "unknown-op", f"unsupported op {op!r}")
    try:
        return {"id": req_id, "result": _dispatch(op, payload)}
    except (ValueError, OSError, wave.Error) as exc:
        return _error(req_id, "bad-payload", str(exc))


def serve(in_stream, out_stream) -> None:
    for raw in in_stream:
        line = raw.strip()
        if not line:
            continue
        out_stream.write(json.dumps(respond(line), sort_keys=True) + "\n")
        out_stream.flush()


def main(argv=None) -> int:
    serve(sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Adapter wire protocol: newline-delimited JSON over subprocess stdio or a
local socket.

One request object per line: {"id", "op", "payload"}; one response per
request: {"id", "result"} or {"id", "error": {"code", "message"}}, never
both. Audio payloads travel as {"path": ...} or {"pcm16_b64": ..., "rate":
...}. A "handshake" control op lets adapters declare which task ops they
serve before any work is sent.
"""

from __future__ import annotations

import base64
import json
import queue
import shlex
import socket
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .audio import Waveform
from .errors import (
    AdapterError,
    AdapterIdMismatchError,
    AdapterProtocolError,
    AdapterRemoteError,
    AdapterTimeoutError,
)

PROTOCOL_NAME = "sepfuse-adapter/1"
HANDSHAKE_OP = "handshake"
TASK_OPS = ("separate", "route", "answer", "transcribe", "tag")

SUBPROCESS_STDIO = "subprocess-stdio"
LOCAL_SOCKET = "local-socket"


@dataclass(frozen=True)
class AdapterEndpoint:
    """Where an adapter lives: a command line to spawn or a socket to dial."""

    transport: str  # subprocess-stdio | local-socket
    address: str  # command line or socket path
    timeout: float = 10.0

    def __post_init__(self):
        if self.transport not in (SUBPROCESS_STDIO, LOCAL_SOCKET):
            raise ValueError(f"unknown transport {self.transport!r}")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class AdapterMessage:
    id: str
    op: str
    payload: dict = field(default_factory=dict)

    def to_line(self) -> str:
        return json.dumps(
            {"id": self.id, "op": self.op, "payload": self.payload},
            sort_keys=True,
        )


@dataclass(frozen=True)
class AdapterResponse:
    id: Optional[str]
    result: Optional[dict]
    error: Optional[dict]

    @property
    def ok(self) -> bool:
        return self.error is None


def encode_audio(w: Waveform) -> dict:
    """Inline-PCM encoding of a waveform (16-bit little-endian, base64)."""
    q = np.rint(np.clip(w.samples, -1.0, 1.0) * 32768.0)
    q = np.clip(q, -32768, 32767).astype("<i2")
    return {
        "pcm16_b64": base64.b64encode(q.tobytes()).decode("ascii"),
        "rate": w.sample_rate,
    }


def decode_audio(obj: dict) -> Waveform:
    """Decode an audio payload, inline PCM or a WAV path."""
    if "pcm16_b64" in obj:
        raw = base64.b64decode(obj["pcm16_b64"])
        samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
        return Waveform(samples, int(obj["rate"]))
    if "path" in obj:
        from .audio import read_wav

        return read_wav(obj["path"])
    raise AdapterProtocolError(f"audio payload needs pcm16_b64 or path: {obj}")


def parse_response_line(line: str) -> AdapterResponse:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise AdapterProtocolError(f"unparseable response line: {line!r}") from exc
    if not isinstance(obj, dict):
        raise AdapterProtocolError(f"response must be an object: {line!r}")
    result = obj.get("result")
    error = obj.get("error")
    if (result is None) == (error is None):
        raise AdapterProtocolError(
            f"response must carry exactly one of result/error: {line!r}"
        )
    if error is not None and not isinstance(error, dict):
        raise AdapterProtocolError(f"error field must be an object: {line!r}")
    rid = obj.get("id")
    return AdapterResponse(id=rid, result=result, error=error)


class _StdioTransport:
    """Line transport over a child process's stdin/stdout."""

    def __init__(self, command: str):
        argv = shlex.split(command)
        try:
            self.proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise AdapterError(f"cannot launch adapter {command!r}: {exc}") from exc
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF sentinel

    def send_line(self, line: str) -> None:
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise AdapterError(f"adapter stdin closed: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise AdapterTimeoutError(f"no response within {timeout}s") from None
        if line is None:
            raise AdapterError("adapter process closed its output stream")
        return line.rstrip("\n")

    def pending_line(self, grace: float) -> Optional[str]:
        """Return a line if one shows up within the grace window, else None."""
        try:
            line = self._lines.get(timeout=grace)
        except queue.Empty:
            return None
        return line.rstrip("\n") if line is not None else None

    def close(self):
        for stream in (self.proc.stdin,):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


class _SocketTransport:
    """Line transport over a Unix domain socket."""

    def __init__(self, path: str, timeout: float):
        self.sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        try:
            self.sock.connect(path)
        except OSError as exc:
            raise AdapterError(f"cannot connect to {path}: {exc}") from exc
        self.sock.settimeout(timeout)
        self._file = self.sock.makefile("rw", encoding="utf-8", newline="\n")

    def send_line(self, line: str) -> None:
        try:
            self._file.write(line + "\n")
            self._file.flush()
        except OSError as exc:
            raise AdapterError(f"socket write failed: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        self.sock.settimeout(timeout)
        try:
            line = self._file.readline()
        except socket.timeout:
            raise AdapterTimeoutError(f"no response within {timeout}s") from None
        if line == "":
            raise AdapterError("adapter closed the socket")
        return line.rstrip("\n")

    def pending_line(self, grace: float) -> Optional[str]:
        self.sock.settimeout(grace)
        try:
            line = self._file.readline()
        except socket.timeout:
            return None
        return line.rstrip("\n") if line else None

    def close(self):
        try:
            self._file.close()
        finally:
            self.sock.close()


class AdapterClient:
    """One connection to one adapter; requests are serialized per client."""

    def __init__(self, endpoint: AdapterEndpoint):
        self.endpoint = endpoint
        if endpoint.transport == SUBPROCESS_STDIO:
            self._transport = _StdioTransport(endpoint.address)
        else:
            self._transport = _SocketTransport(endpoint.address, endpoint.timeout)
        self._lock = threading.Lock()
        self._seq = 0

    def _next_id(self) -> str:
        self._seq += 1
        return f"req-{self._seq:06d}"

    def call(self, msg: AdapterMessage) -> AdapterResponse:
        """Send one request and read its one response (id must echo)."""
        with self._lock:
            self._transport.send_line(msg.to_line())
            line = self._transport.recv_line(self.endpoint.timeout)
        resp = parse_response_line(line)
        if resp.id != msg.id:
            raise AdapterIdMismatchError(
                f"sent id {msg.id!r}, got {resp.id!r}"
            )
        return resp

    def request(self, op: str, payload: dict) -> dict:
        """Call and unwrap: returns the result dict or raises AdapterRemoteError."""
        resp = self.call(AdapterMessage(self._next_id(), op, payload))
        if not resp.ok:
            err = resp.error or {}
            raise AdapterRemoteError(
                str(err.get("code", "adapter-error")),
                str(err.get("message", "")),
            )
        return resp.result

    def handshake(self) -> dict:
        return self.request(HANDSHAKE_OP, {})

    # raw line access for the conformance checker
    def send_raw_line(self, line: str) -> None:
        self._transport.send_line(line)

    def recv_raw_line(self, timeout: Optional[float] = None) -> str:
        return self._transport.recv_line(timeout or self.endpoint.timeout)

    def pending_raw_line(self, grace: float = 0.25) -> Optional[str]:
        return self._transport.pending_line(grace)

    def close(self):
        self._transport.close()

    def __enter__(self) -> "AdapterClient":
        return self

    def __exit__(self, *exc):
        self.close()


def adapter_call(endpoint: AdapterEndpoint, msg: AdapterMessage) -> AdapterResponse:
    """One-shot request/response against a fresh connection."""
    with AdapterClient(endpoint) as client:
        return client.call(msg)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _check(name: str, cond: bool, detail: str = "") -> CheckResult:
    return CheckResult(name=name, passed=cond, detail=detail if not cond else "")


def run_adapter_check(endpoint: AdapterEndpoint) -> list[CheckResult]:
    """Conformance suite every adapter must pass.

    Covers: handshake, id echo, a happy path per declared op, malformed-line
    resilience, unknown-op rejection, and one-response-per-request.
    """
    from .routing import parse_modality

    results: list[CheckResult] = []
    client = AdapterClient(endpoint)
    try:
        # 1. handshake declares the op set
        try:
            hs = client.request(HANDSHAKE_OP, {})
            ops = hs.get("ops", [])
            results.append(
                _check(
                    "handshake",
                    isinstance(ops, list) and len(ops) > 0,
                    f"handshake result lacked a non-empty ops list: {hs}",
                )
            )
        except AdapterError as exc:
            results.append(_check("handshake", False, str(exc)))
            return results
        declared = [op for op in TASK_OPS if op in ops]

        # 2. id echo with a distinctive id
        probe_id = "conf-7f3a9c"
        probe_op = declared[0] if declared else HANDSHAKE_OP
        probe_payload = (
            {"instruction": "probe"} if probe_op == "route" else _happy_payload(probe_op)
        )
        try:
            resp = client.call(AdapterMessage(probe_id, probe_op, probe_payload))
            results.append(
                _check("id-echo", resp.id == probe_id, f"got id {resp.id!r}")
            )
        except AdapterError as exc:
            results.append(_check("id-echo", False, str(exc)))

        # 3. happy path per declared op
        for op in declared:
            try:
                result = client.request(op, _happy_payload(op))
                ok, why = _validate_happy(op, result, parse_modality)
                results.append(_check(f"op-{op}", ok, why))
            except AdapterError as exc:
                results.append(_check(f"op-{op}", False, str(exc)))

        # 4. malformed line -> error object, stream keeps serving
        try:
            client.send_raw_line("this line is not a protocol object")
            raw = client.recv_raw_line()
            resp = parse_response_line(raw)
            results.append(
                _check(
                    "malformed-line",
                    not resp.ok,
                    f"expected an error object, got {raw!r}",
                )
            )
        except AdapterError as exc:
            results.append(_check("malformed-line", False, str(exc)))

        # 5. unknown op rejected without killing the stream
        try:
            resp = client.call(AdapterMessage("conf-unknown", "frobnicate", {}))
            results.append(
                _check(
                    "unknown-op",
                    not resp.ok,
                    f"expected an error object, got {resp}",
                )
            )
        except AdapterError as exc:
            results.append(_check("unknown-op", False, str(exc)))

        # 6. exactly one response per request (no stray output afterwards)
        try:
            client.request(HANDSHAKE_OP, {})
            stray = client.pending_raw_line(grace=0.25)
            results.append(
                _check(
                    "one-response-per-request",
                    stray is None,
                    f"stray line after response: {stray!r}",
                )
            )
        except AdapterError as exc:
            results.append(_check("one-response-per-request", False, str(exc)))
    finally:
        client.close()
    return results


def _happy_payload(op: str) -> dict:
    if op == "route":
        return {"instruction": "Transcribe the spoken content."}
    t = np.arange(1600) / 16000.0
    tone = encode_audio(Waveform(0.25 * np.sin(2 * np.pi * 440.0 * t), 16000))
    if op == "separate":
        return {"audio": tone}
    if op == "transcribe":
        return {"audio": tone, "instruction": "Transcribe the spoken content."}
    if op == "tag":
        return {
            "audio": tone,
            "instruction": "List the sound events.",
            "classes": ["siren", "dog", "music"],
        }
    if op == "answer":
        return {
            "audio": tone,
            "question": "What is the dominant source?",
            "options": ["tone", "speech", "silence"],
        }
    return {}


def _validate_happy(op: str, result: dict, parse_modality) -> tuple[bool, str]:
    try:
        if op == "route":
            parse_modality(str(result.get("modality", "")))
            return True, ""
        if op == "separate":
            sp = decode_audio(result["speech"])
            ns = decode_audio(result["nonspeech"])
            if len(sp) != len(ns):
                return False, f"stem lengths differ: {len(sp)} vs {len(ns)}"
            return True, ""
        if op == "transcribe":
            return isinstance(result.get("text"), str), f"bad text: {result}"
        if op == "tag":
            has_scores = isinstance(result.get("scores"), dict)
            has_labels = isinstance(result.get("labels"), list)
            return has_scores or has_labels, f"need scores or labels: {result}"
        if op == "answer":
            return isinstance(result.get("choice"), str), f"bad choice: {result}"
    except Exception as exc:  # validation failures, not transport errors
        return False, f"{type(exc).__name__}: {exc}"
    return False, f"unknown op {op}"

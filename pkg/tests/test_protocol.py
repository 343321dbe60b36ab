"""Wire protocol: transports, error taxonomy, conformance suite."""

import json
import socket
import threading

import numpy as np
import pytest

from sepfuse import (
    AdapterClient,
    AdapterEndpoint,
    AdapterMessage,
    Waveform,
    adapter_call,
    run_adapter_check,
)
from sepfuse.errors import (
    AdapterError,
    AdapterIdMismatchError,
    AdapterProtocolError,
    AdapterRemoteError,
    AdapterTimeoutError,
)
from sepfuse.protocol import decode_audio, encode_audio, parse_response_line

from synth import tone, write_stub_adapter


def _endpoint(tmp_path, mode="good", timeout=5.0):
    cmd = write_stub_adapter(tmp_path / f"adapter_{mode}.py", mode)
    return AdapterEndpoint(transport="subprocess-stdio", address=cmd, timeout=timeout)


def test_audio_payload_round_trip():
    w = tone(seconds=0.1)
    back = decode_audio(encode_audio(w))
    assert back.sample_rate == w.sample_rate
    assert np.max(np.abs(back.samples - w.samples)) <= 1.0 / 32768.0


def test_audio_payload_by_path(tmp_path):
    from sepfuse import write_wav

    w = tone(seconds=0.05)
    p = tmp_path / "t.wav"
    write_wav(w, p)
    back = decode_audio({"path": str(p)})
    assert len(back) == len(w)


def test_decode_audio_rejects_unknown_shape():
    with pytest.raises(AdapterProtocolError):
        decode_audio({"wat": 1})


def test_parse_response_line_taxonomy():
    ok = parse_response_line('{"id": "1", "result": {}}')
    assert ok.ok
    err = parse_response_line('{"id": "1", "error": {"code": "x", "message": ""}}')
    assert not err.ok
    with pytest.raises(AdapterProtocolError):
        parse_response_line("not json")
    with pytest.raises(AdapterProtocolError):
        parse_response_line('{"id": "1"}')  # neither result nor error
    with pytest.raises(AdapterProtocolError):
        parse_response_line('{"id": "1", "result": {}, "error": {}}')  # both


def test_request_response_over_subprocess(tmp_path):
    with AdapterClient(_endpoint(tmp_path)) as client:
        hs = client.handshake()
        assert set(hs["ops"]) == {"separate", "route", "answer", "transcribe", "tag"}
        result = client.request("route", {"instruction": "hi"})
        assert result["modality"] == "mixture"


def test_adapter_call_one_shot(tmp_path):
    resp = adapter_call(
        _endpoint(tmp_path), AdapterMessage("abc", "route", {"instruction": "x"})
    )
    assert resp.id == "abc"
    assert resp.result == {"modality": "mixture"}


def test_error_object_raises_remote_error(tmp_path):
    with AdapterClient(_endpoint(tmp_path)) as client:
        with pytest.raises(AdapterRemoteError) as exc_info:
            client.request("frobnicate", {})
        assert exc_info.value.code == "unknown-op"


def test_timeout_is_distinct(tmp_path):
    ep = _endpoint(tmp_path, mode="sleepy", timeout=0.3)
    with AdapterClient(ep) as client:
        with pytest.raises(AdapterTimeoutError):
            client.request("route", {"instruction": "x"})


def test_id_mismatch_is_distinct(tmp_path):
    with AdapterClient(_endpoint(tmp_path, mode="wrong-id")) as client:
        with pytest.raises(AdapterIdMismatchError):
            client.request("route", {"instruction": "x"})


def test_garbage_response_is_protocol_error(tmp_path):
    with AdapterClient(_endpoint(tmp_path, mode="garbage")) as client:
        with pytest.raises(AdapterProtocolError):
            client.request("route", {"instruction": "x"})


def test_dead_command_is_adapter_error():
    ep = AdapterEndpoint(
        transport="subprocess-stdio", address="/no/such/binary", timeout=1.0
    )
    with pytest.raises(AdapterError):
        AdapterClient(ep)


def test_endpoint_validation():
    with pytest.raises(ValueError):
        AdapterEndpoint(transport="carrier-pigeon", address="x")
    with pytest.raises(ValueError):
        AdapterEndpoint(transport="subprocess-stdio", address="x", timeout=0.0)


def test_conformance_suite_all_pass(tmp_path):
    results = run_adapter_check(_endpoint(tmp_path))
    assert len(results) == 10
    assert all(r.passed for r in results), [
        (r.name, r.detail) for r in results if not r.passed
    ]
    names = [r.name for r in results]
    assert "handshake" in names
    assert "id-echo" in names
    assert "malformed-line" in names
    assert "unknown-op" in names
    assert "one-response-per-request" in names


def test_conformance_suite_catches_wrong_id(tmp_path):
    results = run_adapter_check(
        AdapterEndpoint(
            transport="subprocess-stdio",
            address=write_stub_adapter(tmp_path / "w.py", "wrong-id"),
            timeout=5.0,
        )
    )
    failed = {r.name for r in results if not r.passed}
    assert failed  # at minimum handshake id checking trips


def _socket_server(path, stop):
    """Minimal protocol server on an AF_UNIX socket, route -> speech."""
    srv = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
    srv.bind(path)
    srv.listen(1)
    srv.settimeout(5.0)
    try:
        conn, _ = srv.accept()
        fh = conn.makefile("rw", encoding="utf-8", newline="\n")
        for line in fh:
            if stop.is_set():
                break
            msg = json.loads(line)
            if msg["op"] == "handshake":
                out = {"id": msg["id"], "result": {"ops": ["route"]}}
            else:
                out = {"id": msg["id"], "result": {"modality": "speech"}}
            fh.write(json.dumps(out) + "\n")
            fh.flush()
        conn.close()
    except OSError:
        pass
    finally:
        srv.close()


def test_local_socket_transport(tmp_path):
    import os
    import time

    sock_path = str(tmp_path / "adapter.sock")
    stop = threading.Event()
    server = threading.Thread(target=_socket_server, args=(sock_path, stop), daemon=True)
    server.start()
    deadline = time.monotonic() + 5.0
    while not os.path.exists(sock_path):
        assert time.monotonic() < deadline, "server never bound"
        time.sleep(0.01)
    ep = AdapterEndpoint(transport="local-socket", address=sock_path, timeout=5.0)
    with AdapterClient(ep) as client:
        assert client.handshake()["ops"] == ["route"]
        assert client.request("route", {"instruction": "x"})["modality"] == "speech"
    stop.set()
    server.join(timeout=2.0)

"""Both adapters must pass the harness conformance suite end to end.

The harness is exercised strictly from outside, through its command line, so
these tests double as an integration check of the process boundary.
"""

import json
import shutil
import subprocess
import sys

from wireclient import BRIDGE_SCRIPT, ECHO_SCRIPT


def _harness_argv() -> list[str]:
    exe = shutil.which("sepfuse")
    if exe:
        return [exe]
    return [sys.executable, "-m", "sepfuse.cli"]


def _run_check(address: str):
    proc = subprocess.run(
        [*_harness_argv(), "adapter-check", "--address", address],
        capture_output=True,
        text=True,
        timeout=60,
    )
    lines = proc.stdout.strip().splitlines()
    summary = json.loads(lines[-1])
    return proc.returncode, lines[:-1], summary


def test_echo_adapter_passes_full_suite():
    rc, lines, summary = _run_check(f"{sys.executable} {ECHO_SCRIPT}")
    assert rc == 0, f"adapter-check failed:\n" + "\n".join(lines)
    assert summary["status"] == "ok"
    assert all(line.startswith("PASS") for line in lines)
    names = {line.split()[1] for line in lines}
    assert {"handshake", "id-echo", "malformed-line", "unknown-op"} <= names
    assert {f"op-{op}" for op in ("separate", "route", "answer", "transcribe", "tag")} <= names
    assert len(lines) == 10


def test_bridge_with_stub_backend_passes_full_suite():
    rc, lines, summary = _run_check(f"{sys.executable} {BRIDGE_SCRIPT} --backend stub")
    assert rc == 0, f"adapter-check failed:\n" + "\n".join(lines)
    assert summary["status"] == "ok"
    assert len(lines) == 10


def test_bridge_with_reduced_op_set_still_conforms():
    rc, lines, summary = _run_check(
        f"{sys.executable} {BRIDGE_SCRIPT} --ops route,separate"
    )
    assert rc == 0
    assert summary["status"] == "ok"
    names = {line.split()[1] for line in lines}
    assert "op-route" in names and "op-separate" in names
    assert "op-transcribe" not in names


def test_checker_catches_a_broken_backend():
    rc, lines, summary = _run_check(f"{sys.executable} {BRIDGE_SCRIPT} --backend broken")
    assert rc == 1
    assert summary["status"] == "error"
    assert any(line.startswith("FAIL handshake") for line in lines)

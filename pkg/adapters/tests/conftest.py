"""Process fixtures; the protocol client itself lives in wireclient."""

from __future__ import annotations

import sys

import pytest

from wireclient import BRIDGE_SCRIPT, ECHO_SCRIPT, AdapterProc


@pytest.fixture
def echo_proc():
    proc = AdapterProc([sys.executable, str(ECHO_SCRIPT)])
    yield proc
    proc.close()


@pytest.fixture
def bridge_factory():
    procs = []

    def start(*extra: str) -> AdapterProc:
        proc = AdapterProc([sys.executable, str(BRIDGE_SCRIPT), *extra])
        procs.append(proc)
        return proc

    yield start
    for proc in procs:
        proc.close()

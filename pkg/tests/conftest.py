"""Fixtures only; helpers live in synth."""

import pytest

from synth import write_source_manifest


@pytest.fixture
def source_manifest(tmp_path):
    return write_source_manifest(tmp_path)

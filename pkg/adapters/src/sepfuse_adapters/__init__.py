"""Reference adapter processes for the sepfuse wire protocol.

Two entry points ship here: `sepfuse-echo-adapter`, an identity adapter used
as a conformance target, and `sepfuse-bridge-adapter`, a template that maps
protocol requests onto a pluggable inference backend. Both read one JSON
request per line on stdin and write one JSON response per line on stdout.
They depend only on the standard library; anything a real backend needs
belongs to the adapter, never to the harness.
"""

__version__ = "0.1.0"

from .bridge import main as bridge_main
from .echo import main as echo_main

__all__ = ["bridge_main", "echo_main"]

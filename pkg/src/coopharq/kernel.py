"""Backend selection for the batch frame simulator.

The compiled extension is used when it imports; otherwise the pure-Python
reference in :mod:`coopharq.protocol` takes over. Set
``COOPHARQ_BACKEND=python`` to force the fallback, or ``compiled`` to make a
missing extension an error.
"""

import logging
import os

from . import protocol

log = logging.getLogger(__name__)

python_simulate_batch = protocol.simulate_batch

try:
    from ._kernel import simulate_batch as compiled_simulate_batch
except ImportError:  # extension not built
    compiled_simulate_batch = None

_requested = os.environ.get("COOPHARQ_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "python", "compiled"):
    raise ImportError(f"COOPHARQ_BACKEND must be auto, python or compiled, not {_requested!r}")
if _requested == "compiled" and compiled_simulate_batch is None:
    raise ImportError("COOPHARQ_BACKEND=compiled but coopharq._kernel is not built")

if compiled_simulate_batch is not None and _requested != "python":
    BACKEND = "compiled"
    simulate_batch = compiled_simulate_batch
else:
    if _requested == "auto":
        log.warning("compiled kernel unavailable; using the pure-Python frame simulator")
    BACKEND = "python"
    simulate_batch = python_simulate_batch


def get_backend(name=None):
    """Return the batch simulator for ``name`` (``None`` means the active one)."""
    if name is None:
        return simulate_batch
    if name == "python":
        return python_simulate_batch
    if name == "compiled":
        if compiled_simulate_batch is None:
            raise RuntimeError("compiled kernel is not built")
        return compiled_simulate_batch
    raise ValueError(f"unknown backend {name!r}")

"""Ray-casting kernel backends.

The compiled Cython core is preferred when present; the pure NumPy
fallback is selected when the extension is missing or when the
environment variable ``CAMCOVER_PURE=1`` is set. Both backends share
one contract, so everything above this package is backend-agnostic.
"""

import os

from camcover.kernels import _pure

try:
    from camcover.kernels import _core

    HAVE_CORE = True
except ImportError:  # extension not built on this install
    _core = None
    HAVE_CORE = False

if HAVE_CORE and not os.environ.get("CAMCOVER_PURE"):
    _backend = _core
    _BACKEND_NAME = "core"
else:
    _backend = _pure
    _BACKEND_NAME = "pure"

ray_first_hits = _backend.ray_first_hits


def backend_name() -> str:
    """Name of the active kernel backend ('core' or 'pure')."""
    return _BACKEND_NAME


def available_backends() -> dict:
    """Importable backend modules keyed by name (for parity tests)."""
    out = {"pure": _pure}
    if HAVE_CORE:
        out["core"] = _core
    return out

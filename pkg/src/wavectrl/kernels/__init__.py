"""Backend dispatch for the integration kernels.

A compiled extension (``wavectrl.kernels._native``) is preferred when it
imported cleanly; the pure-numpy module is the always-available fallback and
the semantic reference. ``WAVECTRL_BACKEND`` forces the choice:

* ``auto`` (default): native if built, else numpy
* ``native``: require the extension, raise if missing
* ``numpy``: ignore the extension
"""

from __future__ import annotations

import os

from . import numpy_backend

# no pre-binding here: a module-level ``_native = None`` would satisfy the
# ``from . import`` attribute lookup and silently skip loading the extension
try:
    from . import _native
except ImportError as exc:  # extension not built on this install
    _native = None
    _native_error: str | None = str(exc)
else:
    _native_error = None


def has_native() -> bool:
    return _native is not None


def backend_name() -> str:
    """Name of the backend ``get_backend()`` resolves to right now."""
    return "native" if get_backend() is not numpy_backend else "numpy"


def get_backend(name: str | None = None):
    """Return the kernel module selected by ``name`` or the environment."""
    if name is None:
        name = os.environ.get("WAVECTRL_BACKEND", "auto")
    name = name.lower()
    if name == "numpy":
        return numpy_backend
    if name == "native":
        if _native is None:
            raise RuntimeError(
                "native kernel backend requested but the extension is not "
                f"available: {_native_error}"
            )
        return _native
    if name == "auto":
        return _native if _native is not None else numpy_backend
    raise ValueError(f"unknown kernel backend {name!r} (expected auto/native/numpy)")


backend = get_backend()

__all__ = ["backend", "get_backend", "has_native", "numpy_backend"]

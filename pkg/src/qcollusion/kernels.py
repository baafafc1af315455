"""Backend selection for the session kernels.

The compiled extension is used when it imports; set ``QCOLLUSION_PURE=1`` to
force the pure-Python twin.  Both expose ``decay_kernel`` and
``constant_kernel`` with identical signatures and bit-identical results.
"""

from __future__ import annotations

import os

from . import _pycore

BACKEND = "python"
_compiled = None

if os.environ.get("QCOLLUSION_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _compiled  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _compiled = None


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ('cython', 'python' or None for default)."""
    if name is None:
        name = BACKEND
    if name == "python":
        return _pycore
    if name == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _compiled is not None else [])

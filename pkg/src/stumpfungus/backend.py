"""Kernel backend selection: compiled extension when available, pure otherwise.

The compiled lane (``_kern``, built from Cython) is preferred; set the
environment variable ``STUMPFUNGUS_BACKEND=pure`` to force the fallback, or
call :func:`use_backend` at runtime.  Models resolve kernel functions at
construction time via :func:`get`.
"""
from __future__ import annotations

import os

from . import _pure

try:
    from . import _kern as _compiled
except ImportError:  # extension not built; pure lane only
    _compiled = None


class BackendError(RuntimeError):
    pass


def _default():
    if os.environ.get("STUMPFUNGUS_BACKEND", "") == "pure":
        return "pure"
    return "compiled" if _compiled is not None else "pure"


_active = _default()


def active_backend():
    return _active


def available_backends():
    return ("pure", "compiled") if _compiled is not None else ("pure",)


def use_backend(name):
    """Select the kernel lane for subsequently constructed models."""
    global _active
    if name not in ("pure", "compiled"):
        raise BackendError(f"unknown backend {name!r}")
    if name == "compiled" and _compiled is None:
        raise BackendError("compiled backend is not available (extension not built)")
    _active = name


def get(name):
    """Resolve a kernel function by name in the active lane."""
    if _active == "compiled" and hasattr(_compiled, name):
        return getattr(_compiled, name)
    return getattr(_pure, name)

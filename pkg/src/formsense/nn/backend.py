"""Kernel backend selection: compiled core when available, numpy otherwise.

FORMSENSE_BACKEND=python forces the fallback, =native requires the compiled
core (ImportError if it did not build). Unset picks native when importable.
"""

from __future__ import annotations

import os

from . import kernels_numpy

_BACKENDS: dict[str, object] = {"python": kernels_numpy}
try:
    from . import _core  # compiled extension, optional

    _BACKENDS["native"] = _core
except ImportError:
    _core = None

_active: str | None = None


def _initial() -> str:
    want = os.environ.get("FORMSENSE_BACKEND", "").strip().lower()
    if want in ("", "auto"):
        return "native" if "native" in _BACKENDS else "python"
    if want not in ("python", "native"):
        raise ValueError(f"FORMSENSE_BACKEND must be auto/python/native, got {want!r}")
    if want == "native" and "native" not in _BACKENDS:
        raise ImportError("FORMSENSE_BACKEND=native but the compiled core is not built")
    return want


def active_backend() -> str:
    global _active
    if _active is None:
        _active = _initial()
    return _active


def set_backend(name: str) -> None:
    """Override the backend for this process (mainly for tests/benchmarks)."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(_BACKENDS)}")
    _active = name


def kernels():
    return _BACKENDS[active_backend()]

"""Kernel backend selection.

The hot per-sample kernels exist twice: a Cython extension (``_core``) and
a NumPy fallback (``pyref``). The extension is picked automatically when it
imports; set ``OODCONF_BACKEND=numpy`` (or ``compiled``) to force a choice,
or call :func:`use` from code (benchmarks and tests do this).
"""

import os

from . import pyref

_BACKENDS = {"numpy": pyref}
try:
    from . import _core

    _BACKENDS["compiled"] = _core
except ImportError:
    _core = None

_requested = os.environ.get("OODCONF_BACKEND", "").strip()
if _requested:
    if _requested not in _BACKENDS:
        raise ImportError(
            f"OODCONF_BACKEND={_requested!r} not available; "
            f"choices: {sorted(_BACKENDS)}"
        )
    _active = _BACKENDS[_requested]
else:
    _active = _BACKENDS.get("compiled", pyref)


def active():
    """The currently selected backend module."""
    return _active


def name() -> str:
    return _active.NAME


def available() -> dict:
    """Importable backends by name."""
    return dict(_BACKENDS)


def use(backend_name: str):
    """Select a backend by name; returns the module. For tests/benchmarks."""
    global _active
    if backend_name not in _BACKENDS:
        raise ValueError(
            f"unknown backend {backend_name!r}; choices: {sorted(_BACKENDS)}"
        )
    _active = _BACKENDS[backend_name]
    return _active

"""Selects the convolution compute backend.

Two interchangeable cores exist: numba-JIT loops (fast path) and a pure
numpy im2col path (reference / fallback). Selection order:

  1. set_backend("numba" | "numpy" | "auto") at runtime, else
  2. the MSDCS_BACKEND environment variable, else
  3. "auto": numba when it imports, numpy otherwise.

Both cores are deterministic run to run for a fixed machine; the numpy
core is the portable reference and is what --deterministic pins.
"""

import os

from . import _conv_numpy
from .errors import ConfigError

try:
    from . import _conv_numba
except ImportError:  # numba missing or broken: numpy path still works
    _conv_numba = None

ENV_VAR = "MSDCS_BACKEND"
_CHOICES = ("auto", "numba", "numpy")

_forced: str | None = None


def numba_available() -> bool:
    return _conv_numba is not None


def set_backend(name: str | None) -> None:
    """Force a backend for this process ("auto"/None returns to env control)."""
    global _forced
    if name is None or name == "auto":
        _forced = None
        return
    if name not in _CHOICES:
        raise ConfigError(f"unknown backend {name!r}; choose from {_CHOICES}")
    if name == "numba" and not numba_available():
        raise ConfigError("backend 'numba' requested but numba is not importable")
    _forced = name


def active_backend() -> str:
    if _forced is not None:
        return _forced
    env = os.environ.get(ENV_VAR, "auto")
    if env not in _CHOICES:
        raise ConfigError(f"{ENV_VAR}={env!r} invalid; choose from {_CHOICES}")
    if env == "numba" and not numba_available():
        raise ConfigError(f"{ENV_VAR}=numba but numba is not importable")
    if env == "auto":
        return "numba" if numba_available() else "numpy"
    return env


def conv_impl():
    """The module providing conv_forward / conv_backward_* cores."""
    return _conv_numba if active_backend() == "numba" else _conv_numpy

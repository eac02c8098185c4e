"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
fallback is loaded.  Setting ``AIRREG_KERNELS=python`` forces the fallback.
"""
import os

from . import _pykernels

try:
    from . import _ext
except ImportError:  # extension not built
    _ext = None

_BACKENDS = {"python": _pykernels}
if _ext is not None:
    _BACKENDS["cython"] = _ext


def available():
    """Names of the importable backends."""
    return sorted(_BACKENDS)


def get(name=None):
    """Return a kernel module by name (or pass a module through); None gives the default."""
    if name is None:
        return DEFAULT
    if not isinstance(name, str):
        name_of(name)
        return name
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable kernel backend {name!r}") from None


def name_of(module):
    for key, mod in _BACKENDS.items():
        if mod is module:
            return key
    raise ValueError("not a kernel backend")


_requested = os.environ.get("AIRREG_KERNELS", "").strip().lower()
if _requested == "python" or _ext is None:
    DEFAULT = _pykernels
else:
    DEFAULT = _ext

BACKEND = name_of(DEFAULT)

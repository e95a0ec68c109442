"""Selection of the compute-kernel backend.

The compiled extension ``cycinv._core`` is preferred when importable; the
NumPy module ``cycinv._kernels_py`` is the fallback. Set CYCINV_BACKEND to
``ext`` or ``python`` to force one (forcing ``ext`` fails loudly if the
extension is missing). Ops look the active module up through ``kernels`` at
call time, so tests and benchmarks may swap it with :func:`set_backend`.
"""

import os

from . import _kernels_py

try:
    from . import _core
except ImportError:
    _core = None

_NAMES = {"ext", "python"}


def _select(name):
    if name == "ext":
        if _core is None:
            raise ImportError("cycinv._core extension is not built")
        return _core
    return _kernels_py


_requested = os.environ.get("CYCINV_BACKEND")
if _requested is not None and _requested not in _NAMES:
    raise ImportError(f"CYCINV_BACKEND must be one of {sorted(_NAMES)}, got {_requested!r}")

kernels = _select(_requested) if _requested else (_core if _core is not None else _kernels_py)


def backend_name():
    return "ext" if kernels is _core and _core is not None else "python"


def available_backends():
    return ("ext", "python") if _core is not None else ("python",)


def set_backend(name):
    """Swap the active kernel module; returns the previous backend name."""
    global kernels
    if name not in _NAMES:
        raise ValueError(f"unknown backend {name!r}")
    prev = backend_name()
    kernels = _select(name)
    return prev

"""Selects the quadrature kernel: compiled extension if built, else pure Python."""
from . import _imhof_py

try:
    from . import _imhof as _compiled
except ImportError:  # extension not built
    _compiled = None

COMPILED = _compiled is not None
BACKENDS = ("compiled", "python") if COMPILED else ("python",)


def get(name=None):
    """Return the kernel module for ``name`` ("compiled", "python" or None for best)."""
    if name is None:
        return _compiled if COMPILED else _imhof_py
    if name == "python":
        return _imhof_py
    if name == "compiled":
        if not COMPILED:
            raise ImportError("compiled kernel is not available in this build")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")

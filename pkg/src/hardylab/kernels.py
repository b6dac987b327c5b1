"""Backend selection for the point-cloud and polygon kernels.

The compiled extension is used when importable; set ``HARDYLAB_PURE_PYTHON=1``
to force the numpy/scipy fallback.
"""

import importlib
import os

__all__ = ["BACKEND", "PointTree", "PolygonIndex", "load_backend", "available_backends"]


def load_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "cython":
        return importlib.import_module("hardylab._kernels")
    if name == "python":
        return importlib.import_module("hardylab._fallback")
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        load_backend("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


if os.environ.get("HARDYLAB_PURE_PYTHON"):
    _impl = load_backend("python")
    BACKEND = "python"
else:
    try:
        _impl = load_backend("cython")
        BACKEND = "cython"
    except ImportError:
        _impl = load_backend("python")
        BACKEND = "python"

PointTree = _impl.PointTree
PolygonIndex = _impl.PolygonIndex

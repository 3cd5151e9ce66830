"""Backend selection for the numerical kernels.

The compiled extension is preferred; the numpy fallback is used when it was
not built or when ``HANDBALL_ORACLE_PURE`` is set to a truthy value.
"""
import os

from . import _kernels_py

_force_pure = os.environ.get("HANDBALL_ORACLE_PURE", "").strip().lower() in {"1", "true", "yes"}

_compiled = None
if not _force_pure:
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py

BACKEND = "cython" if _compiled is not None else "numpy"

embed_gather = _impl.embed_gather
embed_scatter_add = _impl.embed_scatter_add
adam_update = _impl.adam_update
haversine_many = _impl.haversine_many


def compiled_available():
    return _compiled is not None


def get_backend(name):
    """Return the kernel module for ``"cython"`` or ``"numpy"``."""
    if name == "numpy":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")

"""Kernel backend selection.

The compiled extension is used when importable; ``RFIMLAB_PURE=1`` forces
the pure-Python fallback.
"""
import os

from . import _pykernels

if os.environ.get("RFIMLAB_PURE", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

kernels = _compiled if _compiled is not None else _pykernels
BACKEND = "compiled" if _compiled is not None else "python"

grid_min_cut = kernels.grid_min_cut
grid_bfs = kernels.grid_bfs
cylinders_crossed = kernels.cylinders_crossed
simplex_exchange = kernels.simplex_exchange

__all__ = [
    "BACKEND",
    "kernels",
    "grid_min_cut",
    "grid_bfs",
    "cylinders_crossed",
    "simplex_exchange",
]

"""Backend selection for the hot graph / Z2 loops.

Set ``CYCLEKIT_NUMBA=0`` before import to force the pure-numpy path. If
numba itself is missing the numpy path is used silently.
"""

import os

from . import _numpy as numpy_backend

USE_NUMBA = os.environ.get("CYCLEKIT_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

numba_backend = None
if USE_NUMBA:
    try:
        from . import _numba as numba_backend
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

_impl = numba_backend if USE_NUMBA else numpy_backend
BACKEND = "numba" if USE_NUMBA else "numpy"

bfs_forest = _impl.bfs_forest
spt_cycles = _impl.spt_cycles
cycle_topm = _impl.cycle_topm
segment_max = _impl.segment_max
z2_eliminate = _impl.z2_eliminate
z2_reduce = _impl.z2_reduce

__all__ = [
    "BACKEND", "USE_NUMBA", "numpy_backend", "numba_backend",
    "bfs_forest", "spt_cycles", "cycle_topm", "segment_max",
    "z2_eliminate", "z2_reduce",
]

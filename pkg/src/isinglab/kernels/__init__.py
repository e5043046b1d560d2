"""Hot loops, dispatched to numba or to a numpy fallback.

Set ``ISING_LAB_DISABLE_NUMBA=1`` before import to use the fallback. Both
backends consume the same pre-drawn random numbers, so a seeded run gives
identical output either way.
"""

import os

NUMBA_DISABLED = os.environ.get("ISING_LAB_DISABLE_NUMBA", "") not in ("", "0")

if NUMBA_DISABLED:
    from . import _numpy as backend
else:
    try:
        from . import _numba as backend
    except ImportError:  # pragma: no cover
        from . import _numpy as backend

BACKEND = "numpy" if backend.__name__.endswith("_numpy") else "numba"

log_weights = backend.log_weights
glauber_sweep = backend.glauber_sweep
sw_bonds = backend.sw_bonds
cluster_roots = backend.cluster_roots
subset_cluster_roots = backend.subset_cluster_roots
even_subgraph_counts = backend.even_subgraph_counts

__all__ = [
    "BACKEND",
    "log_weights",
    "glauber_sweep",
    "sw_bonds",
    "cluster_roots",
    "subset_cluster_roots",
    "even_subgraph_counts",
]

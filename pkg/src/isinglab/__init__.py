"""Exact, Monte Carlo and diagnostic tools for the nearest-neighbour Ising model."""

from .lattice import (FREE, BoundaryCondition, Couplings, Lattice, SpinConfig, build_lattice,
                      dual_lattice, even_subgraphs, ghost_augment, hamiltonian)
from .exact import (correlation_exact, critical_beta, duality_check, kw_dual, log_partition,
                    onsager_free_energy, peierls_bound, spatial_markov_check, yang_magnetization)

__version__ = "0.1.0"

__all__ = [
    "FREE", "BoundaryCondition", "Couplings", "Lattice", "SpinConfig", "build_lattice",
    "dual_lattice", "even_subgraphs", "ghost_augment", "hamiltonian", "correlation_exact",
    "critical_beta", "duality_check", "kw_dual", "log_partition", "onsager_free_energy",
    "peierls_bound", "spatial_markov_check", "yang_magnetization",
]

"""Exhaustive summation over all 2**V spin configurations.

State ``s`` in ``[0, 2**V)`` encodes spin ``x`` as ``-1`` when bit ``x`` is set.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .lattice import FREE, BoundaryCondition, Couplings, Lattice, effective_field

MAX_ENUM_VERTICES = 24


def log_weights(lat: Lattice, coup: Couplings, bc: BoundaryCondition = FREE,
                J=None, field=None) -> np.ndarray:
    """``-beta H`` for every configuration.

    ``J`` and ``field`` override the couplings/effective field when given.
    """
    V = lat.n_vertices
    if V > MAX_ENUM_VERTICES:
        raise ValueError(f"enumeration limited to {MAX_ENUM_VERTICES} vertices, got {V}")
    J = coup.couplings(lat) if J is None else np.asarray(J, dtype=np.float64)
    f = effective_field(lat, coup, bc) if field is None else np.asarray(field, dtype=np.float64)
    return kernels.log_weights(V, lat.eu, lat.ev, np.ascontiguousarray(J),
                               np.ascontiguousarray(f), float(coup.beta), 0, 1 << V)


def spin_column(V: int, x: int) -> np.ndarray:
    s = np.arange(1 << V, dtype=np.int64)
    return (1 - 2 * ((s >> x) & 1)).astype(np.int8)


def parity_sign(V: int, A) -> np.ndarray:
    """``sigma_A`` for every state, as +-1 float."""
    mask = 0
    for a in A:
        mask ^= 1 << int(a)
    s = np.arange(1 << V, dtype=np.uint64)
    return 1.0 - 2.0 * (np.bitwise_count(s & np.uint64(mask)) & 1)


class Ensemble:
    """Gibbs measure of a small graph, held as a probability vector.

    Examples
    --------
    >>> from isinglab.lattice import build_lattice
    >>> ens = Ensemble(build_lattice(1, 2), Couplings(0.5))
    >>> round(ens.expect_sigma([0, 1]), 12) == round(float(np.tanh(0.5)), 12)
    True
    """

    def __init__(self, lat: Lattice, coup: Couplings, bc: BoundaryCondition = FREE,
                 logw=None):
        self.lat = lat
        self.coup = coup
        self.bc = bc
        lw = log_weights(lat, coup, bc) if logw is None else logw
        self.log_z = float(logsumexp(lw))
        self.prob = np.exp(lw - self.log_z)

    @property
    def n(self):
        return self.lat.n_vertices

    def expect(self, values) -> float:
        return float(self.prob @ values)

    def expect_sigma(self, A) -> float:
        if len(A) == 0:
            return 1.0
        return self.expect(parity_sign(self.n, A))

    def two_point_matrix(self) -> np.ndarray:
        V = self.n
        cols = np.array([spin_column(V, x) for x in range(V)], dtype=np.float64)
        weighted = cols * self.prob
        return weighted @ cols.T

    def magnetisations(self) -> np.ndarray:
        V = self.n
        return np.array([self.expect(spin_column(V, x)) for x in range(V)])

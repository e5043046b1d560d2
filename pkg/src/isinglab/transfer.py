"""Layer-by-layer transfer operators on boxes, tori and infinite strips.

Layers are the slices of constant ``c_0``. A layer state is an integer in
``[0, 2**S)`` with the spin encoding used everywhere else (bit set means
-1). Inter-layer couplings are applied one site at a time as 2x2 factors,
so one application costs ``O(S 2**S)``.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh
from scipy.special import logsumexp

from . import kernels
from .lattice import FREE, BoundaryCondition, Couplings, Lattice, build_lattice, effective_field

MAX_OPEN_SECTION = 16
MAX_TRACE_SECTION = 12


def _site_factor(x, beta, J, i, S):
    """Apply exp(beta J s s') on site ``i`` along axis 0 of ``x``.

    ``x`` has shape (2**S, ...).
    """
    rest = x.shape[1:]
    y = x.reshape((1 << (S - 1 - i), 2, 1 << i) + rest)
    a, b = np.exp(beta * J), np.exp(-beta * J)
    top, bot = y[:, 0], y[:, 1]
    out = np.empty_like(y)
    out[:, 0] = a * top + b * bot
    out[:, 1] = b * top + a * bot
    return out.reshape(x.shape)


def apply_coupling(x, beta, J):
    """Multiply by the inter-layer factor ``prod_i exp(beta J_i s_i s'_i)``."""
    S = len(J)
    for i in range(S):
        if J[i] != 0:
            x = _site_factor(x, beta, J[i], i, S)
    return x


class LayerStructure:
    """Split of a box or torus into slices along axis 0."""

    def __init__(self, lat: Lattice, coup: Couplings, bc: BoundaryCondition = FREE):
        if lat.topology not in ("box", "torus") or lat.ghost is not None:
            raise ValueError("transfer method needs a plain box or torus")
        self.n_layers = lat.sides[0]
        self.S = lat.n_vertices // self.n_layers
        self.periodic = lat.topology == "torus"
        self.beta = float(coup.beta)
        J = coup.couplings(lat)
        f = effective_field(lat, coup, bc)
        S, n = self.S, self.n_layers
        lu, lv = lat.eu // S, lat.ev // S
        self.inner = []
        for k in range(n):
            m = (lu == k) & (lv == k)
            self.inner.append((lat.eu[m] % S, lat.ev[m] % S, J[m], f[k * S:(k + 1) * S]))
        n_links = n if self.periodic else n - 1
        self.links = np.zeros((n_links, S))
        for e in np.nonzero(lu != lv)[0]:
            k = int(lu[e])
            self.links[k, lat.eu[e] % S] = J[e]

    def layer_log_weight(self, k):
        eu, ev, J, f = self.inner[k]
        return kernels.log_weights(self.S, np.ascontiguousarray(eu), np.ascontiguousarray(ev),
                                   np.ascontiguousarray(J), np.ascontiguousarray(f),
                                   self.beta, 0, 1 << self.S)


def log_partition_transfer(lat: Lattice, coup: Couplings, bc: BoundaryCondition = FREE) -> float:
    """ln Z by transfer along axis 0.

    Open boxes propagate a single vector (cross-section up to 16 spins);
    tori propagate a full matrix and take its trace (up to 12 spins).
    """
    ls = LayerStructure(lat, coup, bc)
    if ls.periodic:
        if ls.S > MAX_TRACE_SECTION:
            raise ValueError(f"periodic transfer limited to {MAX_TRACE_SECTION} spins per layer")
        return _trace(ls)
    if ls.S > MAX_OPEN_SECTION:
        raise ValueError(f"transfer limited to {MAX_OPEN_SECTION} spins per layer")
    logv = ls.layer_log_weight(0)
    for k in range(1, ls.n_layers):
        top = logv.max()
        v = apply_coupling(np.exp(logv - top), ls.beta, ls.links[k - 1])
        logv = np.log(v) + top + ls.layer_log_weight(k)
    return float(logsumexp(logv))


def _trace(ls: LayerStructure) -> float:
    n = 1 << ls.S
    lw = ls.layer_log_weight(0)
    top = lw.max()
    X = np.diag(np.exp(lw - top))
    scale = top
    for k in range(1, ls.n_layers):
        X = apply_coupling(X, ls.beta, ls.links[k - 1])
        lw = ls.layer_log_weight(k)
        top = lw.max()
        X *= np.exp(lw - top)[:, None]
        m = X.max()
        X /= m
        scale += top + np.log(m)
    X = apply_coupling(X, ls.beta, ls.links[ls.n_layers - 1])
    return float(np.log(np.trace(X)) + scale) if n else 0.0


# ---------------------------------------------------------------------------
# cylinders of infinite length


def _section(N, d):
    if N < 3:
        raise ValueError("cross-section side must be >= 3")
    if d == 1:
        return Lattice(1, np.zeros((0, 2), dtype=np.int64))
    return build_lattice(d - 1, N, "torus")


class StripOperator:
    """Symmetrised transfer matrix of a cylinder with periodic cross-section.

    ``T = D^(1/2) K D^(1/2)`` where ``K`` couples consecutive layers and
    ``D`` carries the in-layer bonds and field. ``T`` has the spectrum of
    the single-layer transfer matrix.
    """

    def __init__(self, beta, N, d=2, h=0.0):
        self.section = _section(N, d)
        self.S = self.section.n_vertices
        if self.S > MAX_OPEN_SECTION:
            raise ValueError(f"strip cross-section limited to {MAX_OPEN_SECTION} spins")
        self.beta = float(beta)
        self.N, self.d = N, d
        sec = self.section
        lw = kernels.log_weights(self.S, sec.eu, sec.ev, np.ones(sec.n_edges),
                                 np.full(self.S, float(h)), self.beta, 0, 1 << self.S)
        self.log_half_d = 0.5 * lw
        self.shift = self.log_half_d.max()
        self.half_d = np.exp(self.log_half_d - self.shift)
        self.links = np.ones(self.S)

    @property
    def size(self):
        return 1 << self.S

    def apply(self, X):
        """``T @ X`` for X of shape (2**S, k)."""
        hd = self.half_d[:, None]
        return hd * apply_coupling(hd * X, self.beta, self.links)

    def matvec(self, v):
        return self.apply(np.asarray(v, dtype=np.float64).reshape(-1, 1)).ravel()

    def dense(self):
        if self.S > MAX_TRACE_SECTION:
            raise ValueError("dense transfer matrix limited to 12 spins")
        return self.apply(np.eye(self.size))

    def log_scale(self):
        """Log of the factor removed from ``T`` for numerical range."""
        return 2 * self.shift

    def top_eigenvalues(self, k=2):
        """Largest ``k`` eigenvalues (log of the rescaled operator added back)."""
        n = self.size
        if n <= 64:
            w = np.linalg.eigvalsh(self.dense())
            top = np.sort(w)[::-1][:k]
        else:
            op = LinearOperator((n, n), matvec=self.matvec, dtype=np.float64)
            v0 = np.ones(n)
            w = eigsh(op, k=k, which="LA", v0=v0, tol=1e-13, return_eigenvectors=False)
            top = np.sort(w)[::-1]
        return top, self.log_scale()


def transfer_matrix(beta, N, d=2, h=0.0) -> np.ndarray:
    """Dense symmetric transfer matrix for a periodic cross-section of side N."""
    op = StripOperator(beta, N, d, h)
    return op.dense() * np.exp(op.log_scale())


def strip_free_energy(beta, N, d=2, h=0.0) -> float:
    """``(1/S) ln lambda_max``: -beta f of the infinite cylinder."""
    op = StripOperator(beta, N, d, h)
    top, scale = op.top_eigenvalues(1)
    return float((np.log(top[0]) + scale) / op.S)


def shanks(a0, a1, a2):
    """Shanks transform of three consecutive terms."""
    den = a2 - 2 * a1 + a0
    if den == 0:
        return a2
    return (a2 * a0 - a1 * a1) / den


def strip_extrapolate(beta, widths=(10, 12, 14)):
    """Shanks-extrapolated strip free energy from the last three widths.

    Returns
    -------
    value : float
    values : list of float
        Per-width strip free energies.
    """
    if len(widths) < 3:
        raise ValueError("need three widths")
    vals = [strip_free_energy(beta, N) for N in widths]
    return float(shanks(*vals[-3:])), vals

"""Discrete Cauchy-Riemann checks and order-disorder correlators on small boxes."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .enumeration import log_weights, parity_sign
from .lattice import FREE, BoundaryCondition, Couplings, Lattice, dual_lattice


def _box2d(lat):
    if lat.topology != "box" or lat.dim != 2 or lat.ghost is not None:
        raise ValueError("need a plain 2D box")
    return lat.sides


def complex_positions(lat: Lattice) -> np.ndarray:
    """``z = x + i y`` for every vertex of a 2D box."""
    _box2d(lat)
    return lat.coords[:, 0] + 1j * lat.coords[:, 1]


def lattice_function(lat: Lattice, fn) -> np.ndarray:
    """Values ``fn(z)`` at every vertex, as a complex array."""
    return np.asarray(fn(complex_positions(lat)), dtype=complex) * np.ones(lat.n_vertices)


def isaacs_residual(F, lat: Lattice, face) -> complex:
    """``F(NW) - F(SE) - i [F(NE) - F(SW)]`` on the face with lower-left corner ``face``.

    Examples
    --------
    >>> from isinglab.lattice import build_lattice
    >>> lat = build_lattice(2, 2)
    >>> isaacs_residual(lattice_function(lat, lambda z: z), lat, (0, 0))
    0j
    """
    a, b = _box2d(lat)
    i, j = (int(v) for v in face)
    if not (0 <= i < a - 1 and 0 <= j < b - 1):
        raise ValueError("face has corners outside the domain")
    F = np.asarray(F, dtype=complex)
    if F.shape != (lat.n_vertices,):
        raise ValueError("need one value per vertex")
    sw, se = F[lat.index((i, j))], F[lat.index((i + 1, j))]
    nw, ne = F[lat.index((i, j + 1))], F[lat.index((i + 1, j + 1))]
    return complex(nw - se - 1j * (ne - sw))


def isaacs_residuals(F, lat: Lattice) -> np.ndarray:
    """Residual on every face, shape ``(a - 1, b - 1)``."""
    a, b = _box2d(lat)
    F = np.asarray(F, dtype=complex)
    if F.shape != (lat.n_vertices,):
        raise ValueError("need one value per vertex")
    G = F.reshape(a, b)
    return G[:-1, 1:] - G[1:, :-1] - 1j * (G[1:, 1:] - G[:-1, :-1])


def preholomorphic_check(F, lat: Lattice) -> float:
    """Largest ``|residual|`` over the faces of a box."""
    r = isaacs_residuals(F, lat)
    return float(np.abs(r).max()) if r.size else 0.0


# ---------------------------------------------------------------------------
# disorder operators


def face_index(lat: Lattice, face) -> int:
    """Dual vertex of the inner face with lower-left corner ``face``."""
    a, b = _box2d(lat)
    i, j = (int(v) for v in face)
    if not (0 <= i < a - 1 and 0 <= j < b - 1):
        raise ValueError("not an inner face")
    return i * (b - 1) + j


def face_corners(lat: Lattice, face) -> tuple:
    i, j = (int(v) for v in face)
    face_index(lat, face)
    return tuple(lat.index(c) for c in ((i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)))


def validate_cut(lat: Lattice, cut, face) -> list:
    """Check that ``cut`` (edge ids) is a self-avoiding dual path from the exterior to ``face``.

    Dual edge ``k`` crosses primal edge ``k``. Returns the visited dual
    vertices.
    """
    dual = dual_lattice(lat)
    ext = dual.n_vertices - 1
    target = face_index(lat, face)
    cut = [int(e) for e in cut]
    if not cut:
        raise ValueError("a cut needs at least one edge")
    if any(not 0 <= e < lat.n_edges for e in cut):
        raise ValueError("cut edge out of range")
    here, seen = ext, [ext]
    for e in cut:
        u, v = (int(w) for w in dual.edges[e])
        if here not in (u, v):
            raise ValueError("consecutive cut edges must share a dual vertex")
        here = v if here == u else u
        if here in seen:
            raise ValueError("cut is not self-avoiding")
        seen.append(here)
    if here != target:
        raise ValueError("cut does not end at its face")
    return seen


def straight_cut(lat: Lattice, face, direction: str = "down") -> list:
    """Cut from the exterior straight to ``face`` coming from one side.

    ``direction`` names the side it enters from: down, up, left or right.
    """
    a, b = _box2d(lat)
    i, j = (int(v) for v in face)
    face_index(lat, face)
    edges = []
    if direction == "down":
        for k in range(0, j + 1):  # horizontal edges below faces (i, k - 1) -> (i, k)
            edges.append(lat.edge_id(lat.index((i, k)), lat.index((i + 1, k))))
    elif direction == "up":
        for k in range(b - 1, j, -1):
            edges.append(lat.edge_id(lat.index((i, k)), lat.index((i + 1, k))))
    elif direction == "left":
        for k in range(0, i + 1):
            edges.append(lat.edge_id(lat.index((k, j)), lat.index((k, j + 1))))
    elif direction == "right":
        for k in range(a - 1, i, -1):
            edges.append(lat.edge_id(lat.index((k, j)), lat.index((k, j + 1))))
    else:
        raise ValueError("direction must be down, up, left or right")
    validate_cut(lat, edges, face)
    return edges


def _check_pairs(lat, pairs, cuts):
    if len(pairs) != len(cuts):
        raise ValueError("need one cut per (vertex, face) pair")
    used = set()
    for (x, f), cut in zip(pairs, cuts):
        if x is not None and int(x) not in face_corners(lat, f):
            raise ValueError(f"face {tuple(f)} is not bordered by vertex {x}")
        validate_cut(lat, cut, f)
        if used & set(int(e) for e in cut):
            raise ValueError("cuts overlap")
        used |= set(int(e) for e in cut)
    return sorted(used)


def _bond_signs(lat, edges):
    V = lat.n_vertices
    s = np.arange(1 << V, dtype=np.int64)
    out = np.empty((len(edges), 1 << V))
    for k, e in enumerate(edges):
        u, v = lat.edges[e]
        out[k] = 1.0 - 2.0 * (((s >> u) ^ (s >> v)) & 1)
    return out


def order_disorder_correlator(lat: Lattice, beta: float, pairs, cuts, J=None,
                              bc: BoundaryCondition = FREE, method: str = "insertion") -> float:
    """``< prod sigma_{x_i} prod_{e in cuts} exp(-2 beta J_e sigma_u sigma_v) >``.

    ``pairs`` lists ``(x, face)``, with ``x = None`` for a bare disorder
    insertion; each cut runs from the exterior face to its face.
    ``method="insertion"`` multiplies the Gibbs weights by the disorder
    factors; ``method="negated"`` flips the sign of ``J`` on cut edges and
    rescales by ``Z_negated / Z``.
    """
    if lat.n_vertices > 20:
        raise ValueError("order-disorder correlators limited to 20 vertices")
    edges = _check_pairs(lat, pairs, cuts)
    coup = Couplings(beta, 0.0, J)
    Jv = coup.couplings(lat)
    sig = parity_sign(lat.n_vertices, [int(x) for x, _ in pairs if x is not None])
    lw = log_weights(lat, coup, bc)
    log_z = logsumexp(lw)
    if method == "insertion":
        if edges:
            lw = lw - 2 * beta * (Jv[edges, None] * _bond_signs(lat, edges)).sum(axis=0)
        return float(np.exp(lw - log_z) @ sig)
    if method == "negated":
        Jn = Jv.copy()
        Jn[edges] *= -1
        lwn = log_weights(lat, Couplings(beta, 0.0, Jn), bc)
        log_zn = logsumexp(lwn)
        return float(np.exp(log_zn - log_z) * (np.exp(lwn - log_zn) @ sig))
    raise ValueError("method must be 'insertion' or 'negated'")


def cut_deformation_check(lat: Lattice, beta: float, pairs, cuts_a, cuts_b, J=None,
                          bc: BoundaryCondition = FREE) -> float:
    """``|F(cuts_a) - F(cuts_b)|`` for two cut systems ending at the same faces.

    With free boundary the correlator depends on the cuts only through a
    sign: it flips once for every spin ``x`` in the region swept between
    the two systems. The gap is zero when that count is even.
    """
    if len(cuts_a) != len(cuts_b):
        raise ValueError("cut systems differ in length")
    fa = order_disorder_correlator(lat, beta, pairs, cuts_a, J, bc)
    fb = order_disorder_correlator(lat, beta, pairs, cuts_b, J, bc)
    return abs(fa - fb)

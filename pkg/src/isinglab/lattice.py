"""Graphs, couplings, boundary conditions and spin configurations.

Vertices of a hypercubic box or torus are indexed row-major over the
coordinates ``(c_0, ..., c_{d-1})`` with the last axis varying fastest. Edges
are produced vertex by vertex, and for each vertex axis by axis, towards the
``+1`` neighbour. In the plane the point ``(c_0, c_1)`` is ``c_0 + i c_1``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

MAX_CYCLE_DIM = 24


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Lattice:
    """Finite multigraph with optional hypercubic geometry.

    Attributes
    ----------
    n_vertices : int
    edges : ndarray, shape (E, 2)
        Endpoints in generation order. Edge ids are row numbers.
    dim, sides, topology
        Geometry of the underlying box or torus. ``topology`` is one of
        ``"box"``, ``"torus"``, ``"dual"``, ``"custom"``.
    coords : ndarray or None
        Integer coordinates of the geometric vertices (the ghost has none).
    ghost : int or None
        Index of the ghost vertex, if the box was augmented.
    primal_edge : ndarray or None
        For a dual graph, the primal edge crossed by each dual edge.
    """

    n_vertices: int
    edges: np.ndarray
    dim: int = 0
    sides: tuple = ()
    topology: str = "custom"
    coords: np.ndarray | None = None
    ghost: int | None = None
    primal_edge: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= self.n_vertices):
            raise ValueError("edge endpoint out of range")
        object.__setattr__(self, "edges", _frozen(e))
        if self.coords is not None:
            object.__setattr__(self, "coords", _frozen(self.coords, np.int64))
        if self.primal_edge is not None:
            object.__setattr__(self, "primal_edge", _frozen(self.primal_edge, np.int64))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def eu(self):
        return self.edges[:, 0]

    @property
    def ev(self):
        return self.edges[:, 1]

    @property
    def n_sites(self) -> int:
        """Number of geometric (non-ghost) vertices."""
        return self.n_vertices - (self.ghost is not None)

    @cached_property
    def adjacency(self):
        """CSR adjacency ``(indptr, neighbour, edge_id)``; loops appear twice."""
        V = self.n_vertices
        a = np.concatenate([self.eu, self.ev])
        b = np.concatenate([self.ev, self.eu])
        eid = np.concatenate([np.arange(self.n_edges)] * 2)
        order = np.lexsort((eid, a))
        indptr = np.zeros(V + 1, dtype=np.int64)
        np.add.at(indptr, a + 1, 1)
        indptr = np.cumsum(indptr)
        return _frozen(indptr), _frozen(b[order]), _frozen(eid[order])

    @property
    def degree(self):
        return np.diff(self.adjacency[0])

    def neighbours(self, x) -> np.ndarray:
        ip, nb, _ = self.adjacency
        return nb[ip[x]:ip[x + 1]]

    def edge_id(self, u, v) -> int:
        """Id of the first edge joining ``u`` and ``v``."""
        e = self.edges
        hit = np.nonzero(((e[:, 0] == u) & (e[:, 1] == v)) | ((e[:, 0] == v) & (e[:, 1] == u)))[0]
        if not len(hit):
            raise ValueError(f"no edge between {u} and {v}")
        return int(hit[0])

    def index(self, coord) -> int:
        self._need_geometry()
        c = tuple(int(v) for v in coord)
        if self.topology == "torus":
            c = tuple(v % s for v, s in zip(c, self.sides))
        return int(np.ravel_multi_index(c, self.sides))

    def coord(self, x) -> tuple:
        self._need_geometry()
        return tuple(int(v) for v in self.coords[x])

    def _need_geometry(self):
        if self.topology not in ("box", "torus"):
            raise ValueError(f"{self.topology} lattice has no hypercubic coordinates")

    def boundary_vertices(self) -> np.ndarray:
        """Box vertices with at least one coordinate on a face."""
        if self.topology != "box":
            raise ValueError("boundary vertices are defined for boxes only")
        s = np.array(self.sides)
        on = ((self.coords == 0) | (self.coords == s - 1)).any(axis=1)
        return np.nonzero(on)[0]

    @cached_property
    def exterior_edges(self):
        """Edges leaving the box: arrays ``(vertex, axis, step, outer_coord)``."""
        if self.topology != "box":
            return (np.zeros(0, np.int64),) * 3 + (np.zeros((0, self.dim), np.int64),)
        vs, ax, st, oc = [], [], [], []
        for x in range(self.n_sites):
            c = self.coords[x]
            for a in range(self.dim):
                for step in (-1, 1):
                    y = c[a] + step
                    if y < 0 or y >= self.sides[a]:
                        o = c.copy()
                        o[a] = y
                        vs.append(x)
                        ax.append(a)
                        st.append(step)
                        oc.append(o)
        oc = np.array(oc, dtype=np.int64).reshape(-1, self.dim)
        return (_frozen(vs, np.int64), _frozen(ax, np.int64), _frozen(st, np.int64), _frozen(oc))

    def induced(self, vertices):
        """Induced subgraph on ``vertices``.

        Returns
        -------
        sub : Lattice
        edge_ids : ndarray
            Original ids of the retained edges.
        """
        vs = np.asarray(sorted(set(int(v) for v in vertices)), dtype=np.int64)
        pos = -np.ones(self.n_vertices, dtype=np.int64)
        pos[vs] = np.arange(len(vs))
        keep = np.nonzero((pos[self.eu] >= 0) & (pos[self.ev] >= 0))[0]
        sub = Lattice(len(vs), np.stack([pos[self.eu[keep]], pos[self.ev[keep]]], 1))
        return sub, keep

    def __repr__(self):
        geo = "x".join(map(str, self.sides)) if self.sides else ""
        g = "+ghost" if self.ghost is not None else ""
        return f"Lattice({self.topology}{g} {geo} V={self.n_vertices} E={self.n_edges})"


def build_lattice(d: int, sides, topology: str = "box") -> Lattice:
    """Hypercubic box or torus.

    Parameters
    ----------
    d : int
        Dimension, at least 1.
    sides : int or sequence of int
        Side lengths (vertex counts). A torus needs every side >= 3 so that
        its graph is simple.
    topology : {"box", "torus"}

    Examples
    --------
    >>> build_lattice(2, 3).n_edges
    12
    >>> build_lattice(2, 4, "torus").n_edges
    32
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if np.ndim(sides) == 0:
        sides = (int(sides),) * d
    sides = tuple(int(s) for s in sides)
    if len(sides) != d:
        raise ValueError("need one side per dimension")
    if topology not in ("box", "torus"):
        raise ValueError(f"unknown topology {topology!r}")
    if min(sides) < 1:
        raise ValueError("sides must be positive")
    if topology == "torus" and min(sides) < 3:
        raise ValueError("torus sides must be >= 3")
    V = int(np.prod(sides))
    coords = np.array(np.unravel_index(np.arange(V), sides)).T.reshape(V, d)
    edges = []
    for x in range(V):
        c = coords[x]
        for a in range(d):
            y = c.copy()
            y[a] += 1
            if y[a] == sides[a]:
                if topology == "box":
                    continue
                y[a] = 0
            edges.append((x, int(np.ravel_multi_index(tuple(y), sides))))
    return Lattice(V, np.array(edges, dtype=np.int64).reshape(-1, 2), d, sides, topology, coords)


def ghost_augment(lat: Lattice) -> Lattice:
    """Add a ghost vertex (index V) joined once to every boundary vertex."""
    if lat.topology != "box" or lat.ghost is not None:
        raise ValueError("ghost augmentation needs a plain box")
    g = lat.n_vertices
    extra = np.array([(int(x), g) for x in lat.boundary_vertices()], dtype=np.int64)
    return Lattice(g + 1, np.concatenate([lat.edges, extra.reshape(-1, 2)]), lat.dim,
                   lat.sides, "box", lat.coords, ghost=g)


def dual_lattice(lat: Lattice) -> Lattice:
    """Planar dual of a 2D box, including the exterior face.

    Inner faces are indexed row-major by their lower-left corner; the
    exterior face is the last vertex. Dual edge ``k`` crosses primal edge
    ``k``, so the result is generally a multigraph.
    """
    if lat.topology != "box" or lat.dim != 2 or lat.ghost is not None:
        raise ValueError("dual lattice needs a plain 2D box")
    a, b = lat.sides
    if min(a, b) < 2:
        raise ValueError("dual lattice needs both sides >= 2")
    nf = (a - 1) * (b - 1)
    ext = nf

    def face(i, j):
        if 0 <= i < a - 1 and 0 <= j < b - 1:
            return i * (b - 1) + j
        return ext

    out = []
    for u, v in lat.edges:
        i, j = lat.coords[u]
        if lat.coords[v][0] == i + 1:  # along axis 0
            out.append((face(i, j - 1), face(i, j)))
        else:
            out.append((face(i - 1, j), face(i, j)))
    return Lattice(nf + 1, np.array(out, dtype=np.int64), 2, (a - 1, b - 1), "dual",
                   primal_edge=np.arange(lat.n_edges))


# ---------------------------------------------------------------------------
# couplings and boundary conditions


@dataclass(frozen=True)
class Couplings:
    """Inverse temperature, external field and edge couplings.

    ``h`` is a scalar or one value per vertex; ``J`` defaults to 1 on
    every edge.
    """

    beta: float
    h: float | Sequence[float] = 0.0
    J: Sequence[float] | None = None

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ValueError("beta must be finite and >= 0")

    def field(self, lat: Lattice) -> np.ndarray:
        h = np.asarray(self.h, dtype=np.float64)
        if h.ndim == 0:
            return np.full(lat.n_vertices, float(h))
        if h.shape != (lat.n_vertices,):
            raise ValueError("field has wrong length")
        return h.copy()

    def couplings(self, lat: Lattice) -> np.ndarray:
        if self.J is None:
            return np.ones(lat.n_edges)
        J = np.asarray(self.J, dtype=np.float64)
        if J.ndim == 0:
            return np.full(lat.n_edges, float(J))
        if J.shape != (lat.n_edges,):
            raise ValueError("couplings have wrong length")
        return J.copy()

    def uniform_J(self, lat: Lattice) -> float | None:
        J = self.couplings(lat)
        if J.size and np.all(J == J[0]):
            return float(J[0])
        return None if J.size else 1.0

    def with_beta(self, beta):
        return Couplings(beta, self.h, self.J)

    def with_field(self, h):
        return Couplings(self.beta, h, self.J)


@dataclass(frozen=True)
class BoundaryCondition:
    """Values imposed on spins just outside a box.

    kind is ``free``, ``plus``, ``minus``, ``fixed`` (``tau`` gives one
    value per exterior edge, in :attr:`Lattice.exterior_edges` order) or
    ``dobrushin`` (exterior spin is +1 where its ``axis`` coordinate is
    >= ``level`` and -1 otherwise).
    """

    kind: str = "free"
    tau: tuple | None = None
    axis: int = 0
    level: int = 0

    def __post_init__(self):
        if self.kind not in ("free", "plus", "minus", "fixed", "dobrushin"):
            raise ValueError(f"unknown boundary condition {self.kind!r}")
        if self.kind == "fixed":
            if self.tau is None:
                raise ValueError("fixed boundary condition needs tau")
            if not all(t in (-1, 1) for t in self.tau):
                raise ValueError("tau entries must be +-1")
            object.__setattr__(self, "tau", tuple(int(t) for t in self.tau))

    @classmethod
    def parse(cls, text: str) -> "BoundaryCondition":
        """``free``, ``plus``, ``minus`` or ``dobrushin:AXIS:LEVEL``."""
        parts = text.split(":")
        if parts[0] == "dobrushin":
            axis = int(parts[1]) if len(parts) > 1 else 0
            level = int(parts[2]) if len(parts) > 2 else 0
            return cls("dobrushin", axis=axis, level=level)
        return cls(parts[0])

    def exterior_values(self, lat: Lattice) -> np.ndarray:
        vs, _, _, oc = lat.exterior_edges
        n = len(vs)
        if self.kind == "free":
            return np.zeros(n)
        if self.kind == "plus":
            return np.ones(n)
        if self.kind == "minus":
            return -np.ones(n)
        if self.kind == "fixed":
            if len(self.tau) != n:
                raise ValueError(f"tau needs {n} entries, got {len(self.tau)}")
            return np.array(self.tau, dtype=np.float64)
        if not 0 <= self.axis < lat.dim:
            raise ValueError("dobrushin axis out of range")
        return np.where(oc[:, self.axis] >= self.level, 1.0, -1.0)

    def field(self, lat: Lattice) -> np.ndarray:
        """Boundary field ``b_x``: sum of exterior values adjacent to x."""
        b = np.zeros(lat.n_vertices)
        if self.kind == "free":
            return b
        if lat.topology != "box":
            raise ValueError(f"{self.kind} boundary condition needs a box")
        vs = lat.exterior_edges[0]
        np.add.at(b, vs, self.exterior_values(lat))
        return b

    def flipped(self) -> "BoundaryCondition":
        """Boundary condition with every exterior value negated (non-dobrushin)."""
        table = {"plus": "minus", "minus": "plus"}
        if self.kind in table:
            return BoundaryCondition(table[self.kind])
        if self.kind == "fixed":
            return BoundaryCondition("fixed", tuple(-t for t in self.tau))
        if self.kind == "free":
            return self
        raise ValueError("use explicit tau to flip a dobrushin condition")


FREE = BoundaryCondition("free")


def effective_field(lat: Lattice, coup: Couplings, bc: BoundaryCondition = FREE):
    """External plus boundary field, one value per vertex."""
    return coup.field(lat) + bc.field(lat)


def hamiltonian(sigma, lat: Lattice, coup: Couplings, bc: BoundaryCondition = FREE):
    """Energy ``-sum J s_x s_y - sum (h_x + b_x) s_x``.

    ``sigma`` is a +-1 array of shape (V,) or (n, V), or a :class:`SpinConfig`.
    """
    if isinstance(sigma, SpinConfig):
        sigma = sigma.to_array()
    s = np.asarray(sigma, dtype=np.float64)
    if s.shape[-1] != lat.n_vertices:
        raise ValueError("configuration has wrong length")
    J = coup.couplings(lat)
    f = effective_field(lat, coup, bc)
    bond = (s[..., lat.eu] * s[..., lat.ev]) @ J
    return -bond - s @ f


# ---------------------------------------------------------------------------
# spin configurations


class SpinConfig:
    """Bit-packed +-1 configuration (bit set means spin -1)."""

    __slots__ = ("n", "bits")

    def __init__(self, n: int, bits=None):
        self.n = int(n)
        nbytes = (self.n + 7) // 8
        self.bits = np.zeros(nbytes, np.uint8) if bits is None else np.array(bits, np.uint8)
        if self.bits.shape != (nbytes,):
            raise ValueError("bit array has wrong size")

    @classmethod
    def from_array(cls, sigma):
        s = np.asarray(sigma)
        if not np.all(np.abs(s) == 1):
            raise ValueError("spins must be +-1")
        return cls(len(s), np.packbits(s < 0, bitorder="little"))

    @classmethod
    def from_index(cls, n, index: int):
        bits = np.array([(index >> i) & 1 for i in range(n)], dtype=bool)
        return cls(n, np.packbits(bits, bitorder="little"))

    def to_array(self) -> np.ndarray:
        b = np.unpackbits(self.bits, bitorder="little", count=self.n)
        return (1 - 2 * b.astype(np.int8)).astype(np.int8)

    def index(self) -> int:
        b = np.unpackbits(self.bits, bitorder="little", count=self.n)
        return int(sum(int(v) << i for i, v in enumerate(b)))

    def __getitem__(self, x):
        return -1 if (self.bits[x >> 3] >> (x & 7)) & 1 else 1

    def flip(self, x):
        self.bits[x >> 3] ^= np.uint8(1 << (x & 7))

    def copy(self):
        return SpinConfig(self.n, self.bits.copy())

    def __eq__(self, other):
        return isinstance(other, SpinConfig) and self.n == other.n and bool(
            np.array_equal(self.bits, other.bits))

    def __len__(self):
        return self.n

    def __repr__(self):
        s = "".join("+" if v > 0 else "-" for v in self.to_array()[:40])
        return f"SpinConfig({s}{'...' if self.n > 40 else ''})"


# ---------------------------------------------------------------------------
# edge-list text format


def parse_edgelist(text: str):
    """Parse ``v ID`` / ``e U V J`` lines; ``#`` starts a comment.

    Returns
    -------
    lat : Lattice
    J : ndarray
    """
    ids: dict[str, int] = {}
    edges, J = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "v" and len(tok) == 2:
            if tok[1] in ids:
                raise ValueError(f"line {lineno}: duplicate vertex {tok[1]}")
            ids[tok[1]] = len(ids)
        elif tok[0] == "e" and len(tok) in (3, 4):
            try:
                u, v = ids[tok[1]], ids[tok[2]]
            except KeyError as exc:
                raise ValueError(f"line {lineno}: undeclared vertex {exc}") from None
            edges.append((u, v))
            J.append(float(tok[3]) if len(tok) == 4 else 1.0)
        else:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}")
    lat = Lattice(len(ids), np.array(edges, dtype=np.int64).reshape(-1, 2))
    return lat, np.array(J, dtype=np.float64)


def format_edgelist(lat: Lattice, J=None) -> str:
    J = np.ones(lat.n_edges) if J is None else np.asarray(J, dtype=np.float64)
    lines = [f"v {x}" for x in range(lat.n_vertices)]
    lines += [f"e {u} {v} {j!r}" for (u, v), j in zip(lat.edges.tolist(), J.tolist())]
    return "\n".join(lines) + "\n"


def read_edgelist(path):
    with open(path) as fh:
        return parse_edgelist(fh.read())


# ---------------------------------------------------------------------------
# even subgraphs


@dataclass(frozen=True, eq=False)
class CycleSpace:
    """Spanning forest and fundamental cycles of a multigraph.

    Masks are python ints, bit ``e`` standing for edge ``e``.
    """

    lat: Lattice
    basis: tuple
    root_path: tuple
    component: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.basis)

    def source_solution(self, A) -> int | None:
        """Some edge set whose odd-degree vertices are exactly ``A``, or None."""
        mask = 0
        count = {}
        for a in set(int(x) for x in A):
            mask ^= self.root_path[a]
            c = int(self.component[a])
            count[c] = count.get(c, 0) ^ 1
        if any(count.values()):
            return None
        return mask


def cycle_space(lat: Lattice) -> CycleSpace:
    V = lat.n_vertices
    ip, nb, eid = lat.adjacency
    comp = -np.ones(V, dtype=np.int64)
    path = [0] * V
    tree = np.zeros(lat.n_edges, dtype=bool)
    for r in range(V):
        if comp[r] >= 0:
            continue
        comp[r] = r
        q = deque([r])
        while q:
            x = q.popleft()
            for k in range(ip[x], ip[x + 1]):
                y, e = int(nb[k]), int(eid[k])
                if comp[y] < 0:
                    comp[y] = r
                    tree[e] = True
                    path[y] = path[x] ^ (1 << e)
                    q.append(y)
    basis = []
    for e in range(lat.n_edges):
        if not tree[e]:
            u, v = lat.edges[e]
            basis.append(path[u] ^ path[v] ^ (1 << e))
    return CycleSpace(lat, tuple(basis), tuple(path), _frozen(comp))


def _span(basis, base=0) -> Iterator[int]:
    mask = base
    yield mask
    for i in range(1, 1 << len(basis)):
        j = (i & -i).bit_length() - 1
        mask ^= basis[j]
        yield mask


def mask_edges(mask: int) -> tuple:
    out = []
    e = 0
    while mask:
        if mask & 1:
            out.append(e)
        mask >>= 1
        e += 1
    return tuple(out)


def even_subgraphs(lat: Lattice, sources=(), max_dim: int = MAX_CYCLE_DIM):
    """Yield every edge set (tuple of edge ids) with odd-degree set ``sources``.

    With no sources these are the even subgraphs; there are ``2**dim`` of
    them, ``dim = E - V + components``. Refuses when ``dim > max_dim``.
    """
    cs = cycle_space(lat)
    if cs.dim > max_dim:
        raise ValueError(f"cycle space dimension {cs.dim} exceeds {max_dim}")
    base = cs.source_solution(sources)
    if base is None:
        return
    for m in _span(cs.basis, base):
        yield mask_edges(m)


def even_subgraph_masks(lat: Lattice, sources=(), max_dim: int = MAX_CYCLE_DIM) -> np.ndarray:
    """All edge sets with odd-degree set ``sources`` as a boolean (n, E) array."""
    cs = cycle_space(lat)
    if cs.dim > max_dim:
        raise ValueError(f"cycle space dimension {cs.dim} exceeds {max_dim}")
    base = cs.source_solution(sources)
    E = lat.n_edges
    if base is None:
        return np.zeros((0, E), dtype=bool)
    rows = np.zeros((1, E), dtype=bool)
    rows[0] = [(base >> e) & 1 for e in range(E)]
    for b in cs.basis:
        bv = np.array([(b >> e) & 1 for e in range(E)], dtype=bool)
        rows = np.concatenate([rows, rows ^ bv])
    return rows


def even_subgraph_size_counts(lat: Lattice, max_dim: int = MAX_CYCLE_DIM) -> np.ndarray:
    """Number of even subgraphs with k edges, for k = 0..E."""
    from . import kernels

    cs = cycle_space(lat)
    if cs.dim > max_dim:
        raise ValueError(f"cycle space dimension {cs.dim} exceeds {max_dim}")
    if lat.n_edges > 63:
        raise ValueError("size counting supports at most 63 edges")
    basis = np.array(cs.basis, dtype=np.uint64)
    return kernels.even_subgraph_counts(basis, lat.n_edges)

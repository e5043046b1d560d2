"""Correlation inequalities, Lee-Yang zeros and reflection-positivity bounds.

Every check evaluates both sides exactly (by enumeration) on small graphs,
except the infrared bound on three-dimensional tori, which uses Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import networkx as nx
import numpy as np
from scipy.special import logsumexp

from .currents import ursell4
from .enumeration import Ensemble, log_weights, parity_sign, spin_column
from .estimators import choose_bin_size, pooled_bins
from .fk import MAX_FK_EDGES, FkEnsemble, is_increasing, random_increasing
from .lattice import FREE, BoundaryCondition, Couplings, Lattice, build_lattice
from .mc import Sampler, run_chains

SPIN_KINDS = ("griffiths1", "griffiths2", "ghs", "simon-lieb", "mms", "fkg")
BATTERY_KINDS = SPIN_KINDS + ("fkg-fk", "p-monotone", "lee-yang", "gaussian-domination",
                              "ursell")
MAX_INSTANCE_VERTICES = 18
GHS_SLACK = 1e-8
TOLERANCE = 1e-10


@dataclass
class InequalityInstance:
    """A model plus the data one inequality needs.

    ``x`` is a vertex for GHS and Simon-Lieb and a translation vector for
    MMS, where ``y`` is the second translation. ``f`` and ``g`` give
    function values over all ``2^V`` spin states.
    """

    lat: Lattice
    coup: Couplings
    bc: BoundaryCondition = FREE
    A: tuple = ()
    B: tuple = ()
    x: object = None
    y: object = None
    origin: int = 0
    S: tuple = ()
    f: np.ndarray | None = None
    g: np.ndarray | None = None


@dataclass(frozen=True)
class Sides:
    """``lesser <= greater`` is the claim; ``slack`` absorbs numerical error."""

    lesser: float
    greater: float
    slack: float = 0.0

    @property
    def margin(self) -> float:
        return self.greater - self.lesser

    @property
    def violation(self) -> float:
        return max(0.0, self.lesser - self.greater - self.slack)


def _ferro(inst, need_field_zero=False, need_nonneg_field=False):
    if inst.lat.n_vertices > MAX_INSTANCE_VERTICES:
        raise ValueError(f"instances are limited to {MAX_INSTANCE_VERTICES} vertices")
    if np.any(inst.coup.couplings(inst.lat) < 0):
        raise ValueError("inequality needs ferromagnetic couplings")
    h = inst.coup.field(inst.lat)
    if need_field_zero and (np.any(h != 0) or inst.bc.kind != "free"):
        raise ValueError("inequality needs zero field and free boundary")
    if need_nonneg_field and np.any(h < 0):
        raise ValueError("inequality needs a non-negative field")
    if inst.bc.kind not in ("free", "plus"):
        raise ValueError("inequality needs free or plus boundary")


def _vertex_set(A, V):
    A = tuple(int(a) for a in A)
    if any(not 0 <= a < V for a in A):
        raise ValueError("vertex out of range")
    return A


def _ghs_magnetisation(inst, x):
    lat, coup = inst.lat, inst.coup
    h0 = coup.field(lat)
    J = coup.couplings(lat)
    col = spin_column(lat.n_vertices, x).astype(np.float64)

    def m(t):
        return Ensemble(lat, Couplings(coup.beta, h0 + t, J), inst.bc).expect(col)
    return m


def ghs_second_derivative(inst: InequalityInstance, x: int, delta: float = 1e-3):
    """``d^2 <sigma_x> / dt^2`` under a uniform field shift ``t``.

    Returns the five-point finite difference at the smallest centre keeping
    every field non-negative, and the exact value there from the third
    cumulant ``beta^2 <sigma_x; M; M>``.
    """
    h0 = inst.coup.field(inst.lat)
    c = max(0.0, 2 * delta - float(h0.min()))
    m = _ghs_magnetisation(inst, x)
    v = [m(c + k * delta) for k in (-2, -1, 0, 1, 2)]
    fd = (-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4]) / (12 * delta ** 2)
    lat = inst.lat
    ens = Ensemble(lat, Couplings(inst.coup.beta, h0 + c, inst.coup.couplings(lat)), inst.bc)
    s = spin_column(lat.n_vertices, x).astype(np.float64)
    M = sum(spin_column(lat.n_vertices, y).astype(np.float64) for y in range(lat.n_vertices))
    E = ens.expect
    k3 = (E(s * M * M) - E(s) * E(M * M) - 2 * E(s * M) * E(M) + 2 * E(s) * E(M) ** 2)
    return fd, inst.coup.beta ** 2 * k3


def vertex_boundary(lat: Lattice, S) -> tuple:
    """Vertices of ``S`` with a neighbour outside ``S``."""
    S = set(int(s) for s in S)
    out = []
    for y in sorted(S):
        if any(int(z) not in S for z in lat.neighbours(y)):
            out.append(y)
    return tuple(out)


def simon_lieb_sides(inst: InequalityInstance) -> Sides:
    lat, coup = inst.lat, inst.coup
    V = lat.n_vertices
    o, x = int(inst.origin), int(inst.x)
    S = set(_vertex_set(inst.S, V))
    if o not in S or x in S:
        raise ValueError("Simon-Lieb needs the origin in S and x outside S")
    full = Ensemble(lat, coup, inst.bc).two_point_matrix()
    sub, keep = lat.induced(S)
    order = sorted(S)
    pos = {v: i for i, v in enumerate(order)}
    inner = Ensemble(sub, Couplings(coup.beta, 0.0, coup.couplings(lat)[keep])).two_point_matrix()
    rhs = sum(inner[pos[o], pos[y]] * full[y, x] for y in vertex_boundary(lat, S))
    return Sides(float(full[o, x]), float(rhs))


def _mms_vertex(lat, v):
    v = np.asarray(v, dtype=np.int64)
    if lat.topology == "torus":
        v = v % np.asarray(lat.sides)
    return lat.index(tuple(int(c) for c in v))


def mms_admissible(lat: Lattice, x, y) -> bool:
    """Whether ``(x, y)`` lies in the class where the finite-volume MMS form is asserted.

    On a box from the corner: ``x`` and ``y`` are non-negative multiples of
    the same axis. On a torus: ``y`` is a non-negative axis step and every
    coordinate of ``x`` and ``x + y`` lies in ``[0, L/2]``.
    """
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if np.any(y < 0) or np.count_nonzero(y) > 1 or np.any(x < 0):
        return False
    if lat.topology == "box":
        return np.count_nonzero(x) == 0 or np.count_nonzero(y) == 0 or bool(
            np.all((x != 0) == (y != 0)))
    if lat.topology == "torus":
        return bool(np.all(x + y <= np.asarray(lat.sides) // 2))
    return False


def mms_sides(inst: InequalityInstance, strict: bool = True) -> Sides:
    lat, coup = inst.lat, inst.coup
    if lat.topology not in ("box", "torus") or lat.coords is None or lat.ghost is not None:
        raise ValueError("MMS needs a plain box or torus")
    if coup.uniform_J(lat) is None:
        raise ValueError("MMS needs uniform couplings")
    x = np.asarray(inst.x, dtype=np.int64)
    y = np.asarray(inst.y, dtype=np.int64)
    if x.shape != (lat.dim,) or y.shape != (lat.dim,):
        raise ValueError("x and y must be translation vectors")
    if np.count_nonzero(y) > 1:
        raise ValueError("y must be axis-aligned")
    if strict and not mms_admissible(lat, x, y):
        raise ValueError("translation pair outside the asserted class; see mms_survey")
    if lat.topology == "box" and np.any(x + y >= np.asarray(lat.sides)):
        raise ValueError("x + y leaves the box")
    G = Ensemble(lat, coup, inst.bc).two_point_matrix()
    o = lat.index((0,) * lat.dim)
    return Sides(float(G[o, _mms_vertex(lat, x + y)]), float(G[o, _mms_vertex(lat, x)]))


def spin_increasing(values, V: int) -> bool:
    """Whether a function of ``2^V`` states increases with every spin."""
    # raising a spin clears its bit, so reverse the state order
    return is_increasing(np.asarray(values, dtype=np.float64)[::-1], V)


def random_increasing_spin(V: int, rng, n_terms: int = 3) -> np.ndarray:
    """Random increasing function of the spins over all ``2^V`` states."""
    return random_increasing(V, rng, n_terms)[::-1].copy()


def inequality_sides(kind: str, inst: InequalityInstance) -> Sides:
    """Both sides of one inequality, evaluated exactly."""
    V = inst.lat.n_vertices
    if kind == "griffiths1":
        _ferro(inst, need_nonneg_field=True)
        A = _vertex_set(inst.A, V)
        return Sides(0.0, Ensemble(inst.lat, inst.coup, inst.bc).expect_sigma(A))
    if kind == "griffiths2":
        _ferro(inst, need_nonneg_field=True)
        A, B = _vertex_set(inst.A, V), _vertex_set(inst.B, V)
        ens = Ensemble(inst.lat, inst.coup, inst.bc)
        both = ens.expect(parity_sign(V, A) * parity_sign(V, B))
        return Sides(ens.expect_sigma(A) * ens.expect_sigma(B), both)
    if kind == "ghs":
        _ferro(inst, need_nonneg_field=True)
        x = _vertex_set([inst.x], V)[0]
        fd, _ = ghs_second_derivative(inst, x)
        return Sides(fd, 0.0, GHS_SLACK)
    if kind == "simon-lieb":
        _ferro(inst, need_field_zero=True)
        return simon_lieb_sides(inst)
    if kind == "mms":
        _ferro(inst, need_field_zero=True)
        return mms_sides(inst)
    if kind == "fkg":
        _ferro(inst)
        f = np.asarray(inst.f, dtype=np.float64)
        g = np.asarray(inst.g, dtype=np.float64)
        if f.shape != (1 << V,) or g.shape != (1 << V,):
            raise ValueError("f and g need one value per spin state")
        if not (spin_increasing(f, V) and spin_increasing(g, V)):
            raise ValueError("f and g must be increasing")
        ens = Ensemble(inst.lat, inst.coup, inst.bc)
        return Sides(ens.expect(f) * ens.expect(g), ens.expect(f * g))
    raise ValueError(f"unknown inequality {kind!r}; choose from {SPIN_KINDS}")


def check_spin_inequality(kind: str, inst: InequalityInstance) -> float:
    """Amount by which an inequality fails, beyond its numerical slack.

    Kinds: ``griffiths1`` (``<sigma_A> >= 0``), ``griffiths2``
    (``<sigma_A sigma_B> >= <sigma_A><sigma_B>``), ``ghs`` (``m_x`` concave
    in a uniform field for ``h >= 0``), ``simon-lieb``, ``mms`` and ``fkg``.

    Examples
    --------
    >>> lat = build_lattice(1, 2)
    >>> check_spin_inequality("griffiths1", InequalityInstance(lat, Couplings(0.7), A=(0, 1)))
    0.0
    """
    return inequality_sides(kind, inst).violation


def mms_survey(lat: Lattice, beta: float, max_step: int | None = None):
    """MMS margins for every axis-aligned pair from the corner, in or out of class.

    Returns a list of ``(x, y, margin, admissible)``; negative margins
    outside the asserted class are reported rather than raised.
    """
    coup = Couplings(beta)
    G = Ensemble(lat, coup).two_point_matrix()
    o = lat.index((0,) * lat.dim)
    sides = np.asarray(lat.sides)
    top = sides - 1 if lat.topology == "box" else sides // 2
    if max_step is not None:
        top = np.minimum(top, max_step)
    out = []
    for x in np.ndindex(*(top + 1)):
        x = np.asarray(x)
        for axis in range(lat.dim):
            for step in range(1, int(top[axis]) + 1):
                y = np.zeros(lat.dim, dtype=np.int64)
                y[axis] = step
                if lat.topology == "box" and np.any(x + y >= sides):
                    continue
                margin = G[o, _mms_vertex(lat, x)] - G[o, _mms_vertex(lat, x + y)]
                out.append((tuple(int(v) for v in x), tuple(int(v) for v in y), float(margin),
                            mms_admissible(lat, x, y)))
    return out


# ---------------------------------------------------------------------------
# Lee-Yang zeros


@dataclass
class LeeYangZeros:
    """Roots in ``z = exp(2 beta h)`` of the partition polynomial."""

    roots: np.ndarray
    coefficients: np.ndarray
    polished: bool

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.roots)

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.moduli - 1.0))) if len(self.roots) else 0.0


def partition_polynomial(lat: Lattice, beta: float, J=None) -> np.ndarray:
    """Coefficients, highest degree first, of ``z^{V/2} Z(h)`` up to a constant.

    The coefficient of ``z^{V-k}`` sums the zero-field weights of states
    with ``k`` minus spins, so ``Z(h) = e^{-beta h V} P(e^{2 beta h})``.
    """
    V = lat.n_vertices
    lw = log_weights(lat, Couplings(beta, 0.0, J))
    k = np.bitwise_count(np.arange(1 << V, dtype=np.uint64)).astype(np.int64)
    # at beta = 0 every weight is exactly 1 and the coefficients are exact integers
    return np.bincount(k, weights=np.exp(lw - lw.max()), minlength=V + 1)


def _deflate_minus_one(c, rtol=1e-12):
    """Divide out ``(z + 1)`` while it is a factor; returns quotient and multiplicity.

    Spin-flip symmetry makes the coefficients palindromic, so ``z = -1`` is
    a root for odd ``V`` and a root of multiplicity ``V`` at ``beta = 0``.
    Removing it exactly avoids the ill-conditioning of multiple roots.
    """
    c = np.asarray(c, dtype=np.float64)
    c = 0.5 * (c + c[::-1])
    mult = 0
    while len(c) > 1:
        q = np.zeros(len(c) - 1)
        acc = 0.0
        for i, v in enumerate(c[:-1]):
            acc = v - acc
            q[i] = acc
        rem = c[-1] - acc
        if abs(rem) > rtol * np.abs(c).sum():
            break
        c, mult = q, mult + 1
    return c, mult


def lee_yang_zeros(lat: Lattice, beta: float, J=None, allow_antiferro: bool = False,
                   polish_above: float = 1e-9) -> LeeYangZeros:
    """All zeros of the partition function as a polynomial in ``z = e^{2 beta h}``.

    Roots come from companion-matrix eigenvalues; if any modulus is further
    than ``polish_above`` from 1 they are recomputed in extended precision.

    Examples
    --------
    >>> z = lee_yang_zeros(build_lattice(1, 1), 0.5)
    >>> z.roots.round(12).tolist()
    [(-1+0j)]
    """
    V = lat.n_vertices
    if V > 12:
        raise ValueError("Lee-Yang zeros limited to 12 vertices")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    Jv = Couplings(beta, 0.0, J).couplings(lat)
    if np.any(Jv < 0) and not allow_antiferro:
        raise ValueError("Lee-Yang needs J >= 0")
    c = partition_polynomial(lat, beta, J)
    if V == 0:
        return LeeYangZeros(np.zeros(0, dtype=complex), c, False)
    rest, mult = _deflate_minus_one(c)
    ones = -np.ones(mult, dtype=complex)
    roots = np.roots(rest).astype(complex) if len(rest) > 1 else np.zeros(0, dtype=complex)
    out = LeeYangZeros(np.concatenate([ones, roots]), c, False)
    if out.max_deviation > polish_above:
        try:
            with mpmath.workprec(53):
                r = mpmath.polyroots([mpmath.mpf(float(v)) for v in rest], maxsteps=2000,
                                     extraprec=400)
        except mpmath.libmp.NoConvergence as exc:
            raise RuntimeError(f"root finder did not converge for coefficients {c.tolist()}"
                               ) from exc
        r = np.array([complex(v) for v in r], dtype=complex)
        out = LeeYangZeros(np.concatenate([ones, r]), c, True)
    return out


# ---------------------------------------------------------------------------
# reflection positivity


def _even_torus(L, d):
    if L % 2:
        raise ValueError("reflection positivity needs an even torus side")
    return build_lattice(d, (L,) * d, "torus")


def gaussian_log_partition(lat: Lattice, beta: float, h) -> float:
    """``ln sum_sigma exp(-beta sum_edges (sigma_x - sigma_y + h_x - h_y)^2)``.

    Expanding the square turns this into an Ising model with couplings 2 and
    field ``-2 sum_{y ~ x} (h_x - h_y)``, times a constant.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (lat.n_vertices,):
        raise ValueError("need one field value per vertex")
    dh = h[lat.eu] - h[lat.ev]
    f = np.zeros(lat.n_vertices)
    np.add.at(f, lat.eu, -2.0 * dh)
    np.add.at(f, lat.ev, 2.0 * dh)
    const = -beta * (2.0 * lat.n_edges + (dh ** 2).sum())
    lw = log_weights(lat, Couplings(beta, 0.0, 2.0), field=f)
    return const + float(logsumexp(lw))


def gaussian_domination_check(L: int, d: int, beta: float, h) -> float:
    """``max(0, Z(h) - Z(0)) / Z(0)`` for the gradient-form partition function."""
    lat = _even_torus(L, d)
    if lat.n_vertices > 20:
        raise ValueError("Gaussian domination check limited to 20 vertices")
    diff = gaussian_log_partition(lat, beta, h) - gaussian_log_partition(
        lat, beta, np.zeros(lat.n_vertices))
    return max(0.0, math.expm1(diff))


@dataclass
class InfraredReport:
    """Per-momentum comparison of the spin structure factor with ``(2/beta)/eps(k)``."""

    momenta: list
    structure: np.ndarray
    stderr: np.ndarray
    bound: np.ndarray
    in_theorem: bool
    method: str

    @property
    def margins(self) -> np.ndarray:
        return self.bound - self.structure


def _fourier_power(s, shape):
    g = np.fft.fftn(s.reshape(shape).astype(np.float64))
    return np.abs(g) ** 2 / s.size


def infrared_bound_check(L: int, d: int, beta: float, momenta=None, method: str = "auto",
                         chains: int = 4, sweeps: int = 2000, burnin: int = 200, seed: int = 0,
                         threads=None) -> InfraredReport:
    """Structure factor ``G(k) = |sum_x e^{ik.x} sigma_x|^2 / V`` against ``(2/beta)/eps(k)``.

    ``eps(k) = 2 sum_i (1 - cos k_i)``. Momenta are integer vectors ``n``
    with ``k = 2 pi n / L``, all non-zero ones by default. ``method`` is
    ``exact`` (enumeration), ``mc`` (Swendsen-Wang) or ``auto``. The bound
    is a theorem for ``d >= 3``; lower dimensions run but are flagged.
    """
    if beta <= 0:
        raise ValueError("beta must be > 0")
    lat = _even_torus(L, d)
    shape = (L,) * d
    if momenta is None:
        momenta = [n for n in np.ndindex(*shape) if any(n)]
    momenta = [tuple(int(v) % L for v in n) for n in momenta]
    if any(not any(n) for n in momenta):
        raise ValueError("k = 0 has no bound")
    if method == "auto":
        method = "exact" if lat.n_vertices <= 16 else "mc"
    idx = tuple(np.array(momenta).T)
    if method == "exact":
        ens = Ensemble(lat, Couplings(beta))
        G = ens.two_point_matrix()
        power = np.real(np.fft.fftn(G[0].reshape(shape)))
        vals, errs = power[idx], np.zeros(len(momenta))
    elif method == "mc":
        sampler = Sampler(lat, Couplings(beta), FREE, "sw")
        data = run_chains(sampler, chains, sweeps, burnin, seed,
                          lambda s, _: _fourier_power(s, shape)[idx], threads, init="random")
        bins = pooled_bins(data, choose_bin_size(data))
        vals = np.concatenate(data).mean(axis=0)
        errs = bins.std(axis=0, ddof=1) / math.sqrt(len(bins))
    else:
        raise ValueError(f"unknown method {method!r}")
    k = 2 * math.pi * np.array(momenta, dtype=np.float64) / L
    eps = 2 * (1 - np.cos(k)).sum(axis=1)
    return InfraredReport(momenta, np.asarray(vals), np.asarray(errs), (2 / beta) / eps,
                          d >= 3, method)


# ---------------------------------------------------------------------------
# random batteries


@dataclass
class BatteryReport:
    kind: str
    trials: int
    violations: int
    worst_margin: float
    details: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {"kind": self.kind, "trials": self.trials, "violations": self.violations,
                "worst_margin": self.worst_margin}


def random_graph(rng, n_max: int = 8, n_min: int = 2, max_edges: int | None = None) -> Lattice:
    """Small connected graph: a box, a torus or a connected G(n, p)."""
    while True:
        family = rng.integers(0, 3)
        if family == 0:
            a = int(rng.integers(1, 5))
            b = int(rng.integers(2, max(3, n_max // a + 1)))
            lat = build_lattice(2, (a, b))
        elif family == 1 and n_max >= 9:
            lat = build_lattice(2, (3, 3), "torus")
        else:
            n = int(rng.integers(n_min, n_max + 1))
            for _ in range(100):
                g = nx.gnp_random_graph(n, float(rng.uniform(0.3, 0.9)),
                                        seed=int(rng.integers(1 << 31)))
                if nx.is_connected(g):
                    break
            lat = Lattice(n, np.array(sorted(g.edges()), dtype=np.int64).reshape(-1, 2))
        ok = n_min <= lat.n_vertices <= n_max and lat.n_edges >= 1
        if ok and (max_edges is None or lat.n_edges <= max_edges):
            return lat


def _random_couplings(rng, lat, field="nonneg"):
    J = rng.uniform(0.0, 2.0, lat.n_edges)
    J[rng.random(lat.n_edges) < 0.1] = 0.0
    beta = float(rng.uniform(0.05, 1.5))
    if field == "zero":
        h = 0.0
    elif field == "nonneg":
        h = rng.uniform(0.0, 1.0, lat.n_vertices) * (rng.random(lat.n_vertices) < 0.7)
    else:
        h = rng.uniform(-1.0, 1.0, lat.n_vertices)
    return Couplings(beta, h, J)


def _subset(rng, V, lo=1, hi=4):
    size = int(rng.integers(lo, min(hi, V) + 1))
    return tuple(sorted(int(v) for v in rng.choice(V, size, replace=False)))


def _mms_instance(rng, cap):
    if rng.random() < 0.5 or cap < 9:
        a = int(rng.integers(1, 5))
        b = int(rng.integers(2, max(3, min(6, cap // a) + 1)))
        lat = build_lattice(2, (a, b))
        axis = int(rng.integers(0, 2)) if a > 1 else 1
        n = lat.sides[axis]
        xs = int(rng.integers(0, n - 1))
        ys = int(rng.integers(1, n - xs))
        x = np.zeros(2, dtype=np.int64)
        y = np.zeros(2, dtype=np.int64)
        x[axis], y[axis] = xs, ys
    else:
        L = 4 if cap >= 16 else 3
        lat = build_lattice(2, (L, L), "torus")
        half = L // 2
        axis = int(rng.integers(0, 2))
        x = rng.integers(0, half + 1, 2)
        x[axis] = min(x[axis], half - 1)
        y = np.zeros(2, dtype=np.int64)
        y[axis] = int(rng.integers(1, half - x[axis] + 1))
    return InequalityInstance(lat, Couplings(float(rng.uniform(0.05, 1.5))), x=x, y=y)


def random_instance(kind: str, rng, size_cap: int = 9) -> InequalityInstance:
    """A random instance of one spin inequality within ``size_cap`` vertices."""
    cap = min(size_cap, MAX_INSTANCE_VERTICES)
    if kind == "mms":
        return _mms_instance(rng, max(cap, 9))
    lat = random_graph(rng, min(cap, 8) if kind == "fkg" else cap)
    V = lat.n_vertices
    if kind in ("griffiths1", "griffiths2", "ghs"):
        coup = _random_couplings(rng, lat, "nonneg")
        return InequalityInstance(lat, coup, A=_subset(rng, V), B=_subset(rng, V),
                                  x=int(rng.integers(V)))
    if kind == "simon-lieb":
        coup = _random_couplings(rng, lat, "zero")
        o, x = (int(v) for v in rng.choice(V, 2, replace=False))
        rest = [v for v in range(V) if v not in (o, x)]
        extra = [v for v in rest if rng.random() < 0.5]
        return InequalityInstance(lat, coup, origin=o, x=x, S=tuple(sorted([o] + extra)))
    if kind == "fkg":
        coup = _random_couplings(rng, lat, "any")
        return InequalityInstance(lat, coup, f=random_increasing_spin(V, rng),
                                  g=random_increasing_spin(V, rng))
    raise ValueError(f"no random instances for {kind!r}")


def _one_trial(kind, rng, size_cap, q):
    """Margin (greater minus lesser side) and violation of one random trial."""
    if kind in SPIN_KINDS:
        s = inequality_sides(kind, random_instance(kind, rng, size_cap))
        return s.margin, s.violation > TOLERANCE
    if kind in ("fkg-fk", "p-monotone"):
        lat = random_graph(rng, min(size_cap, 8), max_edges=min(12, MAX_FK_EDGES))
        E = lat.n_edges
        qq = float(q if q is not None else rng.choice([1.0, 2.0, 3.0]))
        p = float(rng.uniform(0.05, 0.95))
        f = random_increasing(E, rng)
        if kind == "fkg-fk":
            fk = FkEnsemble(lat, p, qq)
            g = random_increasing(E, rng)
            margin = fk.expect(f * g) - fk.expect(f) * fk.expect(g)
        else:
            p2 = float(rng.uniform(p, 0.99))
            margin = FkEnsemble(lat, p2, qq).expect(f) - FkEnsemble(lat, p, qq).expect(f)
        return margin, -margin > TOLERANCE
    if kind == "lee-yang":
        lat = random_graph(rng, min(size_cap, 8))
        J = rng.uniform(0.0, 2.0, lat.n_edges)
        dev = lee_yang_zeros(lat, float(rng.uniform(0.01, 2.0)), J).max_deviation
        return 1e-6 - dev, dev > 1e-6
    if kind == "gaussian-domination":
        beta = float(rng.choice([0.3, 0.5]))
        h = rng.normal(0.0, 1.0, 16)
        lat = _even_torus(4, 2)
        diff = gaussian_log_partition(lat, beta, h) - gaussian_log_partition(lat, beta, 0 * h)
        return -diff, diff > TOLERANCE
    if kind == "ursell":
        lat = random_graph(rng, min(size_cap, 8), n_min=4)
        beta = float(rng.uniform(0.05, 1.5))
        xs = [int(v) for v in rng.choice(lat.n_vertices, 4, replace=False)]
        u4, _ = ursell4(lat, beta, xs)
        return -u4, u4 > TOLERANCE
    raise ValueError(f"unknown battery kind {kind!r}; choose from {BATTERY_KINDS}")


def run_battery(kind: str, trials: int = 50, seed: int = 0, size_cap: int = 9,
                q: float | None = None) -> BatteryReport:
    """Check one inequality on ``trials`` random instances.

    Trial ``i`` draws from ``numpy.random.default_rng([seed, i])``, so any
    trial can be replayed alone. ``q`` fixes the cluster weight of the FK
    kinds (default: drawn from 1, 2, 3).
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    margins, bad = [], 0
    for i in range(trials):
        m, v = _one_trial(kind, np.random.default_rng([seed, i]), size_cap, q)
        margins.append(m)
        bad += bool(v)
    return BatteryReport(kind, trials, bad, float(min(margins)), margins)

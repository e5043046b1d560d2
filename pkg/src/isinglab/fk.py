"""Random-cluster (FK) measures, the Edwards-Sokal coupling and crossings."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .enumeration import Ensemble
from .estimators import Estimate, choose_bin_size, pooled_bins
from .lattice import Couplings, Lattice, build_lattice
from .mc import Sampler, run_chains

MAX_FK_EDGES = 20


def p_of_beta(beta, J=1.0):
    """Edge probability ``1 - exp(-2 beta J)`` paired with the Ising model."""
    return -np.expm1(-2.0 * np.asarray(beta, dtype=np.float64) * J)


def beta_of_p(p, J=1.0):
    if not 0 <= p < 1:
        raise ValueError("p must lie in [0, 1)")
    return -0.5 * math.log1p(-p) / J


@dataclass(eq=False)
class FkConfig:
    """Open/closed state of every edge."""

    lat: Lattice
    omega: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega).astype(np.uint8)
        if self.omega.shape != (self.lat.n_edges,):
            raise ValueError("omega needs one entry per edge")

    @property
    def roots(self):
        return kernels.cluster_roots(self.lat.n_vertices, self.lat.eu, self.lat.ev, self.omega)

    @property
    def n_open(self):
        return int(self.omega.sum())

    @property
    def n_clusters(self):
        return int(len(np.unique(self.roots)))

    def connected(self, x, y) -> bool:
        r = self.roots
        return bool(r[x] == r[y])


def fk_log_weight(omega, lat: Lattice, p: float, q: float) -> float:
    """``|w| ln p + |closed| ln(1-p) + k(w) ln q`` (unnormalised)."""
    if not 0 <= p <= 1 or q <= 0:
        raise ValueError("need 0 <= p <= 1 and q > 0")
    cfg = omega if isinstance(omega, FkConfig) else FkConfig(lat, omega)
    n_open = cfg.n_open
    closed = lat.n_edges - n_open
    out = cfg.n_clusters * math.log(q)
    for n, prob in ((n_open, p), (closed, 1 - p)):
        if n:
            out += n * math.log(prob) if prob > 0 else -math.inf
    return out


class FkEnsemble:
    """FK measure of a small graph held over all ``2^E`` edge states.

    Edge state ``s`` opens edge ``e`` when bit ``e`` is set. ``p`` may be
    a scalar or one value per edge.
    """

    def __init__(self, lat: Lattice, p, q: float = 2.0):
        E = lat.n_edges
        if E > MAX_FK_EDGES:
            raise ValueError(f"FK enumeration limited to {MAX_FK_EDGES} edges")
        if q <= 0:
            raise ValueError("q must be positive")
        p = np.broadcast_to(np.asarray(p, dtype=np.float64), (E,))
        if np.any((p < 0) | (p > 1)):
            raise ValueError("p must lie in [0, 1]")
        self.lat, self.p, self.q = lat, p, q
        self.roots = kernels.subset_cluster_roots(lat.n_vertices, lat.eu, lat.ev)
        V = lat.n_vertices
        self.k = (self.roots == np.arange(V, dtype=self.roots.dtype)).sum(axis=1)
        s = np.arange(1 << E, dtype=np.int64)
        bits = ((s[:, None] >> np.arange(E)) & 1).astype(bool)
        with np.errstate(divide="ignore"):
            lp, lq = np.log(p), np.log1p(-p)
        lw = np.where(bits, lp, lq).sum(axis=1) + self.k * math.log(q)
        self.log_z = float(logsumexp(lw))
        self.prob = np.exp(lw - self.log_z)
        self.bits = bits

    def expect(self, values) -> float:
        return float(self.prob @ values)

    def connected(self, x, y) -> np.ndarray:
        return self.roots[:, x] == self.roots[:, y]

    def even_event(self, A) -> np.ndarray:
        """Indicator that every cluster holds an even number of points of ``A``."""
        return even_clusters(self.roots, A)


def even_clusters(roots, A) -> np.ndarray:
    """For each row of cluster labels, whether each cluster meets ``A`` evenly."""
    roots = np.atleast_2d(roots)
    A = list(A)
    if not A:
        return np.ones(len(roots), dtype=bool)
    r = roots[:, A].astype(np.int64)
    r.sort(axis=1)
    # a sorted label list has only even runs iff consecutive pairs match
    if len(A) % 2:
        return np.zeros(len(roots), dtype=bool)
    return np.all(r[:, 0::2] == r[:, 1::2], axis=1)


def es_coupling_check(lat: Lattice, coup: Couplings | float, max_order: int = 4) -> float:
    """Largest gap between ``<sigma_A>`` and ``phi[every cluster meets A evenly]``.

    Checks every vertex set of even size up to ``max_order``; the FK side
    uses ``q = 2`` and ``p_e = 1 - exp(-2 beta J_e)``.
    """
    if not isinstance(coup, Couplings):
        coup = Couplings(float(coup))
    if np.any(coup.field(lat) != 0):
        raise ValueError("Edwards-Sokal check needs zero field")
    J = coup.couplings(lat)
    if np.any(J < 0):
        raise ValueError("Edwards-Sokal check needs J >= 0")
    ens = Ensemble(lat, coup)
    fk = FkEnsemble(lat, p_of_beta(coup.beta, J), 2.0)
    worst = 0.0
    for size in range(2, max_order + 1, 2):
        for A in itertools.combinations(range(lat.n_vertices), size):
            worst = max(worst, abs(ens.expect_sigma(A) - fk.expect(fk.even_event(A))))
    return worst


def edwards_sokal_spins(omega, lat: Lattice, rng=None) -> np.ndarray:
    """Give each cluster of ``omega`` an independent uniform sign."""
    rng = np.random.default_rng(rng)
    cfg = omega if isinstance(omega, FkConfig) else FkConfig(lat, omega)
    u = rng.random(lat.n_vertices)
    return np.where(u[cfg.roots] < 0.5, 1, -1).astype(np.int8)


def fk_chain(lat: Lattice, beta: float, chains: int, sweeps: int, burnin: int, seed: int,
             measure, threads=None, J=None):
    """Run Swendsen-Wang and measure ``measure(bonds, roots)`` each sweep.

    The bonds of a sweep are drawn given the spins at its start, so at
    stationarity they are distributed as the q = 2 random-cluster measure.
    """
    sampler = Sampler(lat, Couplings(beta, 0.0, J), algorithm="sw")
    V, eu, ev = lat.n_vertices, sampler.eu, sampler.ev

    def m(spins, bonds):
        return measure(bonds, kernels.cluster_roots(V, eu, ev, bonds))

    return run_chains(sampler, chains, sweeps, burnin, seed, m, threads, init="plus")


def fk_sample(lat: Lattice, beta: float, sweeps: int, seed: int, chain: int = 0) -> FkConfig:
    """FK (q = 2) configuration from the last of ``sweeps`` Swendsen-Wang sweeps."""
    if sweeps < 1:
        raise ValueError("need at least one sweep")
    sampler = Sampler(lat, Couplings(beta), algorithm="sw")
    st = sampler.init_state(seed, chain, "plus")
    bonds = None
    for _ in range(sweeps):
        bonds = sampler.sweep(st)
    return FkConfig(lat, bonds)


# ---------------------------------------------------------------------------
# positive association and monotonicity


def random_increasing(n_bits: int, rng, n_terms: int = 3) -> np.ndarray:
    """Values over ``{0,1}^n`` (bit set = larger) of a random increasing function.

    A non-negative combination of up-set indicators ``1[x >= eta]``.
    """
    s = np.arange(1 << n_bits, dtype=np.int64)
    out = np.zeros(1 << n_bits)
    for _ in range(n_terms):
        eta = int(rng.integers(0, 1 << n_bits))
        out += rng.uniform(0.1, 1.0) * ((s & eta) == eta)
    return out


def is_increasing(values, n_bits: int) -> bool:
    s = np.arange(1 << n_bits, dtype=np.int64)
    for b in range(n_bits):
        lo = s[(s >> b) & 1 == 0]
        if np.any(values[lo | (1 << b)] < values[lo] - 1e-15):
            return False
    return True


def fk_order_check(kind: str, lat: Lattice, p: float, q: float, f, g=None, p2=None) -> float:
    """Violation of FK positive association or monotonicity in ``p``.

    Parameters
    ----------
    kind : {"fkg", "monotone"}
        ``fkg``: ``phi[fg] >= phi[f] phi[g]``. ``monotone``:
        ``phi_{p2}[f] >= phi_p[f]`` for ``p2 >= p``.
    f, g : ndarray
        Increasing functions over all edge states.

    Returns
    -------
    float
        ``max(0, amount by which the inequality fails)``.
    """
    if q < 1:
        raise ValueError("positive association needs q >= 1")
    f = np.asarray(f, dtype=np.float64)
    if kind == "fkg":
        fk = FkEnsemble(lat, p, q)
        g = np.asarray(g, dtype=np.float64)
        return max(0.0, fk.expect(f) * fk.expect(g) - fk.expect(f * g))
    if kind == "monotone":
        if p2 is None or p2 < p:
            raise ValueError("monotone check needs p2 >= p")
        return max(0.0, FkEnsemble(lat, p, q).expect(f) - FkEnsemble(lat, p2, q).expect(f))
    raise ValueError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# crossings


def crossing_lattice(n: int, rho: float = 1.0) -> Lattice:
    """Box ``[0, rho n] x [0, n]`` of vertices."""
    length = rho * n
    if n < 1 or abs(length - round(length)) > 1e-9 or round(length) < 1:
        raise ValueError("rho * n must be a positive integer")
    return build_lattice(2, (int(round(length)) + 1, n + 1))


def horizontal_crossing(lat: Lattice, roots) -> bool:
    left = roots[lat.coords[:, 0] == 0]
    right = roots[lat.coords[:, 0] == lat.sides[0] - 1]
    return bool(np.intersect1d(left, right).size)


def crossing_probability(n: int, rho: float, p: float, sweeps: int, seed: int,
                         burnin: int = 100, chains: int = 2, threads=None) -> Estimate:
    """Probability of an open left-right crossing of the ``rho n x n`` box (q = 2)."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    lat = crossing_lattice(n, rho)
    if p == 0:
        return Estimate("crossing", 0.0, 0.0, 0)
    if p == 1:
        return Estimate("crossing", 1.0, 0.0, 0)
    beta = beta_of_p(p)
    left = lat.coords[:, 0] == 0
    right = lat.coords[:, 0] == lat.sides[0] - 1

    def meas(bonds, roots):
        return float(np.intersect1d(roots[left], roots[right]).size > 0)

    data = fk_chain(lat, beta, chains, sweeps, burnin, seed, meas, threads)
    b = pooled_bins(data, choose_bin_size(data))
    allx = np.concatenate(data)
    return Estimate("crossing", float(allx.mean()), float(b.std(ddof=1) / math.sqrt(len(b))),
                    len(allx), {"n": n, "rho": rho, "p": p, "seed": seed})

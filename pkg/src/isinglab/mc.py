"""Glauber and Swendsen-Wang Markov chains with reproducible parallel runs."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .exact import BETA_C
from .estimators import MIN_BINS, Estimate, choose_bin_size, jackknife, pooled_bins
from .lattice import (FREE, BoundaryCondition, Couplings, Lattice, SpinConfig, build_lattice,
                      effective_field)
from .rng import stream

ALGORITHMS = ("glauber", "sw")
OBSERVABLES = ("m", "abs_m", "energy", "specific_heat", "susceptibility", "two_point",
               "energy_energy")


def default_threads():
    """Thread count from ``ISING_LAB_THREADS``, else 1."""
    try:
        return max(1, int(os.environ.get("ISING_LAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class ChainState:
    """Spins of one chain plus the coordinates of its random stream."""

    spins: np.ndarray
    seed: int
    chain: int
    sweep: int = 0

    @property
    def config(self) -> SpinConfig:
        return SpinConfig.from_array(self.spins)


class Sampler:
    """Precomputed arrays for repeated sweeps of one model.

    Parameters
    ----------
    lat, coup, bc
        The model. Swendsen-Wang needs zero field, free boundary and
        non-negative couplings.
    algorithm : {"glauber", "sw"}
    """

    def __init__(self, lat: Lattice, coup: Couplings, bc: BoundaryCondition = FREE,
                 algorithm: str = "sw"):
        if algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algorithm!r}")
        self.lat, self.coup, self.bc = lat, coup, bc
        self.algorithm = algorithm
        self.beta = float(coup.beta)
        self.J = np.ascontiguousarray(coup.couplings(lat))
        self.field = np.ascontiguousarray(effective_field(lat, coup, bc))
        ip, nb, eid = lat.adjacency
        self.indptr, self.nbr = ip, nb
        self.wts = np.ascontiguousarray(self.J[eid])
        self.eu = np.ascontiguousarray(lat.eu)
        self.ev = np.ascontiguousarray(lat.ev)
        if algorithm == "sw":
            if np.any(self.field != 0):
                raise ValueError("Swendsen-Wang needs zero field and free boundary")
            if np.any(self.J < 0):
                raise ValueError("Swendsen-Wang needs ferromagnetic couplings")
        self.prob = -np.expm1(-2.0 * self.beta * self.J)

    def init_state(self, seed: int, chain: int, init: str = "plus") -> ChainState:
        V = self.lat.n_vertices
        if init == "plus":
            s = np.ones(V, dtype=np.int8)
        elif init == "minus":
            s = -np.ones(V, dtype=np.int8)
        elif init == "random":
            s = np.where(stream(seed, chain, 0).random(V) < 0.5, 1, -1).astype(np.int8)
        else:
            raise ValueError(f"unknown init {init!r}")
        return ChainState(s, seed, chain, 0)

    def sweep(self, state: ChainState):
        """Advance one sweep; returns the bonds drawn (SW) or the flip count."""
        state.sweep += 1
        gen = stream(state.seed, state.chain, state.sweep)
        if self.algorithm == "glauber":
            V = self.lat.n_vertices
            sites = gen.integers(0, V, size=V)
            u = gen.random(V)
            return kernels.glauber_sweep(state.spins, self.indptr, self.nbr, self.wts,
                                         self.field, self.beta, sites, u)
        ue = gen.random(self.lat.n_edges)
        uc = gen.random(self.lat.n_vertices)
        bonds = kernels.sw_bonds(state.spins, self.eu, self.ev, self.prob, ue)
        roots = kernels.cluster_roots(self.lat.n_vertices, self.eu, self.ev, bonds)
        state.spins[:] = np.where(uc[roots] < 0.5, 1, -1)
        return bonds


def glauber_sweep(state: ChainState, lat, coup, bc=FREE):
    """One sweep of ``V`` random-site Metropolis-form updates."""
    return Sampler(lat, coup, bc, "glauber").sweep(state)


def swendsen_wang_sweep(state: ChainState, lat, coup):
    """One Swendsen-Wang update; returns the open bonds."""
    return Sampler(lat, coup, FREE, "sw").sweep(state)


def run_chains(sampler: Sampler, chains: int, sweeps: int, burnin: int, seed: int,
               measure, threads: int | None = None, init: str = "plus"):
    """Run independent chains and collect ``measure(spins, bonds)`` after burn-in.

    Returns a list (in chain order) of arrays of shape (sweeps - burnin, k).
    """
    if chains < 1:
        raise ValueError("need at least one chain")
    if sweeps <= burnin or burnin < 0:
        raise ValueError("sweeps must exceed burnin")
    threads = default_threads() if threads is None else max(1, int(threads))

    def one(c):
        st = sampler.init_state(seed, c, init)
        out = []
        for t in range(sweeps):
            extra = sampler.sweep(st)
            if t >= burnin:
                out.append(np.atleast_1d(measure(st.spins, extra)))
        return np.array(out, dtype=np.float64)

    if threads == 1 or chains == 1:
        return [one(c) for c in range(chains)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(one, range(chains)))


def _bond_values(lat, spins):
    return spins[lat.eu].astype(np.float64) * spins[lat.ev]


def run_estimate(observable: str, lat: Lattice, coup: Couplings, bc: BoundaryCondition = FREE,
                 chains: int = 4, sweeps: int = 2000, burnin: int = 200, seed: int = 0, *,
                 algorithm: str = "sw", threads: int | None = None, init: str = "plus",
                 origin: int = 0, vertices=None, edge_pairs=None) -> list[Estimate]:
    """Monte Carlo estimate of an observable with binned error bars.

    Observables
    -----------
    m, abs_m
        Magnetisation per vertex and its absolute value.
    energy
        ``H / |E|``.
    specific_heat
        ``beta^2 Var(H) / V``.
    susceptibility
        ``Var(M) / V``.
    two_point
        ``<sigma_origin sigma_x>`` for ``x`` in ``vertices`` (default all).
    energy_energy
        ``<b_e b_f> - <b_e><b_f>`` with ``b_e = sigma_u sigma_v``, for
        ``(e, f)`` in ``edge_pairs``.

    Returns
    -------
    list of Estimate
    """
    if observable not in OBSERVABLES:
        raise ValueError(f"unknown observable {observable!r}")
    n_samp = (sweeps - burnin) * chains
    if sweeps <= burnin:
        raise ValueError("sweeps must exceed burnin")
    if n_samp < MIN_BINS:
        raise ValueError(f"{n_samp} samples cannot fill {MIN_BINS} bins")
    sampler = Sampler(lat, coup, bc, algorithm)
    V, E = lat.n_vertices, lat.n_edges
    J, f = sampler.J, sampler.field

    def energy(s):
        return -(_bond_values(lat, s) @ J) - s @ f

    if observable in ("m", "abs_m", "energy"):
        def meas(s, _):
            if observable == "m":
                return s.sum() / V
            if observable == "abs_m":
                return abs(int(s.sum())) / V
            return energy(s) / E
    elif observable == "specific_heat":
        def meas(s, _):
            e = energy(s)
            return (e, e * e)
    elif observable == "susceptibility":
        def meas(s, _):
            m = float(s.sum())
            return (m, m * m)
    elif observable == "two_point":
        vs = np.arange(V) if vertices is None else np.asarray(vertices, dtype=np.int64)

        def meas(s, _):
            return s[origin] * s[vs].astype(np.float64)
    else:
        if not edge_pairs:
            raise ValueError("energy_energy needs edge_pairs")
        pairs = np.asarray(edge_pairs, dtype=np.int64).reshape(-1, 2)
        used = np.unique(pairs)

        def meas(s, _):
            b = _bond_values(lat, s)
            return np.concatenate([b[used], b[pairs[:, 0]] * b[pairs[:, 1]]])

    data = run_chains(sampler, chains, sweeps, burnin, seed, meas, threads, init)
    bsize = choose_bin_size(data)
    bins = pooled_bins(data, bsize)
    info = {"algorithm": algorithm, "bin_size": bsize, "n_bins": len(bins), "seed": seed,
            "chains": chains, "sweeps": sweeps, "burnin": burnin}
    allx = np.concatenate(data)

    if observable in ("m", "abs_m", "energy"):
        err = bins[:, 0].std(ddof=1) / math.sqrt(len(bins))
        return [Estimate(observable, float(allx[:, 0].mean()), float(err), n_samp, info)]
    if observable == "specific_heat":
        val, err = jackknife(bins, lambda m: coup.beta ** 2 * (m[1] - m[0] ** 2) / V)
        return [Estimate(observable, float(val), float(err), n_samp, info)]
    if observable == "susceptibility":
        val, err = jackknife(bins, lambda m: (m[1] - m[0] ** 2) / V)
        return [Estimate(observable, float(val), float(err), n_samp, info)]
    if observable == "two_point":
        mean = allx.mean(axis=0)
        err = bins.std(axis=0, ddof=1) / math.sqrt(len(bins))
        return [Estimate(f"two_point[{origin},{int(x)}]", float(v), float(e), n_samp, info)
                for x, v, e in zip(vs, mean, err)]
    k = len(used)
    pos = {int(e): i for i, e in enumerate(used)}
    ia = np.array([pos[int(a)] for a in pairs[:, 0]])
    ib = np.array([pos[int(b)] for b in pairs[:, 1]])

    def conn(m):
        return m[k:] - m[ia] * m[ib]

    val, err = jackknife(bins, conn)
    return [Estimate(f"energy_energy[{a},{b}]", float(v), float(e), n_samp, info)
            for (a, b), v, e in zip(pairs.tolist(), np.atleast_1d(val), np.atleast_1d(err))]


# ---------------------------------------------------------------------------
# explicit transition matrices for tiny graphs


def glauber_flip_probability(spins, x, lat, coup, bc=FREE):
    """Probability that an update at ``x`` flips it."""
    J = coup.couplings(lat)
    f = effective_field(lat, coup, bc)
    ip, nb, eid = lat.adjacency
    loc = f[x] + sum(J[eid[k]] * spins[nb[k]] for k in range(ip[x], ip[x + 1]))
    return min(1.0, math.exp(-2.0 * coup.beta * spins[x] * loc))


def _states(V):
    s = np.arange(1 << V, dtype=np.int64)
    return (1 - 2 * ((s[:, None] >> np.arange(V)) & 1)).astype(np.int8)


def glauber_transition_matrix(lat: Lattice, coup: Couplings, bc=FREE) -> np.ndarray:
    """One random-site update as a ``2^V x 2^V`` stochastic matrix."""
    V = lat.n_vertices
    if V > 10:
        raise ValueError("explicit transition matrix limited to 10 vertices")
    P = np.zeros((1 << V, 1 << V))
    for i, s in enumerate(_states(V)):
        for x in range(V):
            p = glauber_flip_probability(s, x, lat, coup, bc)
            P[i, i ^ (1 << x)] += p / V
            P[i, i] += (1 - p) / V
    return P


def sw_transition_matrix(lat: Lattice, coup: Couplings) -> np.ndarray:
    """One Swendsen-Wang update as a ``2^V x 2^V`` stochastic matrix."""
    V, E = lat.n_vertices, lat.n_edges
    if V > 6 or E > 10:
        raise ValueError("explicit SW matrix limited to 6 vertices and 10 edges")
    if np.any(coup.field(lat) != 0):
        raise ValueError("Swendsen-Wang needs zero field")
    p = -np.expm1(-2.0 * coup.beta * coup.couplings(lat))
    roots = kernels.subset_cluster_roots(V, lat.eu, lat.ev).astype(np.int64)
    S = _states(V)
    omega = ((np.arange(1 << E)[:, None] >> np.arange(E)) & 1).astype(bool)
    # sigma is constant on the clusters of omega iff every vertex matches its root
    const = (S[:, None, :] == S[:, roots]).all(axis=2)
    sat = S[:, lat.eu] == S[:, lat.ev]
    factor = np.where(omega[None], p, np.where(sat[:, None, :], 1 - p, 1.0))
    A = const * factor.prod(axis=2)
    k = np.array([len(np.unique(r)) for r in roots])
    B = const.T * (0.5 ** k)[:, None]
    return A @ B


# ---------------------------------------------------------------------------
# smeared block spins and correlation length


def _torus(L, d):
    return build_lattice(d, (L,) * d, "torus")


def smeared_weights(f, L: int, d: int = 2) -> np.ndarray:
    """``f(x / L)`` at every vertex of the ``L^d`` torus."""
    lat = _torus(L, d)
    w = np.asarray(f(lat.coords / L), dtype=np.float64)
    if w.shape != (lat.n_vertices,):
        raise ValueError("test function must return one value per vertex")
    return w


def _gaussianity(y, z):
    var = (y * y).mean()
    if not var > 0:
        raise ValueError("block variance is not positive; sample more")
    t = y / math.sqrt(var)
    return abs(np.exp(z * t - 0.5 * z * z).mean() - 1.0)


def gaussianity_diagnostic(f, L: int, beta: float, z: float = 1.0, d: int = 2,
                           chains: int = 4, sweeps: int = 2000, burnin: int = 200,
                           seed: int = 0, threads=None) -> Estimate:
    """``|<exp(z T - z^2/2)> - 1|`` for the normalised smeared average ``T``.

    ``T = sum_x f(x/L) sigma_x / sqrt(Sigma)`` with ``Sigma`` the estimated
    second moment of the smeared sum, so ``<T^2> = 1``. The error bar is a
    jackknife over bins in which ``Sigma`` is re-estimated.
    """
    if beta > BETA_C and d == 2:
        raise ValueError("Gaussian fluctuations are expected for beta <= beta_c")
    w = smeared_weights(f, L, d)
    if z == 0:
        return Estimate("gaussianity", 0.0, 0.0, 0, {"L": L, "beta": beta, "z": z})
    lat = _torus(L, d)
    sampler = Sampler(lat, Couplings(beta), FREE, "sw")
    data = run_chains(sampler, chains, sweeps, burnin, seed, lambda s, _: s @ w, threads,
                      init="random")
    bsize = choose_bin_size(data)
    nb = [len(c) // bsize for c in data]
    y = np.concatenate([c[: n * bsize, 0] for c, n in zip(data, nb)])
    n = len(y) // bsize
    val = _gaussianity(y, z)
    blocks = y.reshape(n, bsize)
    leave = np.array([_gaussianity(np.delete(blocks, i, axis=0).ravel(), z) for i in range(n)])
    err = math.sqrt((n - 1) / n * ((leave - leave.mean()) ** 2).sum())
    return Estimate("gaussianity", float(val), float(err), len(y),
                    {"L": L, "beta": beta, "z": z, "bin_size": bsize})


def gaussianity_independent(f, L: int, z: float = 1.0, d: int = 2) -> float:
    """The diagnostic at ``beta = 0`` in closed form.

    Independent spins give ``<exp(z T)> = prod_x cosh(z f_x / sqrt(Sigma))``
    with ``Sigma = sum_x f_x^2``.
    """
    w = smeared_weights(f, L, d)
    s = math.sqrt((w * w).sum())
    if s == 0:
        raise ValueError("test function vanishes on the lattice")
    a = np.abs(z * w / s)
    log_cosh = a + np.log1p(np.exp(-2 * a)) - math.log(2.0)
    return abs(math.expm1(log_cosh.sum() - 0.5 * z * z))


@dataclass
class DecayFit:
    """Log-linear fit ``ln C(r) = c - tau r``."""

    tau: float
    tau_err: float
    r2: float
    distances: np.ndarray
    values: np.ndarray
    errors: np.ndarray


def fit_exponential_decay(r, c, err) -> DecayFit:
    """Weighted least squares of ``ln c`` against ``r``.

    Points whose correlation is not 3 standard errors above zero are
    dropped from the first such point on.
    """
    r, c, err = (np.asarray(a, dtype=np.float64) for a in (r, c, err))
    ok = c > 3 * err
    stop = len(ok) if ok.all() else int(np.argmin(ok))
    r, c, err = r[:stop], c[:stop], err[:stop]
    if len(r) < 3:
        raise ValueError("fewer than 3 correlations above noise")
    y = np.log(c)
    sig = np.maximum(err / c, 1e-12)
    w = 1.0 / sig ** 2
    X = np.column_stack([np.ones_like(r), r])
    cov = np.linalg.inv(X.T @ (X * w[:, None]))
    coef = cov @ (X.T @ (w * y))
    resid = y - X @ coef
    ybar = (w * y).sum() / w.sum()
    r2 = 1.0 - (w * resid ** 2).sum() / (w * (y - ybar) ** 2).sum()
    return DecayFit(float(-coef[1]), float(math.sqrt(cov[1, 1])), float(r2), r, c, err)


def torus_correlator(L: int, beta: float, d: int = 2, direction: int = 0, r_max=None,
                     chains: int = 4, sweeps: int = 2000, burnin: int = 200, seed: int = 0,
                     threads=None):
    """Translation-averaged ``<sigma_0 sigma_{r e}>`` on the ``L^d`` torus.

    Returns
    -------
    r, mean, stderr : ndarray
    """
    if not 0 <= direction < d:
        raise ValueError("direction must be an axis index")
    r_max = L // 4 if r_max is None else int(r_max)
    if not 1 <= r_max <= L // 2:
        raise ValueError("r_max must lie in [1, L/2]")
    lat = _torus(L, d)
    sampler = Sampler(lat, Couplings(beta), FREE, "sw")
    rs = np.arange(r_max + 1)
    shape = (L,) * d

    def meas(s, _):
        g = s.reshape(shape).astype(np.float64)
        return np.array([(g * np.roll(g, -r, axis=direction)).mean() for r in rs])

    data = run_chains(sampler, chains, sweeps, burnin, seed, meas, threads, init="random")
    bins = pooled_bins(data, choose_bin_size(data))
    allx = np.concatenate(data)
    return rs, allx.mean(axis=0), bins.std(axis=0, ddof=1) / math.sqrt(len(bins))


def correlation_length_fit(beta: float, L: int, direction: int = 0, d: int = 2,
                           chains: int = 4, sweeps: int = 2000, burnin: int = 200,
                           seed: int = 0, threads=None) -> DecayFit:
    """Decay rate of the torus two-point function along one axis.

    Separations run from 1 to ``L/4``; the fit stops where the signal
    sinks into the noise.
    """
    if d == 2 and beta >= BETA_C:
        raise ValueError("exponential decay is expected only for beta < beta_c")
    r, c, e = torus_correlator(L, beta, d, direction, None, chains, sweeps, burnin, seed,
                               threads)
    return fit_exponential_decay(r[1:], c[1:], e[1:])

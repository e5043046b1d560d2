"""Random currents: truncated sums, trace sampling, switching and Ursell checks.

A current assigns ``n_e >= 0`` to every edge and has weight
``prod_e (beta J_e)^n_e / n_e!``. Sums over currents with a prescribed
source set factorise over edges once the parity of every ``n_e`` is fixed,
so the sums here run over parity patterns (even subgraphs with sources)
instead of over all ``(n_max + 1)^E`` currents. Truncation at ``n_e <=
n_max`` is reported with a certified bound on the omitted mass.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .enumeration import Ensemble
from .fk import even_clusters
from .lattice import Couplings, Lattice, even_subgraph_masks

EDGE_STATES = ("zero", "odd", "even")


def _edge_betas(lat, beta, J=None):
    J = np.ones(lat.n_edges) if J is None else np.broadcast_to(np.asarray(J, float), (lat.n_edges,))
    if np.any(J < 0) or beta < 0:
        raise ValueError("currents need beta >= 0 and J >= 0")
    return beta * np.asarray(J, dtype=np.float64)


def _series(b, n_max):
    """Truncated ``b^a / a!`` for a = 0..n_max."""
    a = np.arange(n_max + 1)
    return np.exp(a * np.log(b) - np.array([math.lgamma(k + 1) for k in a])) if b > 0 else (
        (a == 0).astype(float))


def _tail(b, n_max):
    """Bound on ``sum_{a > n_max} b^a / a!``."""
    return math.exp((n_max + 1) * math.log(b) - math.lgamma(n_max + 2) + b) if b > 0 else 0.0


def parity_tables(betas, n_max):
    """Truncated even and odd series per edge, shape (E, 2)."""
    out = np.zeros((len(betas), 2))
    for e, b in enumerate(betas):
        s = _series(b, n_max)
        out[e, 0] = s[0::2].sum()
        out[e, 1] = s[1::2].sum()
    return out


def truncation_bound(betas, n_max, copies=1):
    """Mass of ``copies``-tuples of currents with some entry above ``n_max``."""
    S = np.array([_series(b, n_max).sum() for b in betas])
    t = np.array([_tail(b, n_max) for b in betas])
    return float(np.prod((S + t) ** copies) - np.prod(S ** copies))


def _parities(lat, A):
    rows = even_subgraph_masks(lat, A)
    return rows.astype(np.int64)


def current_sum(lat: Lattice, beta: float, A=(), n_max: int = 12, J=None):
    """Sum of current weights with source set ``A`` and every ``n_e <= n_max``.

    Returns
    -------
    value : float
    tail_bound : float
        Upper bound on the weight of the omitted currents.

    Examples
    --------
    >>> from isinglab.lattice import build_lattice
    >>> v, t = current_sum(build_lattice(1, 2), 0.5, [], 20)
    >>> abs(v - math.cosh(0.5)) < 1e-15
    True
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    betas = _edge_betas(lat, beta, J)
    bound = truncation_bound(betas, n_max)
    P = _parities(lat, A)
    if len(P) == 0:
        return 0.0, bound
    tab = parity_tables(betas, n_max)
    vals = tab[np.arange(lat.n_edges), P].prod(axis=1)
    return float(vals.sum()), bound


def current_correlation(lat: Lattice, beta: float, A, n_max: int = 12, J=None):
    """``<sigma_A>`` as a ratio of current sums, with an error bound."""
    za, d = current_sum(lat, beta, A, n_max, J)
    z0, _ = current_sum(lat, beta, (), n_max, J)
    r = za / z0
    return r, (d + r * d) / z0


def literal_current_sum(lat: Lattice, beta: float, A=(), n_max: int = 4, J=None) -> float:
    """Brute-force sum over all ``(n_max+1)^E`` currents (small graphs only)."""
    E = lat.n_edges
    if (n_max + 1) ** E > 2_000_000:
        raise ValueError("literal enumeration too large")
    betas = _edge_betas(lat, beta, J)
    target = np.zeros(lat.n_vertices, dtype=np.int64)
    target[list(A)] ^= 1
    tables = [_series(b, n_max) for b in betas]
    total = 0.0
    for n in itertools.product(range(n_max + 1), repeat=E):
        deg = np.zeros(lat.n_vertices, dtype=np.int64)
        np.add.at(deg, lat.eu, n)
        np.add.at(deg, lat.ev, n)
        if np.array_equal(deg % 2, target):
            total += math.prod(tables[e][k] for e, k in enumerate(n))
    return total


# ---------------------------------------------------------------------------
# trace sampling


@dataclass
class TracedCurrent:
    """Per-edge trace of a current: 0 zero, 1 odd, 2 even and positive."""

    lat: Lattice
    state: np.ndarray

    @property
    def odd(self):
        return self.state == 1

    @property
    def support(self):
        return self.state > 0

    def sources(self):
        deg = np.zeros(self.lat.n_vertices, dtype=np.int64)
        odd = self.odd.astype(np.int64)
        np.add.at(deg, self.lat.eu, odd)
        np.add.at(deg, self.lat.ev, odd)
        return np.nonzero(deg % 2)[0]


def trace_law(lat: Lattice, beta: float, A=(), J=None):
    """Exact probabilities of every trace pattern, as a dict keyed by state tuple."""
    betas = _edge_betas(lat, beta, J)
    P = _parities(lat, A)
    if len(P) == 0:
        raise ValueError("no current has these sources")
    ch, sh = np.cosh(betas), np.sinh(betas)
    out = {}
    for row in P:
        for ev in itertools.product((0, 1), repeat=lat.n_edges):
            ev = np.array(ev)
            if np.any(ev & row):
                continue
            w = np.prod(np.where(row == 1, sh, np.where(ev == 1, ch - 1, 1.0)))
            key = tuple(np.where(row == 1, 1, np.where(ev == 1, 2, 0)))
            out[key] = out.get(key, 0.0) + w
    z = sum(out.values())
    return {k: v / z for k, v in out.items()}


def sample_current_trace(lat: Lattice, beta: float, A=(), seed=None, size: int = 1, J=None):
    """Exact samples of the trace of a random current with sources ``A``.

    The odd set follows the high-temperature law (weight ``prod sinh`` on odd
    edges, ``cosh`` elsewhere); every other edge is independently even and
    positive with probability ``(cosh - 1) / cosh``.
    """
    betas = _edge_betas(lat, beta, J)
    P = _parities(lat, A)
    if len(P) == 0:
        raise ValueError("no current has these sources")
    rng = np.random.default_rng(seed)
    ch, sh = np.cosh(betas), np.sinh(betas)
    logw = np.where(P == 1, np.log(np.where(sh > 0, sh, 1.0)), np.log(ch)).sum(axis=1)
    logw[np.any((P == 1) & (sh == 0), axis=1)] = -np.inf
    w = np.exp(logw - logw.max())
    idx = rng.choice(len(P), size=size, p=w / w.sum())
    sprinkle = rng.random((size, lat.n_edges)) < (ch - 1) / ch
    states = np.where(P[idx] == 1, 1, np.where(sprinkle, 2, 0)).astype(np.int8)
    out = [TracedCurrent(lat, s) for s in states]
    return out[0] if size == 1 else out


# ---------------------------------------------------------------------------
# double sums


def _pair_tables(b, n_max, edge_fn):
    """``T[in_support, pi1, pi2]`` for one edge."""
    s = _series(b, n_max)
    a = np.arange(n_max + 1)
    tot = a[:, None] + a[None, :]
    f = np.vectorize(edge_fn, otypes=[float])(tot) if edge_fn is not None else np.ones_like(tot, float)
    w = s[:, None] * s[None, :] * f
    T = np.zeros((2, 2, 2))
    for p1 in (0, 1):
        for p2 in (0, 1):
            m = ((a[:, None] % 2) == p1) & ((a[None, :] % 2) == p2)
            T[1, p1, p2] = w[m & (tot > 0)].sum()
    T[0, 0, 0] = w[0, 0]
    return T


def double_current_sum(lat: Lattice, beta: float, A=(), B=(), n_max: int = 10, J=None,
                       support_event=None, edge_terms=((1.0, None),)) -> float:
    """Truncated ``sum_{dn1=A, dn2=B} w(n1) w(n2) F(n1 + n2)``.

    ``F(m) = g(supp m) * sum_t c_t prod_e f_t(m_e)`` where ``support_event``
    is ``g`` evaluated on rows of cluster labels (or None for 1) and
    ``edge_terms`` lists ``(c_t, f_t)`` with ``f_t=None`` meaning 1.
    """
    E = lat.n_edges
    if E > 16:
        raise ValueError("double current sums limited to 16 edges")
    betas = _edge_betas(lat, beta, J)
    PA, PB = _parities(lat, A), _parities(lat, B)
    if len(PA) == 0 or len(PB) == 0:
        return 0.0
    supp = ((np.arange(1 << E)[:, None] >> np.arange(E)) & 1).astype(np.int64)
    if support_event is None:
        g = np.ones(1 << E)
    else:
        roots = kernels.subset_cluster_roots(lat.n_vertices, lat.eu, lat.ev)
        g = np.asarray(support_event(roots), dtype=np.float64)
    keep = np.nonzero(g)[0]
    total = 0.0
    eidx = np.arange(E)
    for c, fn in edge_terms:
        T = np.array([_pair_tables(b, n_max, fn) for b in betas])  # (E, in_support, pi1, pi2)
        for lo in range(0, len(keep), 256):
            ss = keep[lo:lo + 256]
            fac = T[eidx, supp[ss][:, None, None, :], PA[None, :, None, :], PB[None, None, :, :]]
            total += c * float(g[ss] @ fac.prod(axis=3).sum(axis=(1, 2)))
    return float(total)


def parity_of_total(m):
    """Edge factor ``(-1)^m`` used to build the even-total-current indicator."""
    return -1.0 if m % 2 else 1.0


FUNCTIONALS = {
    "one": ((1.0, None),),
    # 1[sum_e m_e even] = (1 + prod_e (-1)^m_e) / 2
    "even-total": ((0.5, None), (0.5, parity_of_total)),
}


@dataclass(frozen=True)
class IdentityCheck:
    lhs: float
    rhs: float
    residual: float
    bound: float

    @property
    def ok(self):
        return self.residual <= self.bound


def switching_check(lat: Lattice, beta: float, A=(), B=(), F: str = "one", n_max: int = 10,
                    J=None) -> IdentityCheck:
    """Both sides of the switching identity for a factorised functional ``F``.

    Left: sources ``(A, B)``. Right: sources ``(A ^ B, {})`` restricted to
    the event that every cluster of ``supp(n1 + n2)`` meets ``B`` evenly.
    """
    terms = FUNCTIONALS[F] if isinstance(F, str) else F
    AB = sorted(set(A) ^ set(B))
    lhs = double_current_sum(lat, beta, A, B, n_max, J, None, terms)
    rhs = double_current_sum(lat, beta, AB, (), n_max, J, lambda r: even_clusters(r, B), terms)
    bound = 2 * truncation_bound(_edge_betas(lat, beta, J), n_max, copies=2)
    bound *= sum(abs(c) for c, _ in terms)
    return IdentityCheck(lhs, rhs, abs(lhs - rhs), bound + 1e-15 * max(abs(lhs), 1.0))


def literal_double_sum(lat, beta, A, B, n_max, F=lambda m: 1.0, event=None) -> float:
    """Brute-force double current sum for tiny graphs (test oracle)."""
    E = lat.n_edges
    if (n_max + 1) ** (2 * E) > 2_000_000:
        raise ValueError("literal enumeration too large")
    betas = _edge_betas(lat, beta)
    tabs = [_series(b, n_max) for b in betas]

    def src(n):
        deg = np.zeros(lat.n_vertices, dtype=np.int64)
        np.add.at(deg, lat.eu, n)
        np.add.at(deg, lat.ev, n)
        return set(np.nonzero(deg % 2)[0].tolist())

    curr = list(itertools.product(range(n_max + 1), repeat=E))
    by_src = {}
    for n in curr:
        by_src.setdefault(frozenset(src(n)), []).append(n)
    total = 0.0
    for n1 in by_src.get(frozenset(A), []):
        for n2 in by_src.get(frozenset(B), []):
            m = np.add(n1, n2)
            if event is not None and not event(m):
                continue
            w = math.prod(tabs[e][n1[e]] * tabs[e][n2[e]] for e in range(E))
            total += w * F(m)
    return total


def squared_correlation_check(lat: Lattice, beta: float, A, n_max: int = 10) -> IdentityCheck:
    """``<sigma_A>^2`` against the double-current probability of the even event."""
    exact = Ensemble(lat, Couplings(beta)).expect_sigma(A) ** 2
    num = double_current_sum(lat, beta, (), (), n_max, None, lambda r: even_clusters(r, A))
    den = double_current_sum(lat, beta, (), (), n_max)
    d = truncation_bound(_edge_betas(lat, beta), n_max, copies=2)
    r = num / den
    return IdentityCheck(exact, r, abs(exact - r), (d + r * d) / den + 1e-14)


# ---------------------------------------------------------------------------
# Ursell function


def _all_connected(xs):
    xs = list(xs)

    def event(roots):
        r = roots[:, xs]
        return np.all(r == r[:, :1], axis=1)

    return event


def ursell4(lat: Lattice, beta: float, xs, n_max: int = 10, J=None):
    """Fourth Ursell function and its random-current identity.

    Returns
    -------
    u4 : float
        ``<1234> - <12><34> - <13><24> - <14><23>`` by enumeration.
    check : IdentityCheck or None
        ``u4`` against ``-2 <12><34> P^{12,34}[all four connected]``; None
        when the graph is too large for the double sum.
    """
    xs = [int(x) for x in xs]
    if len(xs) != 4 or len(set(xs)) != 4:
        raise ValueError("need four distinct vertices")
    ens = Ensemble(lat, Couplings(beta, 0.0, J))
    c = ens.expect_sigma
    a, b, cc, d = xs
    u4 = c(xs) - c([a, b]) * c([cc, d]) - c([a, cc]) * c([b, d]) - c([a, d]) * c([b, cc])
    if lat.n_edges > 8:
        return u4, None
    num = double_current_sum(lat, beta, [a, b], [cc, d], n_max, J, _all_connected(xs))
    z12, d1 = current_sum(lat, beta, [a, b], n_max, J)
    z34, _ = current_sum(lat, beta, [cc, d], n_max, J)
    d2 = truncation_bound(_edge_betas(lat, beta, J), n_max, copies=2)
    if z12 == 0 or z34 == 0:
        return u4, IdentityCheck(u4, 0.0, abs(u4), 1e-14)
    prob = num / (z12 * z34)
    pref = -2 * c([a, b]) * c([cc, d])
    rhs = pref * prob
    dprob = d2 / (z12 * z34) + prob * ((z12 + d1) * (z34 + d1) - z12 * z34) / (z12 * z34)
    return u4, IdentityCheck(u4, rhs, abs(u4 - rhs), abs(pref) * dprob + 1e-14)


# ---------------------------------------------------------------------------
# differential inequalities


@dataclass(frozen=True)
class InequalityReport:
    lower: float
    middle: float
    upper: float
    violation: float
    fd_error: float


def _central(fun, x, h):
    return (fun(x + h) - fun(x - h)) / (2 * h)


def _derivative(fun, x, h, lower=None):
    """Central difference (one-sided near ``lower``) and an error estimate."""
    if lower is not None and x - 2 * h < lower:
        def fwd(k):
            return (-3 * fun(x) + 4 * fun(x + k) - fun(x + 2 * k)) / (2 * k)
        d1, d2 = fwd(h), fwd(2 * h)
    else:
        d1, d2 = _central(fun, x, h), _central(fun, x, 2 * h)
    return d1, abs(d1 - d2) + 1e-12 * (1 + abs(d1))


def diffineq_check(kind: str, lat: Lattice, beta: float, h: float = 0.0, step: float = 1e-4,
                   origin: int = 0) -> InequalityReport:
    """Susceptibility/bubble or magnetisation differential inequality.

    ``chi-bubble``: ``(1 - B/chi) 2d chi^2 / (1 + B) <= d chi / d beta <= 2d chi^2``
    at zero field with ``chi = sum_x <s_0 s_x>`` and ``B = sum_x <s_0 s_x>^2``.
    ``magnetization``: ``m <= tanh(H) dm/dH + m^2 (beta dm/dbeta + m)`` with
    ``H = beta h`` held fixed in the beta derivative. Both use exact
    enumeration and central differences.
    """
    if step <= 1e-8:
        raise ValueError("finite-difference step too small")
    if kind == "chi-bubble":
        if lat.topology != "torus":
            raise ValueError("chi-bubble check runs on a torus")
        dim = lat.dim

        def corr(b):
            return Ensemble(lat, Couplings(b)).two_point_matrix()[origin]

        def chi(b):
            return corr(b).sum()

        g = corr(beta)
        X, Bub = g.sum(), (g ** 2).sum()
        dchi, err = _derivative(chi, beta, step, lower=0.0)
        lower = (1 - Bub / X) * 2 * dim * X ** 2 / (1 + Bub)
        upper = 2 * dim * X ** 2
        viol = max(0.0, lower - dchi, dchi - upper)
        return InequalityReport(lower, dchi, upper, viol, err)
    if kind == "magnetization":
        if h < 0:
            raise ValueError("magnetisation inequality needs h >= 0")
        H = beta * h

        if beta <= 0:
            raise ValueError("magnetisation inequality needs beta > 0")

        def m(b, HH):
            return Ensemble(lat, Couplings(b, HH / b)).magnetisations()[origin]

        m0 = m(beta, H)
        dH, e1 = _derivative(lambda x: m(beta, x), H, step)
        dB, e2 = _derivative(lambda x: m(x, H), beta, step, lower=0.0)
        rhs = math.tanh(H) * dH + m0 ** 2 * (beta * dB + m0)
        err = math.tanh(H) * e1 + m0 ** 2 * beta * e2
        return InequalityReport(m0, m0, rhs, max(0.0, m0 - rhs), err + 1e-12)
    raise ValueError(f"unknown kind {kind!r}")

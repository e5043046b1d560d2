"""Exact partition functions and closed-form planar results."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp, roots_legendre

from .enumeration import Ensemble, log_weights
from .lattice import (FREE, BoundaryCondition, Couplings, Lattice, dual_lattice,
                      effective_field, even_subgraph_size_counts)
from .transfer import log_partition_transfer

BETA_C = 0.5 * math.log(1.0 + math.sqrt(2.0))
METHODS = ("enumerate", "transfer", "low-temp", "high-temp")


@dataclass(frozen=True)
class LogPartition:
    value: float
    method: str


def _uniform_free(lat, coup, bc, what):
    if bc.kind != "free":
        raise ValueError(f"{what} expansion needs free boundary conditions")
    if np.any(coup.field(lat) != 0):
        raise ValueError(f"{what} expansion needs zero field")
    J = coup.uniform_J(lat)
    if J is None:
        raise ValueError(f"{what} expansion needs uniform couplings")
    return J


def log_partition_low_temp(lat: Lattice, coup: Couplings, bc: BoundaryCondition = FREE) -> float:
    """ln Z from contours: ``Z = 2 e^{beta J |E|} sum_F e^{-2 beta J |F|}``.

    ``F`` runs over even subgraphs of the dual graph, which are the domain
    walls; the factor 2 accounts for the global spin flip.
    """
    if lat.topology != "box" or lat.dim != 2 or lat.ghost is not None:
        raise ValueError("low-temperature expansion needs a plain 2D box")
    J = _uniform_free(lat, coup, bc, "low-temperature")
    if min(lat.sides) < 2:
        raise ValueError("low-temperature expansion needs both sides >= 2")
    counts = even_subgraph_size_counts(dual_lattice(lat))
    k = np.nonzero(counts)[0]
    bJ = coup.beta * J
    return float(math.log(2.0) + bJ * lat.n_edges + logsumexp(np.log(counts[k]) - 2.0 * bJ * k))


def log_partition_high_temp(lat: Lattice, coup: Couplings, bc: BoundaryCondition = FREE) -> float:
    """ln Z from even subgraphs: ``2^V cosh(beta J)^E sum_G tanh(beta J)^|G|``."""
    J = _uniform_free(lat, coup, bc, "high-temperature")
    if J < 0:
        raise ValueError("high-temperature expansion needs J >= 0")
    counts = even_subgraph_size_counts(lat)
    bJ = coup.beta * J
    base = lat.n_vertices * math.log(2.0) + lat.n_edges * math.log(math.cosh(bJ))
    if bJ == 0:
        return float(base)
    k = np.nonzero(counts)[0]
    return float(base + logsumexp(np.log(counts[k]) + k * math.log(math.tanh(bJ))))


def log_partition(lat: Lattice, coup: Couplings, bc: BoundaryCondition = FREE,
                  method: str = "enumerate") -> LogPartition:
    """ln Z by one of ``enumerate``, ``transfer``, ``low-temp``, ``high-temp``.

    Examples
    --------
    >>> from isinglab.lattice import build_lattice
    >>> lat = build_lattice(2, 3)
    >>> a = log_partition(lat, Couplings(0.4)).value
    >>> b = log_partition(lat, Couplings(0.4), method="low-temp").value
    >>> abs(a - b) < 1e-12
    True
    """
    if method == "enumerate":
        return LogPartition(float(logsumexp(log_weights(lat, coup, bc))), method)
    if method == "transfer":
        return LogPartition(log_partition_transfer(lat, coup, bc), method)
    if method == "low-temp":
        return LogPartition(log_partition_low_temp(lat, coup, bc), method)
    if method == "high-temp":
        return LogPartition(log_partition_high_temp(lat, coup, bc), method)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def correlation_exact(lat: Lattice, coup: Couplings, bc: BoundaryCondition = FREE, A=()) -> float:
    """``<sigma_A>`` by enumeration."""
    if any(not 0 <= int(a) < lat.n_vertices for a in A):
        raise ValueError("vertex out of range")
    return Ensemble(lat, coup, bc).expect_sigma(list(A))


def spatial_markov_check(lat: Lattice, coup: Couplings, bc: BoundaryCondition, W, tau) -> float:
    """Total variation between a conditioned measure and the induced model.

    The measure on ``lat`` conditioned on ``sigma = tau`` outside ``W`` is
    compared with the model on the subgraph induced by ``W`` whose field
    absorbs the bonds to the frozen outside spins.

    Parameters
    ----------
    W : iterable of int
    tau : sequence of +-1
        Spins on the complement of ``W``, in increasing vertex order.
    """
    V = lat.n_vertices
    W = sorted(set(int(w) for w in W))
    out = [x for x in range(V) if x not in set(W)]
    tau = np.asarray(tau, dtype=np.int64)
    if len(tau) != len(out) or not np.all(np.abs(tau) == 1):
        raise ValueError("tau must give a +-1 value for every vertex outside W")
    # conditional of the full model
    lw = log_weights(lat, coup, bc)
    s = np.arange(1 << V, dtype=np.int64)
    ok = np.ones(1 << V, dtype=bool)
    for x, t in zip(out, tau):
        ok &= ((s >> x) & 1) == (1 if t < 0 else 0)
    sub_state = np.zeros(1 << V, dtype=np.int64)
    for i, w in enumerate(W):
        sub_state |= ((s >> w) & 1) << i
    lw_c = lw[ok]
    p_full = np.zeros(1 << len(W))
    p_full[sub_state[ok]] = np.exp(lw_c - logsumexp(lw_c))
    # induced model with outside spins folded into the field
    sub, keep = lat.induced(W)
    J = coup.couplings(lat)
    f = effective_field(lat, coup, bc)[W].copy()
    spin = np.zeros(V)
    spin[out] = tau
    pos = {w: i for i, w in enumerate(W)}
    for e, (u, v) in enumerate(lat.edges.tolist()):
        if u in pos and v not in pos:
            f[pos[u]] += J[e] * spin[v]
        elif v in pos and u not in pos:
            f[pos[v]] += J[e] * spin[u]
    p_sub = Ensemble(sub, Couplings(coup.beta, 0.0, J[keep]), logw=log_weights(
        sub, Couplings(coup.beta, 0.0, J[keep]), field=f)).prob
    return float(0.5 * np.abs(p_full - p_sub).sum())


# ---------------------------------------------------------------------------
# closed forms for the square lattice


def critical_beta() -> float:
    """``(1/2) ln(1 + sqrt 2)``."""
    return BETA_C


def kw_dual(beta: float) -> float:
    """Kramers-Wannier dual ``artanh(exp(-2 beta))``.

    >>> round(kw_dual(critical_beta()) - critical_beta(), 12)
    0.0
    """
    if beta <= 0:
        raise ValueError("beta must be > 0")
    return math.atanh(math.exp(-2.0 * beta))


def kw_fixed_point() -> float:
    """Root of ``kw_dual(beta) = beta`` found numerically."""
    return brentq(lambda b: kw_dual(b) - b, 0.1, 2.0, xtol=1e-15, rtol=1e-15)


def _log_cosh(x):
    x = abs(x)
    return x + math.log1p(math.exp(-2.0 * x)) - math.log(2.0)


def _panel_edges(width):
    """Panels on [0, pi] that shrink geometrically towards 0."""
    edges = [math.pi]
    lo = max(width / 8.0, 1e-300)
    while edges[-1] / 2 > lo and len(edges) < 80:
        edges.append(edges[-1] / 2)
    edges.append(0.0)
    return np.array(edges[::-1])


def _composite_nodes(edges, n):
    x, w = roots_legendre(n)
    a, b = edges[:-1, None], edges[1:, None]
    return ((b - a) / 2 * x + (a + b) / 2).ravel(), ((b - a) / 2 * w).ravel()


def onsager_quadrature(beta: float, n: int = 24):
    """``-beta f`` of the square lattice with a refinement error estimate.

    Two-dimensional Gauss-Legendre on [0, pi]^2 with panels refined
    dyadically towards the origin, where the integrand is nearly singular
    close to criticality. The error estimate is the change when every panel
    doubles its order.

    Returns
    -------
    value, error : float
    """
    beta = float(beta)
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if abs(beta - BETA_C) < 1e-6:
        raise ValueError("beta within 1e-6 of the critical point")
    if beta == 0:
        return math.log(2.0), 0.0
    s = math.sinh(2 * beta)
    c = math.cosh(2 * beta)
    width = abs(s - 1.0) / math.sqrt(s)
    edges = _panel_edges(width)
    log_c2 = 2 * _log_cosh(2 * beta)
    ratio = math.tanh(2 * beta) / c

    def integral(order):
        t, w = _composite_nodes(edges, order)
        cs = np.cos(t)
        inner = np.log1p(-ratio * (cs[:, None] + cs[None, :]))
        return float(w @ inner @ w)

    lo, hi = integral(n), integral(2 * n)
    val = math.log(2.0) + log_c2 / 2 + hi / (2 * math.pi ** 2)
    return val, abs(hi - lo) / (2 * math.pi ** 2)


def onsager_free_energy(beta: float) -> float:
    """``-beta f(beta)`` of the infinite square lattice at zero field."""
    return onsager_quadrature(beta)[0]


def onsager_specific_heat(beta: float, step: float | None = None) -> float:
    """``beta^2 d^2(-beta f)/d beta^2`` by central differences."""
    if step is None:
        step = min(1e-3, abs(beta - BETA_C) / 10)
    g = onsager_free_energy
    return beta ** 2 * (g(beta + step) - 2 * g(beta) + g(beta - step)) / step ** 2


def yang_magnetization(beta: float) -> float:
    """Spontaneous magnetisation ``(1 - sinh(2 beta)^-4)^(1/8)``, 0 below beta_c."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if beta <= BETA_C:
        return 0.0
    return (1.0 - math.sinh(2 * beta) ** -4) ** 0.125


def duality_check(beta: float) -> float:
    """Residual of the duality relation between ``beta`` and its dual.

    ``beta f(beta) = beta* f(beta*) - 2 beta + ln 2 + 2 ln cosh(beta*)``
    evaluated with the quadrature free energy.
    """
    bs = kw_dual(beta)
    lhs = -onsager_free_energy(beta)
    rhs = -onsager_free_energy(bs) - 2 * beta + math.log(2.0) + 2 * math.log(math.cosh(bs))
    return abs(lhs - rhs)


def peierls_bound(beta: float) -> float:
    """Lower bound ``1 - 8 e^{-2b} / (1 - 4 e^{-2b})^2`` on the plus-state correlation.

    Valid for ``beta > ln 2``.
    """
    if beta <= math.log(2.0):
        raise ValueError("the contour bound needs beta > ln 2")
    q = math.exp(-2.0 * beta)
    return 1.0 - 8.0 * q / (1.0 - 4.0 * q) ** 2

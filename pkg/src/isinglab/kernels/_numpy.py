"""Reference kernels in plain numpy/python, used when numba is disabled."""

import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

_CHUNK = 1 << 18


def log_weights(n, eu, ev, J, field, beta, start, count):
    out = np.empty(count, dtype=np.float64)
    for lo in range(0, count, _CHUNK):
        hi = min(count, lo + _CHUNK)
        s = np.arange(start + lo, start + hi, dtype=np.int64)
        acc = np.zeros(hi - lo)
        for e in range(len(eu)):
            par = ((s >> eu[e]) ^ (s >> ev[e])) & 1
            acc += J[e] * (1.0 - 2.0 * par)
        for i in range(n):
            acc += field[i] * (1.0 - 2.0 * ((s >> i) & 1))
        out[lo:hi] = beta * acc
    return out


def glauber_sweep(spins, indptr, nbr, wts, field, beta, sites, uniforms):
    flips = 0
    for t in range(len(sites)):
        x = int(sites[t])
        loc = float(field[x])
        for k in range(indptr[x], indptr[x + 1]):
            loc += wts[k] * spins[nbr[k]]
        if uniforms[t] < math.exp(-2.0 * beta * spins[x] * loc):
            spins[x] = -spins[x]
            flips += 1
    return flips


def sw_bonds(spins, eu, ev, prob, uniforms):
    return ((spins[eu] == spins[ev]) & (uniforms < prob)).astype(np.uint8)


def cluster_roots(n, eu, ev, bonds):
    on = bonds.astype(bool)
    g = coo_matrix((np.ones(int(on.sum())), (eu[on], ev[on])), shape=(n, n))
    _, lab = connected_components(g, directed=False)
    first = np.full(lab.max() + 1, n, dtype=np.int64)
    np.minimum.at(first, lab, np.arange(n))
    return first[lab]


def subset_cluster_roots(n, eu, ev):
    ne = len(eu)
    s = np.arange(1 << ne, dtype=np.int64)
    lab = np.tile(np.arange(n, dtype=np.int16), (1 << ne, 1))
    for e in range(ne):
        rows = np.nonzero((s >> e) & 1)[0]
        sub = lab[rows]
        a = sub[:, eu[e]]
        b = sub[:, ev[e]]
        lo = np.minimum(a, b)[:, None]
        hi = np.maximum(a, b)[:, None]
        lab[rows] = np.where(sub == hi, lo, sub)
    return lab


def even_subgraph_counts(basis, n_edges):
    masks = np.zeros(1, dtype=np.uint64)
    for b in basis:
        masks = np.concatenate([masks, masks ^ np.uint64(b)])
    return np.bincount(np.bitwise_count(masks), minlength=n_edges + 1).astype(np.int64)

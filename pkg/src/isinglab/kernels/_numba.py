"""Compiled kernels. Signatures mirror ``_numpy`` exactly."""

import math

import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True)


@njit(**_OPTS)
def log_weights(n, eu, ev, J, field, beta, start, count):
    out = np.empty(count, dtype=np.float64)
    ne = eu.shape[0]
    for k in range(count):
        s = start + k
        acc = 0.0
        for e in range(ne):
            par = ((s >> eu[e]) ^ (s >> ev[e])) & 1
            acc += J[e] * (1.0 - 2.0 * par)
        for i in range(n):
            acc += field[i] * (1.0 - 2.0 * ((s >> i) & 1))
        out[k] = beta * acc
    return out


@njit(**_OPTS)
def glauber_sweep(spins, indptr, nbr, wts, field, beta, sites, uniforms):
    flips = 0
    for t in range(sites.shape[0]):
        x = sites[t]
        loc = field[x]
        for k in range(indptr[x], indptr[x + 1]):
            loc += wts[k] * spins[nbr[k]]
        if uniforms[t] < math.exp(-2.0 * beta * spins[x] * loc):
            spins[x] = -spins[x]
            flips += 1
    return flips


@njit(**_OPTS)
def sw_bonds(spins, eu, ev, prob, uniforms):
    out = np.zeros(eu.shape[0], dtype=np.uint8)
    for e in range(eu.shape[0]):
        if spins[eu[e]] == spins[ev[e]] and uniforms[e] < prob[e]:
            out[e] = 1
    return out


@njit(**_OPTS)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(**_OPTS)
def cluster_roots(n, eu, ev, bonds):
    parent = np.arange(n)
    for e in range(eu.shape[0]):
        if bonds[e]:
            a = _find(parent, eu[e])
            b = _find(parent, ev[e])
            if a != b:
                if a < b:
                    parent[b] = a
                else:
                    parent[a] = b
    out = np.empty(n, dtype=np.int64)
    for x in range(n):
        out[x] = _find(parent, x)
    return out


@njit(**_OPTS)
def subset_cluster_roots(n, eu, ev):
    ne = eu.shape[0]
    m = 1 << ne
    out = np.empty((m, n), dtype=np.int16)
    parent = np.empty(n, dtype=np.int64)
    for s in range(m):
        for x in range(n):
            parent[x] = x
        for e in range(ne):
            if (s >> e) & 1:
                a = _find(parent, eu[e])
                b = _find(parent, ev[e])
                if a != b:
                    if a < b:
                        parent[b] = a
                    else:
                        parent[a] = b
        for x in range(n):
            out[s, x] = _find(parent, x)
    return out


@njit(**_OPTS)
def _popcount(x):
    c = 0
    while x:
        x &= x - np.uint64(1)
        c += 1
    return c


@njit(**_OPTS)
def even_subgraph_counts(basis, n_edges):
    counts = np.zeros(n_edges + 1, dtype=np.int64)
    k = basis.shape[0]
    mask = np.uint64(0)
    counts[0] += 1
    for i in range(1, 1 << k):
        j = 0
        while not (i >> j) & 1:
            j += 1
        mask ^= basis[j]
        counts[_popcount(mask)] += 1
    return counts

"""The compiled and fallback kernels must agree bit for bit."""

import numpy as np
import pytest

from isinglab.kernels import _numba, _numpy
from isinglab.lattice import Couplings, build_lattice, cycle_space


def _graph(rng):
    lat = build_lattice(2, (3, 4))
    return lat, rng.uniform(-1, 2, lat.n_edges), rng.normal(size=lat.n_vertices)


def test_log_weights_agree(rng):
    lat, J, f = _graph(rng)
    a = _numba.log_weights(lat.n_vertices, lat.eu, lat.ev, J, f, 0.7, 100, 3000)
    b = _numpy.log_weights(lat.n_vertices, lat.eu, lat.ev, J, f, 0.7, 100, 3000)
    assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_glauber_sweep_agrees(rng):
    lat, J, f = _graph(rng)
    J = np.abs(J)
    ip, nb, eid = lat.adjacency
    w = J[eid]
    s0 = rng.choice(np.array([-1, 1], dtype=np.int8), lat.n_vertices)
    for beta in (0.2, 0.9):
        sites = rng.integers(0, lat.n_vertices, 500)
        u = rng.random(500)
        s1, s2 = s0.copy(), s0.copy()
        n1 = _numba.glauber_sweep(s1, ip, nb, w, f, beta, sites, u)
        n2 = _numpy.glauber_sweep(s2, ip, nb, w, f, beta, sites, u)
        assert n1 == n2 and np.array_equal(s1, s2)


def test_cluster_kernels_agree(rng):
    lat = build_lattice(2, 8, "torus")
    s = rng.choice(np.array([-1, 1], dtype=np.int8), lat.n_vertices)
    prob = np.full(lat.n_edges, 0.6)
    u = rng.random(lat.n_edges)
    b1 = _numba.sw_bonds(s, lat.eu, lat.ev, prob, u)
    b2 = _numpy.sw_bonds(s, lat.eu, lat.ev, prob, u)
    assert np.array_equal(b1, b2)
    r1 = _numba.cluster_roots(lat.n_vertices, lat.eu, lat.ev, b1)
    r2 = _numpy.cluster_roots(lat.n_vertices, lat.eu, lat.ev, b1)
    assert np.array_equal(r1, r2)
    # canonical label is the smallest vertex of the cluster
    assert np.all(r1 <= np.arange(lat.n_vertices))
    assert np.all(r1[r1] == r1)


def test_subset_roots_agree():
    lat = build_lattice(2, (2, 3))
    a = _numba.subset_cluster_roots(lat.n_vertices, lat.eu, lat.ev)
    b = _numpy.subset_cluster_roots(lat.n_vertices, lat.eu, lat.ev)
    assert a.shape == (2 ** lat.n_edges, 6)
    assert np.array_equal(a, b)
    assert np.all(a[0] == np.arange(6)) and np.all(a[-1] == 0)


@pytest.mark.parametrize("lat", [build_lattice(2, 3), build_lattice(2, 3, "torus")])
def test_even_counts_agree(lat):
    basis = np.array(cycle_space(lat).basis, dtype=np.uint64)
    assert np.array_equal(_numba.even_subgraph_counts(basis, lat.n_edges),
                          _numpy.even_subgraph_counts(basis, lat.n_edges))

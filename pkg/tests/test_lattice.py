import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isinglab.lattice import (BoundaryCondition, Couplings, Lattice, SpinConfig, build_lattice,
                              cycle_space, dual_lattice, even_subgraph_masks,
                              even_subgraph_size_counts, even_subgraphs, format_edgelist,
                              ghost_augment, hamiltonian, parse_edgelist)

sides2 = st.tuples(st.integers(1, 5), st.integers(1, 5))


def test_row_major_indexing_and_edge_order():
    lat = build_lattice(2, (2, 3))
    assert lat.index((1, 2)) == 5
    assert lat.coord(4) == (1, 1)
    assert lat.edges[:2].tolist() == [[0, 3], [0, 1]]


@given(sides2)
def test_box_edge_count(s):
    lat = build_lattice(2, s)
    a, b = s
    assert lat.n_edges == (a - 1) * b + a * (b - 1)


@given(st.integers(1, 3), st.integers(3, 5))
def test_torus_has_d_times_v_edges(d, L):
    lat = build_lattice(d, L, "torus")
    assert lat.n_edges == d * lat.n_vertices
    assert np.all(lat.degree == 2 * d)


@pytest.mark.parametrize("args", [(0, 3, "box"), (2, 2, "torus"), (2, (3,), "box"), (2, 3, "hex")])
def test_invalid_lattices_rejected(args):
    with pytest.raises(ValueError):
        build_lattice(*args)


def test_ghost_augmentation_degrees():
    g = ghost_augment(build_lattice(2, 3))
    assert g.ghost == 9 and g.n_vertices == 10
    assert g.degree[9] == 8
    assert g.degree[4] == 4
    assert g.n_sites == 9


@given(st.tuples(st.integers(2, 5), st.integers(2, 5)))
def test_dual_is_planar_dual(s):
    lat = build_lattice(2, s)
    du = dual_lattice(lat)
    assert du.n_edges == lat.n_edges
    # Euler: V - E + F = 2 counting the exterior face
    assert lat.n_vertices - lat.n_edges + du.n_vertices == 2
    assert np.all(du.degree[:-1] == 4)
    assert du.degree[-1] == 2 * (s[0] - 1) + 2 * (s[1] - 1)


def test_boundary_fields():
    lat = build_lattice(2, 3)
    b = BoundaryCondition("plus").field(lat)
    assert b.reshape(3, 3).tolist() == [[2, 1, 2], [1, 0, 1], [2, 1, 2]]
    assert np.array_equal(BoundaryCondition("minus").field(lat), -b)
    dob = BoundaryCondition("dobrushin", axis=1, level=1).field(lat).reshape(3, 3)
    # column c_1 = 0 sees -1 below it, column c_1 = 2 sees +1 above
    assert dob[1].tolist() == [-1, 0, 1]
    with pytest.raises(ValueError):
        BoundaryCondition("plus").field(build_lattice(2, 3, "torus"))
    with pytest.raises(ValueError):
        BoundaryCondition("fixed", tau=(1, -1)).field(lat)


@settings(max_examples=30)
@given(st.integers(0, 2 ** 9 - 1), st.floats(-1, 1), st.integers(0, 1), st.integers(0, 3))
def test_dobrushin_joint_flip_leaves_energy_unchanged(idx, h, axis, level):
    lat = build_lattice(2, 3)
    s = SpinConfig.from_index(9, idx).to_array()
    bc = BoundaryCondition("dobrushin", axis=axis, level=level)
    tau = bc.exterior_values(lat)
    flipped = BoundaryCondition("fixed", tau=tuple(-tau.astype(int)))
    c = Couplings(0.3, 0.0)
    assert hamiltonian(s, lat, c, bc) == pytest.approx(hamiltonian(-s, lat, c, flipped), abs=1e-12)


@settings(max_examples=30)
@given(st.integers(0, 2 ** 9 - 1), st.lists(st.floats(-2, 2), min_size=12, max_size=12))
def test_hamiltonian_flip_symmetric_without_field(idx, J):
    lat = build_lattice(2, 3)
    s = SpinConfig.from_index(9, idx).to_array()
    c = Couplings(1.0, 0.0, J)
    assert hamiltonian(s, lat, c) == pytest.approx(hamiltonian(-s, lat, c), abs=1e-12)


def test_ground_state_energy():
    lat = build_lattice(2, 4, "torus")
    assert hamiltonian(np.ones(16), lat, Couplings(1.0)) == -32
    assert hamiltonian(np.ones(16), lat, Couplings(1.0, 0.5)) == -40


@given(st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=40))
def test_spinconfig_round_trip(vals):
    c = SpinConfig.from_array(vals)
    assert c.to_array().tolist() == vals
    assert SpinConfig.from_index(len(vals), c.index()) == c
    d = c.copy()
    d.flip(0)
    assert d[0] == -vals[0] and c[0] == vals[0]


@given(st.integers(1, 6), st.data())
def test_edgelist_round_trip(n, data):
    m = data.draw(st.integers(0, 8))
    edges = [(data.draw(st.integers(0, n - 1)), data.draw(st.integers(0, n - 1))) for _ in range(m)]
    J = data.draw(st.lists(st.floats(-3, 3, allow_nan=False), min_size=m, max_size=m))
    lat = Lattice(n, np.array(edges, dtype=np.int64).reshape(-1, 2))
    lat2, J2 = parse_edgelist(format_edgelist(lat, J))
    assert lat2.n_vertices == n
    assert np.array_equal(lat2.edges, lat.edges)
    assert J2.tolist() == list(J)


def test_edgelist_comments_and_errors():
    lat, J = parse_edgelist("# tri\nv a\nv b\nv c\ne a b 1.5\ne b c  # default J\n")
    assert lat.n_vertices == 3 and J.tolist() == [1.5, 1.0]
    with pytest.raises(ValueError):
        parse_edgelist("v a\ne a b 1\n")
    with pytest.raises(ValueError):
        parse_edgelist("x 1 2\n")


def _degrees(lat, edges):
    d = np.zeros(lat.n_vertices, dtype=int)
    for e in edges:
        d[lat.edges[e]] += 1
    return d


@pytest.mark.parametrize("lat", [build_lattice(2, 3), build_lattice(2, (2, 4)),
                                 build_lattice(2, 3, "torus"), dual_lattice(build_lattice(2, 3))])
def test_even_subgraphs_are_even_and_complete(lat):
    subs = list(even_subgraphs(lat))
    cs = cycle_space(lat)
    assert len(subs) == 2 ** (lat.n_edges - lat.n_vertices + 1) == 2 ** cs.dim
    assert len(set(subs)) == len(subs)
    for g in subs:
        assert np.all(_degrees(lat, g) % 2 == 0)
    counts = even_subgraph_size_counts(lat)
    assert counts.sum() == len(subs)
    assert counts.tolist() == np.bincount([len(g) for g in subs], minlength=lat.n_edges + 1).tolist()


def test_sourced_subgraphs():
    lat = build_lattice(2, 3)
    A = [0, 8]
    rows = even_subgraph_masks(lat, A)
    assert len(rows) == 2 ** 4
    for r in rows:
        odd = np.nonzero(_degrees(lat, np.nonzero(r)[0]) % 2)[0]
        assert odd.tolist() == A
    assert len(even_subgraph_masks(lat, [0])) == 0
    assert list(even_subgraphs(lat, [0, 1, 2])) == []


def test_torus_4x4_cycle_dimension_and_cap():
    lat = build_lattice(2, 4, "torus")
    assert cycle_space(lat).dim == 17
    assert even_subgraph_size_counts(lat)[:5].tolist() == [1, 0, 0, 0, 24]  # 16 plaquettes + 8 winding lines
    with pytest.raises(ValueError):
        next(even_subgraphs(build_lattice(2, 6, "torus")))

import json
import math
import os
import subprocess
import sys

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isinglab.enumeration import Ensemble
from isinglab.estimators import Accumulator, choose_bin_size, jackknife, mean_and_error
from isinglab.lattice import BoundaryCondition, Couplings, Lattice, build_lattice
from isinglab.mc import (Sampler, correlation_length_fit, fit_exponential_decay,
                         gaussianity_diagnostic, gaussianity_independent,
                         glauber_transition_matrix, run_chains, run_estimate,
                         smeared_weights, sw_transition_matrix)


def small_graphs(max_v=4):
    """Every graph with 1..max_v vertices, up to isomorphism."""
    out = []
    for g in nx.graph_atlas_g()[1:]:
        if g.number_of_nodes() > max_v:
            break
        out.append(Lattice(g.number_of_nodes(), np.array(list(g.edges()), dtype=np.int64)))
    return out


GRAPHS = small_graphs()


def test_atlas_covers_all_small_graphs():
    # 1 + 2 + 4 + 11 graphs on 1..4 vertices
    assert len(GRAPHS) == 18


@pytest.mark.parametrize("beta", [0.3, 0.8])
def test_glauber_and_sw_fix_gibbs_measure(beta, rng):
    for lat in GRAPHS:
        c = Couplings(beta)
        mu = Ensemble(lat, c).prob
        for P in (glauber_transition_matrix(lat, c), sw_transition_matrix(lat, c)):
            assert np.allclose(P.sum(axis=1), 1, atol=1e-13)
            assert np.abs(mu @ P - mu).max() <= 1e-12
        # Glauber with fields and mixed-sign couplings
        cf = Couplings(beta, rng.normal(size=lat.n_vertices), rng.uniform(-1, 1, lat.n_edges))
        mu = Ensemble(lat, cf).prob
        assert np.abs(mu @ glauber_transition_matrix(lat, cf) - mu).max() <= 1e-12


def test_glauber_fixes_boundary_measure():
    lat = build_lattice(2, 3)
    c, bc = Couplings(0.6, 0.1), BoundaryCondition("plus")
    mu = Ensemble(lat, c, bc).prob
    assert np.abs(mu @ glauber_transition_matrix(lat, c, bc) - mu).max() <= 1e-12


def test_sampler_validation():
    lat = build_lattice(2, 3)
    with pytest.raises(ValueError):
        Sampler(lat, Couplings(0.3, 0.1), algorithm="sw")
    with pytest.raises(ValueError):
        Sampler(lat, Couplings(0.3), BoundaryCondition("plus"), algorithm="sw")
    with pytest.raises(ValueError):
        Sampler(lat, Couplings(0.3), algorithm="heatbath")
    with pytest.raises(ValueError):
        Sampler(lat, Couplings(0.3)).init_state(0, 0, "sideways")
    with pytest.raises(ValueError):
        run_estimate("abs_m", lat, Couplings(0.3), sweeps=10, burnin=10)
    with pytest.raises(ValueError):
        run_estimate("heat", lat, Couplings(0.3))


def _exact_moments(lat, coup, bc=BoundaryCondition()):
    ens = Ensemble(lat, coup, bc)
    V = lat.n_vertices
    s = np.arange(1 << V)
    spins = 1 - 2 * ((s[:, None] >> np.arange(V)) & 1)
    M = spins.sum(axis=1)
    return ens, M


@pytest.mark.parametrize("algo", ["sw", "glauber"])
def test_chain_matches_enumeration(algo):
    lat = build_lattice(2, 3, "torus")
    c = Couplings(0.4)
    ens, M = _exact_moments(lat, c)
    want_abs = ens.expect(np.abs(M)) / lat.n_vertices
    want_chi = ens.expect(M.astype(float) ** 2) / lat.n_vertices
    a = run_estimate("abs_m", lat, c, chains=4, sweeps=6000, burnin=200, seed=3, algorithm=algo)[0]
    x = run_estimate("susceptibility", lat, c, chains=4, sweeps=6000, burnin=200, seed=4,
                     algorithm=algo)[0]
    assert abs(a.value - want_abs) < 4 * a.stderr + 1e-3
    assert abs(x.value - want_chi) < 4 * x.stderr + 1e-2


def test_glauber_with_field_and_boundary():
    lat = build_lattice(2, 3)
    c, bc = Couplings(0.5, -0.2), BoundaryCondition("plus")
    ens, M = _exact_moments(lat, c, bc)
    want = ens.expect(M.astype(float)) / lat.n_vertices
    e = run_estimate("m", lat, c, bc, chains=4, sweeps=5000, burnin=200, seed=1,
                     algorithm="glauber")[0]
    assert abs(e.value - want) < 4 * e.stderr + 1e-3


def test_two_point_and_energy_correlations():
    lat = build_lattice(2, 3)
    c = Couplings(0.35)
    G = Ensemble(lat, c).two_point_matrix()
    est = run_estimate("two_point", lat, c, chains=4, sweeps=4000, burnin=100, seed=5,
                       vertices=[1, 4, 8])
    for e, x in zip(est, (1, 4, 8)):
        assert abs(e.value - G[0, x]) < 4 * e.stderr + 1e-3
    ee = run_estimate("energy_energy", lat, c, chains=2, sweeps=3000, burnin=100, seed=6,
                      edge_pairs=[(0, 1), (0, 5)])
    assert len(ee) == 2 and all(np.isfinite(e.value) and e.stderr > 0 for e in ee)


def test_threads_do_not_change_results():
    lat = build_lattice(2, 8, "torus")
    a = run_estimate("abs_m", lat, Couplings(0.4), chains=4, sweeps=300, burnin=20, seed=9,
                     threads=1)[0]
    b = run_estimate("abs_m", lat, Couplings(0.4), chains=4, sweeps=300, burnin=20, seed=9,
                     threads=3)[0]
    assert (a.value, a.stderr) == (b.value, b.stderr)


def test_seed_changes_results():
    lat = build_lattice(2, 8, "torus")
    a = run_estimate("energy", lat, Couplings(0.4), chains=2, sweeps=200, burnin=20, seed=1)[0]
    b = run_estimate("energy", lat, Couplings(0.4), chains=2, sweeps=200, burnin=20, seed=2)[0]
    assert a.value != b.value


_BACKEND_SCRIPT = """
import json
from isinglab import kernels
from isinglab.lattice import Couplings, build_lattice
from isinglab.mc import run_estimate
out = {"backend": kernels.BACKEND}
for algo in ("sw", "glauber"):
    e = run_estimate("energy", build_lattice(2, 6, "torus"), Couplings(0.42), chains=2,
                     sweeps=200, burnin=10, seed=11, algorithm=algo)[0]
    out[algo] = [e.value.hex(), e.stderr.hex()]
print(json.dumps(out))
"""


def test_backends_bit_identical():
    res = []
    for flag in ("0", "1"):
        env = dict(os.environ, ISING_LAB_DISABLE_NUMBA=flag)
        p = subprocess.run([sys.executable, "-c", _BACKEND_SCRIPT], env=env, capture_output=True,
                           text=True, check=True)
        res.append(json.loads(p.stdout))
    if res[0]["backend"] != "numba":
        pytest.skip("numba unavailable")
    assert res[1]["backend"] == "numpy"
    assert res[0]["sw"] == res[1]["sw"] and res[0]["glauber"] == res[1]["glauber"]


# ---------------------------------------------------------------------------
# estimators


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=0, max_size=40),
       st.lists(st.floats(-1e3, 1e3), min_size=0, max_size=40),
       st.lists(st.floats(-1e3, 1e3), min_size=0, max_size=40),
       st.integers(1, 5))
def test_accumulator_merge_is_associative(a, b, c, k):
    A, B, C = (Accumulator(k).add(x) for x in (a, b, c))
    left, right = A.merge(B).merge(C), A.merge(B.merge(C))
    assert left.bins == right.bins
    assert left.count == right.count == len(a) + len(b) + len(c)
    assert left.partial_n == right.partial_n
    assert math.isclose(left.total, right.total, rel_tol=1e-12, abs_tol=1e-9)


def test_binning_and_jackknife_on_iid_data(rng):
    x = rng.normal(size=(2, 4000, 1))
    m, e = mean_and_error(list(x))
    assert abs(m) < 4 * e and 0.5 < e * math.sqrt(8000) < 1.5
    assert choose_bin_size(list(x)) >= 1
    bins = rng.normal(size=(50, 2))
    v, err = jackknife(bins, lambda mu: mu[0] + 2 * mu[1])
    want = (bins[:, 0] + 2 * bins[:, 1]).std(ddof=1) / math.sqrt(50)
    assert err == pytest.approx(want, rel=1e-10)


# ---------------------------------------------------------------------------
# Gaussianity diagnostic and correlation length


def bump(u):
    return np.exp(-8 * ((u - 0.5) ** 2).sum(axis=1))


def test_gaussianity_zero_at_z_zero():
    e = gaussianity_diagnostic(bump, 8, 0.3, z=0.0)
    assert e.value == 0.0 and e.stderr == 0.0


def test_gaussianity_oracle_decreases_with_L():
    vals = [gaussianity_independent(bump, L) for L in (8, 16, 32, 64)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    # the fourth cumulant term scales like 1/V
    assert vals[-2] / vals[-1] == pytest.approx(4.0, rel=0.05)


def test_gaussianity_oracle_by_hand():
    L = 4
    w = smeared_weights(bump, L)
    s = np.linalg.norm(w)
    want = abs(np.prod(np.cosh(w / s)) * math.exp(-0.5) - 1)
    assert gaussianity_independent(bump, L) == pytest.approx(want, rel=1e-12)


def test_gaussianity_mc_matches_independent_oracle():
    e = gaussianity_diagnostic(bump, 8, 0.0, z=1.0, chains=4, sweeps=3000, burnin=10, seed=2)
    want = gaussianity_independent(bump, 8)
    assert abs(e.value - want) < 4 * e.stderr + 1e-3


def test_gaussianity_refuses_low_temperature():
    with pytest.raises(ValueError):
        gaussianity_diagnostic(bump, 8, 0.6)


def test_exponential_fit_recovers_rate(rng):
    r = np.arange(1, 12.0)
    c = 2.0 * np.exp(-0.7 * r)
    f = fit_exponential_decay(r, c, c * 1e-3)
    assert f.tau == pytest.approx(0.7, abs=1e-10) and f.r2 == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fit_exponential_decay([1, 2, 3], [1.0, 1e-6, 1e-7], [0.1, 0.1, 0.1])


def test_ring_correlation_length_matches_transfer_matrix():
    # on a ring <s_0 s_r> = tanh(beta)^r up to exponentially small wrap terms
    beta = 0.5
    f = correlation_length_fit(beta, 64, d=1, chains=4, sweeps=4000, burnin=100, seed=4)
    assert f.tau == pytest.approx(-math.log(math.tanh(beta)), abs=0.05)
    assert f.r2 > 0.99


def test_correlation_length_refuses_critical_point():
    with pytest.raises(ValueError):
        correlation_length_fit(0.45, 16)

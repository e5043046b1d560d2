import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isinglab.enumeration import Ensemble
from isinglab.exact import BETA_C, yang_magnetization
from isinglab.lattice import Couplings, build_lattice
from isinglab.scaling import (MEAN_FIELD, ExponentSet, boundary_cycle, boundary_pfaffian,
                              complete_exponents, critical_torus_correlations,
                              exponent_experiment, fit_power_law, pfaffian4,
                              reference_constants, relation_values, scaling_relations_check)

# planar Ising exponents, all rational
PLANAR = ExponentSet(0.0, 1 / 8, 7 / 4, 15.0, 1 / 4, 1.0, 2, "planar")


def test_known_sets_satisfy_relations():
    assert scaling_relations_check(MEAN_FIELD) <= 1e-12
    assert scaling_relations_check(PLANAR) <= 1e-12
    c = complete_exponents(1 / 8, 1 / 4, 2)
    assert scaling_relations_check(c) <= 1e-12
    for a, b in zip((c.alpha, c.gamma, c.delta, c.nu), (0.0, 1.75, 15.0, 1.0)):
        assert a == pytest.approx(b, abs=1e-12)


def test_perturbation_is_detected():
    bumped = ExponentSet(**{**PLANAR.__dict__, "delta": PLANAR.delta + 0.01})
    assert scaling_relations_check(bumped) > 1e-3
    bumped = ExponentSet(**{**MEAN_FIELD.__dict__, "gamma": 1.05})
    # gamma enters gamma (delta + 1)/(delta - 1) and gamma / nu with factor 2
    assert scaling_relations_check(bumped) == pytest.approx(0.1, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.0, 0.9), st.integers(2, 6))
def test_completed_sets_always_consistent(beta, eta, d):
    if d - 2 + eta <= 0.05:
        return
    e = complete_exponents(beta, eta, d)
    first, second = relation_values(e)
    # the completion enforces the relations not involving the beta-delta link
    assert abs(first[0] - first[1]) < 1e-9 and abs(second[0] - second[1]) < 1e-9
    assert abs(second[0] - second[2]) < 1e-9


def test_relations_reject_small_delta():
    with pytest.raises(ValueError):
        scaling_relations_check(ExponentSet(0, 0.5, 1, 1.0, 0, 0.5, 4))
    with pytest.raises(ValueError):
        complete_exponents(0.1, 0.0, 2)


@pytest.mark.parametrize("k", [0.125, 1.0, 2.7])
def test_power_law_fit_exact_data(k):
    x = np.geomspace(1, 100, 30)
    f = fit_power_law(x, 3.0 * x ** -k, decay=True)
    assert f.exponent == pytest.approx(k, abs=1e-12)
    assert f.amplitude == pytest.approx(3.0, rel=1e-12) and f.r2 == pytest.approx(1.0)


def test_power_law_fit_window_and_noise(rng):
    x = np.arange(1.0, 60.0)
    y = x ** -0.5 * (1 + 0.01 * rng.normal(size=len(x)))
    f = fit_power_law(x, y, 0.01 * x ** -0.5, window=(4, 30), decay=True)
    assert f.window == (4.0, 30.0) and f.n_points == 27
    assert abs(f.exponent - 0.5) < 4 * f.stderr
    with pytest.raises(ValueError):
        fit_power_law(x, y, window=(10, 12))
    with pytest.raises(ValueError):
        fit_power_law(x, y, window=(30, 4))


def test_power_law_fit_with_finite_size_factor():
    L = 128
    r = np.arange(4.0, 33.0)
    y = r ** -0.25 * (1 + 0.6 * r / L)
    plain = fit_power_law(r, y, y * 1e-3, decay=True)
    corr = fit_power_law(r, y, y * 1e-3, decay=True, correction=(L, 1.0))
    assert abs(plain.exponent - 0.25) > 0.03
    assert corr.exponent == pytest.approx(0.25, abs=1e-6)
    assert corr.info["correction_amplitude"] == pytest.approx(0.6, abs=1e-4)


def test_yang_exponent_fit():
    f = exponent_experiment("beta-magnetization")
    assert f.exponent == pytest.approx(0.125, abs=0.005)
    assert yang_magnetization(BETA_C) == 0.0


def test_reference_constants_have_provenance():
    ref = reference_constants()
    assert ref["beta_c_2d"][0] == pytest.approx(0.5 * math.log(1 + math.sqrt(2)), abs=1e-15)
    assert ref["delta_sigma_2d"][0] == 0.125 and ref["delta_epsilon_2d"][0] == 1.0
    assert all(isinstance(v[1], str) and v[1] for v in ref.values())


def test_boundary_cycle_order():
    lat = build_lattice(2, (3, 3))
    cyc = boundary_cycle(lat)
    assert len(cyc) == 8 and len(set(cyc.tolist())) == 8
    pts = lat.coords[cyc]
    assert np.all(np.abs(np.diff(np.vstack([pts, pts[:1]]), axis=0)).sum(axis=1) == 1)


def _pf_gap(ens, G, q):
    return ens.expect_sigma(q) - pfaffian4(G[q[0], q[1]], G[q[2], q[3]], G[q[0], q[2]],
                                          G[q[1], q[3]], G[q[0], q[3]], G[q[1], q[2]])


@pytest.mark.parametrize("beta", [0.2, BETA_C, 0.9])
def test_boundary_pfaffian_exact_on_small_box(beta):
    lat = build_lattice(2, (5, 4))
    ens = Ensemble(lat, Couplings(beta))
    G = ens.two_point_matrix()
    cyc = boundary_cycle(lat)
    for start in range(0, len(cyc), 3):
        q = [cyc[(start + k) % len(cyc)] for k in (0, 2, 5, 9)]
        assert abs(_pf_gap(ens, G, q)) < 1e-13
    # interior points do not factorise
    q = [lat.index(c) for c in ((0, 0), (2, 2), (3, 1), (4, 3))]
    assert abs(_pf_gap(ens, G, q)) > 1e-5


def test_boundary_pfaffian_mc_small():
    pts = boundary_pfaffian((2, 4), width=8, height=6, sweeps=1500, seed=1, burnin=50)
    for p in pts:
        assert p.deviation < 4 * p.stderr + 0.02
        assert 0 < p.pfaffian < 1
    with pytest.raises(ValueError):
        boundary_pfaffian((20,), width=8, height=6, sweeps=10, burnin=1)


def test_critical_correlations_shapes_and_decay():
    r, c, e = critical_torus_correlations(16, "spin", 400, seed=2, burnin=50)
    assert len(r) == 5 and c[0] == pytest.approx(1.0) and np.all(np.diff(c) < 0)
    r, c, e = critical_torus_correlations(16, "energy", 400, seed=2, burnin=50)
    assert np.all(c[1:] > 0) and c[1] > c[-1]
    with pytest.raises(ValueError):
        critical_torus_correlations(16, "other", 10, 0, 1)


def test_experiment_dispatch_errors():
    with pytest.raises(ValueError):
        exponent_experiment("nonsense")
    with pytest.raises(ValueError):
        exponent_experiment("spin-decay", {"beta": 0.3})

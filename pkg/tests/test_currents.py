import math

import numpy as np
import pytest
from scipy import stats

from isinglab.currents import (FUNCTIONALS, current_correlation, current_sum, diffineq_check,
                               double_current_sum, literal_current_sum, literal_double_sum,
                               sample_current_trace, squared_correlation_check,
                               switching_check, trace_law, truncation_bound, ursell4)
from isinglab.enumeration import Ensemble
from isinglab.fk import even_clusters
from isinglab.lattice import Couplings, Lattice, build_lattice

TRIANGLE = Lattice(3, np.array([[0, 1], [1, 2], [0, 2]]))


def test_single_edge_sums_by_hand():
    lat = build_lattice(1, 2)
    b = 0.7
    assert current_sum(lat, b, [], 30)[0] == pytest.approx(math.cosh(b), abs=1e-15)
    assert current_sum(lat, b, [0, 1], 30)[0] == pytest.approx(math.sinh(b), abs=1e-15)
    assert current_sum(lat, b, [0], 30)[0] == 0.0


@pytest.mark.parametrize("A", [(), (0, 1), (0, 2), (0, 1, 2, 3)])
def test_parity_sum_matches_literal_enumeration(A):
    lat = build_lattice(2, 2)
    for n_max in (2, 5):
        fast, _ = current_sum(lat, 0.6, A, n_max)
        assert fast == pytest.approx(literal_current_sum(lat, 0.6, A, n_max), rel=1e-13)


def test_truncation_bound_covers_tail():
    lat = build_lattice(2, 2)
    full, _ = current_sum(lat, 0.9, (0, 3), 60)
    for n_max in (2, 4, 8):
        v, bound = current_sum(lat, 0.9, (0, 3), n_max)
        assert 0 <= full - v <= bound


def test_correlation_matches_enumeration():
    lat = build_lattice(2, 3)
    for A in ([0, 8], [1, 2, 4, 5]):
        v, bound = current_correlation(lat, 0.45, A, 12)
        assert abs(v - Ensemble(lat, Couplings(0.45)).expect_sigma(A)) <= bound + 1e-14


def test_trace_law_and_sampler_agree():
    lat = TRIANGLE
    beta, A = 0.8, (0, 1)
    law = trace_law(lat, beta, A)
    assert sum(law.values()) == pytest.approx(1.0)
    samples = sample_current_trace(lat, beta, A, seed=5, size=20000)
    keys = sorted(law)
    idx = {k: i for i, k in enumerate(keys)}
    counts = np.zeros(len(keys))
    for s in samples:
        counts[idx[tuple(int(v) for v in s.state)]] += 1
        assert sorted(s.sources().tolist()) == [0, 1]
    assert stats.chisquare(counts, np.array([law[k] for k in keys]) * len(samples)).pvalue > 1e-4


def test_trace_law_literal_oracle():
    # single edge with two sources: the current is odd, always in the support
    lat = build_lattice(1, 2)
    assert trace_law(lat, 0.3, (0, 1)) == {(1,): 1.0}
    # no sources: zero with probability 1/cosh
    law = trace_law(lat, 0.3, ())
    assert law[(0,)] == pytest.approx(1 / math.cosh(0.3))
    with pytest.raises(ValueError):
        sample_current_trace(lat, 0.3, (0,))


def test_double_sum_matches_literal():
    lat = TRIANGLE
    for A, B in (((), ()), ((0, 1), ()), ((0, 1), (1, 2))):
        for F in ("one", "even-total"):
            fn = (lambda m: 1.0) if F == "one" else (lambda m: float(m.sum() % 2 == 0))
            got = double_current_sum(lat, 0.5, A, B, 3, edge_terms=FUNCTIONALS[F])
            assert got == pytest.approx(literal_double_sum(lat, 0.5, A, B, 3, fn), rel=1e-12)


def test_double_sum_with_support_event_matches_literal():
    lat = TRIANGLE
    B = (0, 2)

    def event(m):
        roots = np.arange(3)
        for e, (u, v) in enumerate(lat.edges):
            if m[e]:
                ru, rv = roots[u], roots[v]
                roots[roots == max(ru, rv)] = min(ru, rv)
        return bool(even_clusters(roots, B)[0])

    got = double_current_sum(lat, 0.4, (0, 2), (), 3, None, lambda r: even_clusters(r, B))
    assert got == pytest.approx(literal_double_sum(lat, 0.4, (0, 2), (), 3, event=event),
                                rel=1e-12)


@pytest.mark.parametrize("F", ["one", "even-total"])
@pytest.mark.parametrize("beta", [0.3, 0.7])
def test_switching_within_tail(F, beta):
    lat = build_lattice(2, (2, 3))
    c = switching_check(lat, beta, (0, 5), (1, 2), F, 10)
    assert c.ok and c.lhs > 0


def test_squared_correlation_identity():
    lat = build_lattice(2, 2)
    c = squared_correlation_check(lat, 0.6, [0, 3])
    assert c.ok


def test_ursell_sign_zero_and_identity():
    lat = build_lattice(2, 2)
    assert ursell4(lat, 0.0, [0, 1, 2, 3])[0] == 0.0
    for beta in (0.2, 0.6, 1.2):
        u4, chk = ursell4(lat, beta, [0, 1, 2, 3])
        assert u4 <= 0 and chk.ok
    with pytest.raises(ValueError):
        ursell4(lat, 0.3, [0, 1, 2, 2])


def test_tail_bound_monotone_in_cutoff():
    b = np.array([0.5, 1.0])
    vals = [truncation_bound(b, n) for n in (2, 4, 8, 16)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_differential_inequalities():
    tor = build_lattice(2, 3, "torus")
    for beta in (0.1, 0.3):
        r = diffineq_check("chi-bubble", tor, beta)
        assert r.lower <= r.middle + r.fd_error and r.middle <= r.upper + r.fd_error
    box = build_lattice(2, 3)
    for h in (0.0, 0.05, 0.3):
        r = diffineq_check("magnetization", box, 0.5, h)
        assert r.violation <= r.fd_error
    with pytest.raises(ValueError):
        diffineq_check("chi-bubble", box, 0.3)
    with pytest.raises(ValueError):
        diffineq_check("magnetization", box, 0.3, -0.1)
    with pytest.raises(ValueError):
        diffineq_check("other", box, 0.3)


def test_currents_reject_antiferromagnets():
    with pytest.raises(ValueError):
        current_sum(build_lattice(1, 2), 0.3, (), 5, J=[-1.0])

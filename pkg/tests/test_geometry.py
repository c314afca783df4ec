import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twc.adversary import ChannelParams, ScaleAndBabble, Silent
from twc.codebook import FiniteCode, ImplicitBallCode, build_ball_code
from twc.decoder import ToleranceProfile, strip_c2
from twc.errors import DegenerateError, DomainError
from twc.geometry import (IMPLICATIONS, Strip, Ufo, avg_effective_radius_sample, count_sum_pairs,
                          count_sum_pairs_direct, empirical_event_rates, empirical_orthogonality,
                          extremal_cos, strip_membership, sumset_constants, sumset_lower_bound,
                          table_to_csv, trial_events)
from twc.lattice import Lattice, LinearCode, construction_a, radii
from twc.linalg import SeededRng


def test_count_sum_pairs_examples():
    code = build_ball_code(Lattice.integer(1), 4.0)  # {-2..2}
    assert count_sum_pairs(code, [1.0]) == 4
    assert count_sum_pairs_direct(code, [1.0]) == 4
    assert count_sum_pairs(code, [5.0]) == 0
    assert count_sum_pairs(code, [4.0]) == 1
    assert count_sum_pairs(code, [0.5]) == 0


@given(st.integers(0, 10**6), st.integers(1, 4))
@settings(max_examples=30, deadline=None)
def test_count_sum_pairs_matches_direct(seed, n):
    gen = np.random.default_rng(seed)
    code = build_ball_code(Lattice.scaled(n, float(gen.uniform(0.4, 0.8))), 1.0)
    z = code.codewords[gen.integers(code.size)] + code.codewords[gen.integers(code.size)]
    assert count_sum_pairs(code, z) == count_sum_pairs_direct(code, z)


def test_count_sum_pairs_checkerboard():
    # D_3 = {x in Z^3 : sum even}, from the binary parity-check code
    code = build_ball_code(construction_a(LinearCode(2, np.array([[1, 1], [1, 0], [0, 1]])), 1.0), 3.0)
    for z in ([1, 1, 0], [2, 0, 0], [2, 2, 0], [1, 1, 2]):
        assert count_sum_pairs(code, z) == count_sum_pairs_direct(code, z)


def test_sumset_bound_examples():
    k = sumset_constants(2, 0.5, 0.01, 0.05)
    assert k.c_omega == pytest.approx(0.322842712474619, abs=1e-12)
    assert sumset_lower_bound(2, 0.5, 0.01, 0.05, 4) == pytest.approx(0.88921011068959, rel=1e-12)
    P, tau, n = 3.0, 0.2, 5
    limit = sumset_constants(P, tau, 0, 0).C1 * (P / (2 * tau)) ** (n / 2)
    assert sumset_lower_bound(P, tau, 1e-14, 1e-14, n) == pytest.approx(limit, rel=1e-6)
    with pytest.raises(DomainError):
        sumset_lower_bound(1.0, 0.5, 0.2, 0.5, 4)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_sumset_bound_holds_on_scaled_zn(n):
    P, delta = 1.0, 0.1
    L = Lattice.scaled(n, 0.3)
    code = build_ball_code(L, P)
    r = radii(L)
    bound = sumset_lower_bound(P, r.tau, r.omega, delta, n)
    gen = np.random.default_rng(n)
    checked = 0
    for _ in range(40):
        z = code.codewords[gen.integers(code.size)] + code.codewords[gen.integers(code.size)]
        if 2 * n * P * (1 - delta) <= z @ z <= 2 * n * P * (1 + delta):
            assert count_sum_pairs(code, z) >= bound
            checked += 1
    assert checked > 0


def strip3(rho=0.3, eps=0.05):
    z = np.array([math.sqrt(6.0), 0.0, 0.0])  # ||z||^2 = 2nP with n = 3, P = 1
    return Strip(z, 1.0, rho, eps)


def test_strip_membership_examples():
    s = strip3()
    assert strip_membership(s, s.z / 2 + s.r * np.array([0.0, 1.0, 0.0]))
    assert not strip_membership(s, s.z / 2)
    with pytest.raises(DomainError):
        Strip(np.array([4.0, 0, 0]), 1.0, 0.1, 0.01)


def test_strip_inside_ufo_inside_ball():
    s = strip3()
    gen = np.random.default_rng(0)
    X = gen.uniform(-2, 3, (20000, 3))
    inside = s.contains_many(X)
    assert inside.sum() > 0
    ufo = s.ufo()
    assert all(ufo.contains(x) and x @ x <= 3 * (1 + 1e-9) for x in X[inside])
    assert Ufo(s.z, 1.0).nonempty and not Ufo(np.array([4.0, 0, 0]), 1.0).nonempty


@pytest.mark.parametrize("method", ["exact", "reject"])
def test_strip_samplers_stay_inside(method):
    s = strip3()
    X = s.sample(SeededRng(1), 2000, method)
    assert s.contains_many(X).all()


def test_strip_samplers_agree_in_law():
    # same law: compare quantiles of the axial offset and of ||x||^2
    s = Strip(np.array([math.sqrt(8.0), 0, 0, 0]), 1.0, 0.5, 0.2)
    A = s.sample(SeededRng(2), 20000, "exact")
    B = s.sample(SeededRng(3), 20000, "reject")
    for f in (lambda X: s.decompose(X)[0], lambda X: np.sum(X * X, axis=1)):
        qa, qb = np.quantile(f(A), [0.1, 0.5, 0.9]), np.quantile(f(B), [0.1, 0.5, 0.9])
        assert np.allclose(qa, qb, atol=0.03)


def test_extremal_cos_examples():
    n, P = 3, 1.0
    assert extremal_cos(2 * n * P, n, P, 0.3)[0] == pytest.approx(0.0)
    c0, c1 = extremal_cos(5.0, n, P, 0.0)
    assert c0 == pytest.approx(c1)
    with pytest.raises(DomainError):
        extremal_cos(4 * n * P + 1, n, P, 0.1)


def test_extremal_cos_brackets_strip_pairs():
    s = strip3(eps=1e-12)
    X = s.sample(SeededRng(4), 10**4)
    Y = s.z - X
    cos = np.sum(X * Y, axis=1) / np.sqrt(np.sum(X * X, axis=1) * np.sum(Y * Y, axis=1))
    cmin, cmax = extremal_cos(float(s.z @ s.z), 3, 1.0, s.rho)
    assert np.all(cos >= -cmin - 1e-9) and np.all(cos <= -cmax + 1e-9)


def test_strip_pair_inner_products_and_norms():
    n, P, tol = 64, 1.0, ToleranceProfile(rho=0.1, delta=0.1, eps_strip=0.01)
    gen = np.random.default_rng(5)
    for zz in (2 * n * P * 0.9, 2 * n * P, 2 * n * P * 1.1):
        u = gen.standard_normal(n)
        z = u / np.linalg.norm(u) * math.sqrt(zz)
        s = Strip(z, P, tol.rho, tol.eps_strip)
        X = s.sample(gen, 2000)
        ip = np.sum(X * (z - X), axis=1) / (n * P)
        assert np.all(ip >= -tol.delta - 1e-9) and np.all(ip <= tol.theta + 1e-9)
        c2 = strip_c2(zz, n, P, tol.rho, tol.eps_strip)
        norms = np.sum(X * X, axis=1)
        assert np.all(norms >= n * (P - c2) - 1e-9) and np.all(norms <= n * P + 1e-9)


def test_avg_effective_radius_examples():
    n, Pt, Nt = 4, 2.0, 0.5
    x = math.sqrt(n * Pt) * np.eye(4)[0]
    s = math.sqrt(n * Nt) * np.eye(4)[1]
    assert avg_effective_radius_sample(x, s) == pytest.approx(Pt * Nt / (Pt + Nt))
    assert avg_effective_radius_sample(x, np.zeros(4)) == 0.0
    with pytest.raises(DegenerateError):
        avg_effective_radius_sample(x, -x)


def test_avg_effective_radius_concentrates():
    n, P, alpha, N = 256, 1.0, 0.05, 0.023
    Pt, Nt = (1 - alpha) ** 2 * P, N - 2 * alpha**2 * P
    gen = np.random.default_rng(6)
    z = np.zeros(n)
    z[0] = math.sqrt(2 * n * P)
    s = Strip(z, P, 0.1, 0.01)
    vals = []
    for x in s.sample(gen, 500):
        g = gen.standard_normal(n)
        g[0] = 0.0
        g *= math.sqrt(n * Nt) / np.linalg.norm(g)
        vals.append(avg_effective_radius_sample((1 - alpha) * x, g))
    target = Pt * Nt / (Pt + Nt)
    assert abs(np.mean(vals) - target) <= 0.1 * target


def test_events_all_clear_on_orthogonal_toy():
    n, P, N = 4, 1.0, 0.5
    E = np.eye(n)
    xa, xb = math.sqrt(n * P) * E[0], math.sqrt(n * P) * E[1]
    s = math.sqrt(n * N) * E[2]
    te = trial_events(xa, xb, s, ChannelParams.symmetric(n, P, N), ToleranceProfile())
    assert not any(te.flags.values()), te.flags


def test_events_on_orthogonal_toy_via_table():
    n, P, N = 4, 1.0, 0.5
    E = np.eye(n)
    code_a = FiniteCode(np.array([math.sqrt(n * P) * E[0]]))
    code_b = FiniteCode(np.array([math.sqrt(n * P) * E[1]]))
    t = empirical_event_rates(code_a, code_b, ChannelParams.symmetric(n, P, N),
                              lambda z, rng: math.sqrt(n * N) * E[2], ToleranceProfile(), 5)
    assert all(v == 0 for v in t.counts.values())
    assert "E_z" in table_to_csv([t]).splitlines()[0]


def e_z_rate(trials=2000):
    n, P = 256, 1.0
    code = ImplicitBallCode(Lattice.scaled(n, 1 / n), P)
    t = empirical_event_rates(code, code, ChannelParams.symmetric(n, P, 0.3), Silent(),
                              ToleranceProfile(delta=0.1), trials, root_seed=3)
    return t.freq("E_z")


def test_event_e_z_matches_oracle():
    # ||z||^2/(2nP) has mean n/(n+2) and sd about (n/(n+2))/sqrt(n) from <x_A, x_B>
    n = 256
    m = n / (n + 2)
    sd = m / math.sqrt(n)
    Phi = lambda t: 0.5 * math.erfc(-t / math.sqrt(2))
    pred = Phi((0.9 - m) / sd) + 1 - Phi((1.1 - m) / sd)
    assert abs(e_z_rate() - pred) <= 0.03


@pytest.mark.xfail(strict=True, reason="delta = 0.1 is 1.6 sd of the cross term at n = 256; rate is about 0.11")
def test_event_e_z_rare_at_n256():
    assert e_z_rate() <= 0.05


def test_event_implications_hold_per_trial():
    n, P, N = 256, 1.0, 0.3
    code = ImplicitBallCode(Lattice.scaled(n, 1 / n), P)
    t = empirical_event_rates(code, code, ChannelParams.symmetric(n, P, N), ScaleAndBabble(N / (2 * P), 0.05),
                              ToleranceProfile(), 1000, root_seed=4)
    assert set(t.violations) == set(IMPLICATIONS)
    assert all(v == 0 for v in t.violations.values()), t.violations
    assert t.checked["E_1<=E_T"] == 1000


def test_orthogonality_examples():
    v = np.array([1.0, 1.0, 0.0, 0.0])
    pair = FiniteCode(np.array([v, -v]))
    assert empirical_orthogonality(pair, pair, 0.4).fraction == 0.5
    E = 2 * np.eye(4)
    a, b = FiniteCode(E[:2]), FiniteCode(E[2:])
    assert empirical_orthogonality(a, b, 1e-6).fraction == 0.0
    assert empirical_orthogonality(a, b, 1e-6, trials=100, rng=SeededRng(0), k=3).fraction == 0.0


def orthogonality_n256(trials=4000):
    n, P = 256, 1.0
    code = ImplicitBallCode(Lattice.scaled(n, 1 / n), P)
    return empirical_orthogonality(code, code, 0.1 * P, trials, SeededRng(7).gen).fraction


def test_orthogonality_matches_gaussian_oracle():
    # <x_A, x_B> has sd sqrt(n) P n/(n+2) for uniform ball points
    n = 256
    pred = 0.5 * math.erfc(0.1 * n / (math.sqrt(n) * n / (n + 2)) / math.sqrt(2))
    assert abs(orthogonality_n256() - pred) <= 0.015


@pytest.mark.xfail(strict=True, reason="one-sided tail at 1.6 sd is about 0.054, not 0.01")
def test_orthogonality_literal_threshold():
    assert orthogonality_n256() <= 0.01

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twc.adversary import ChannelParams, ScaleAndBabble, ZAwareSymmetrization, apply_attack
from twc.bounds import capacity_symmetric
from twc.codebook import FiniteCode, ImplicitBallCode, build_ball_code
from twc.config import ExperimentConfig
from twc.decoder import (ToleranceProfile, decode_min_distance, decode_unique, effective_channel,
                         effective_received, estimate_alpha, estimate_alpha_raw, estimate_r_dec, list_decode,
                         strip_theta)
from twc.errors import ParameterError
from twc.lattice import Lattice
from twc.linalg import SeededRng, project_perp
from twc.sim import run_experiment

E = np.eye(4)
XA, XB, SP = 2 * E[0], 2 * E[1], 0.5 * E[2]  # n = 4, P = 1: ||x||^2 = nP


def test_tolerance_profile():
    t = ToleranceProfile()
    assert t.theta == pytest.approx(strip_theta(0.1, 0.1))
    assert t.theta >= t.delta
    with pytest.raises(ParameterError):
        ToleranceProfile(mu=1.5)


def test_alpha_exact_cases():
    assert estimate_alpha(XA + XB, XB, 1.0) == pytest.approx(0.0)
    assert estimate_alpha(0.7 * (XA + XB), XB, 1.0) == pytest.approx(0.3)
    assert estimate_alpha(-5 * XB, XB, 1.0) == pytest.approx(1 - 1e-6)
    assert estimate_alpha_raw(-5 * XB, XB, 1.0) == pytest.approx(6.0)


def test_r_dec_exact_cases():
    assert estimate_r_dec(XA + XB, XB, 0.0) == pytest.approx(0.0)
    y = 0.7 * (XA + XB) + SP
    ah = estimate_alpha(y, XB, 1.0)
    assert ah == pytest.approx(0.3)
    assert estimate_r_dec(y, XB, ah) == pytest.approx(SP @ SP)
    # unequal norms: r_dec = ||s_perp||^2 - (1-alpha)^2 (||x_B||^2 - ||x_A||^2)
    xa = 1.5 * E[0]
    y = 0.7 * (xa + XB) + SP
    assert estimate_r_dec(y, XB, estimate_alpha(y, XB, 1.0)) == pytest.approx(0.25 - 0.49 * (4 - 2.25))


def test_effective_received_cases():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.array_equal(effective_received(y, XB, 1.0), y)
    assert np.allclose(effective_received(XA + XB, XB, 0.0), XA)


def test_effective_received_identity_under_scale_and_babble():
    # y~ - ((1-alpha) x_A + g) = (alpha_hat - alpha) x_B exactly when nothing is truncated
    n, P = 64, 1.0
    p = ChannelParams.symmetric(n, P, 0.5)
    gen = SeededRng(1).gen
    code = ImplicitBallCode(Lattice.scaled(n, 1 / n), P)
    for _ in range(50):
        xa, xb = code.sample(gen, 2)
        alpha = 0.2
        g = math.sqrt(0.5 - 2 * alpha**2 * P * 1.1) * gen.standard_normal(n)
        s = -alpha * (xa + xb) + g
        if s @ s > n * 0.5:
            continue
        y = xa + xb + s
        ah = estimate_alpha(y, xb, P)
        lhs = np.linalg.norm(effective_received(y, xb, ah) - ((1 - alpha) * xa + g))
        assert lhs == pytest.approx(abs(alpha - ah) * np.linalg.norm(xb), rel=1e-9, abs=1e-9)


def test_decode_unique_exact_hit_and_ambiguity():
    code = FiniteCode(np.array([XA, -XA, 2 * E[3]]))
    d = decode_unique(code, XA + XB, XB, 1.0)
    assert d.verdict == "decoded" and d.candidates_found == 1
    assert np.array_equal(code.codewords[d.index], XA)
    close = FiniteCode(np.array([XA, XA + 0.1 * E[3]]))
    d2 = decode_unique(close, XA + XB, XB, 1.0, ToleranceProfile(mu=0.1))
    assert d2.verdict == "ambiguous" and d2.candidates_found == 2 and d2.index is None
    far = FiniteCode(np.array([-XA]))
    assert decode_unique(far, XA + XB, XB, 1.0).verdict == "empty"


@given(st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_decode_unique_lens_search_matches_scan(seed):
    # the enumeration path must accept exactly the codewords a full scan accepts
    import twc.decoder as dec

    n, P = 6, 1.0
    code = build_ball_code(Lattice.scaled(n, 0.6), P)
    gen = np.random.default_rng(seed)
    xa = code.codewords[gen.integers(code.size)]
    xb = code.codewords[gen.integers(code.size)]
    y = xa + xb + 0.3 * gen.normal(size=n)
    tol = ToleranceProfile(mu=0.3)
    scan = decode_unique(code, y, xb, P, tol)
    old = dec.SCAN_LIMIT
    dec.SCAN_LIMIT = 0
    try:
        lens = decode_unique(code, y, xb, P, tol)
    finally:
        dec.SCAN_LIMIT = old
    assert scan.verdict == lens.verdict and scan.candidates_found == lens.candidates_found
    assert scan.candidates == lens.candidates


def test_decode_unique_implicit_code_reports_point():
    n, P = 8, 1.0
    code = ImplicitBallCode(Lattice.scaled(n, 0.7), P)
    xa, xb = code.sample(SeededRng(2), 2)
    d = decode_unique(code, xa + xb, xb, P, ToleranceProfile(mu=0.01))
    if d.decoded:
        assert d.index == -1 and code.lattice.contains(d.codeword)


def test_min_distance_basic_and_tie():
    code = FiniteCode(np.array([[-1.0], [1.0], [3.0]]))
    assert decode_min_distance(code, [1.0 + 5.0], [5.0]) == 1
    assert decode_min_distance(code, [0.0], [0.0]) == 0  # equidistant: lower index
    assert decode_min_distance(code, [2.0], [0.0]) == 1


def test_symmetrization_success_bounded():
    # min-distance success <= 1/2 + 1/|C_A| + 3 sigma under the symmetrization attack
    n, P = 128, 1.0
    code = ImplicitBallCode(Lattice.scaled(n, 1 / n), P).subsample(8, seed=3)
    p = ChannelParams.symmetric(n, P, 1.5 * P)
    gen = SeededRng(4).gen
    trials, ok = 1000, 0
    for _ in range(trials):
        ia, ib = code.sample_index(gen), code.sample_index(gen)
        xa, xb = code.codewords[ia], code.codewords[ib]
        s = apply_attack(ZAwareSymmetrization("A"), xa + xb, p, gen, code, code).s
        ok += decode_min_distance(code, xa + xb + s, xb) == ia
    bound = 0.5 + 1 / code.size
    assert ok / trials <= bound + 3 * math.sqrt(bound * (1 - bound) / trials)


def test_list_decode_examples():
    code = build_ball_code(Lattice.integer(1), 4.0)
    assert list_decode(code, [0.2], 1.0) == [2, 3]
    assert list_decode(code, [1.0], 0.0) == [3]
    assert list_decode(FiniteCode(code.codewords), [0.2], 1.0) == [2, 3]
    with pytest.raises(ParameterError):
        list_decode(code, [0.0], -1.0)


def test_list_decode_matches_scan():
    code = build_ball_code(Lattice.scaled(4, 0.5), 1.0)
    plain = FiniteCode(code.codewords)
    gen = SeededRng(5).gen
    sizes = []
    for _ in range(1000):
        c = gen.normal(size=4)
        got = list_decode(code, c, 0.3)
        assert got == list_decode(plain, c, 0.3)
        sizes.append(len(got))
    # the configured list size for this lattice: points of 0.5 Z^4 within sqrt(0.3)
    assert max(sizes) <= 16


def test_effective_channel_alpha_zero():
    p = ChannelParams.symmetric(8, 2.0, 0.5)
    ec = effective_channel(p, 0.0)
    assert (ec.p_tilde, ec.n_tilde) == (2.0, 0.5)
    assert ec.r_bar == pytest.approx(2.0 * 0.5 / 2.5)
    assert ec.r_bar <= min(ec.p_tilde, ec.n_tilde)


def test_effective_snr_identities():
    gen = np.random.default_rng(0)
    for _ in range(100):
        P = float(gen.uniform(0.1, 10))
        N = float(gen.uniform(0.01, 1.9)) * P
        ec = effective_channel(ChannelParams.symmetric(4, P, N), N / (2 * P))
        assert ec.naive_snr == pytest.approx(P / N - 0.5, rel=1e-12, abs=1e-12)
        assert ec.average_snr == pytest.approx(P / N + 0.5, rel=1e-12, abs=1e-12)


def test_effective_channel_infeasible():
    with pytest.raises(ParameterError):
        effective_channel(ChannelParams.symmetric(4, 1.0, 0.1), 0.5)


def test_robust_effective_channel_fields():
    ec = effective_channel(ChannelParams.symmetric(4, 1.0, 0.1), 0.05, ToleranceProfile(xi=0.01, mu=0.01))
    assert ec.p_tilde_prime < ec.p_tilde
    assert ec.n_tilde_prime > 0 and ec.xi_min > 0 and ec.mu_min > 0


def alpha_trials(n=512, trials=1000):
    P, N = 1.0, 0.01
    p = ChannelParams.symmetric(n, P, N)
    code = ImplicitBallCode(Lattice.scaled(n, 1 / n), P)
    atk = ScaleAndBabble(N / (2 * P), 0.05)
    err = []
    for t in range(trials):
        gen = SeededRng(9, t).gen
        xa, xb = code.sample(gen, 2)
        s = apply_attack(atk, xa + xb, p, gen).s
        alpha, _ = project_perp(s, xa + xb)
        err.append(estimate_alpha(xa + xb + s, xb, P) - alpha)
    return np.array(err)


def test_alpha_error_matches_inner_product_oracle():
    # alpha_hat - alpha is dominated by -(1-alpha)<x_A, x_B>/(nP), whose sd is about 1/sqrt(n)
    err = alpha_trials()
    sd = math.sqrt((1 - 0.005) ** 2 / 512 + 0.01 / 512 + 0.01 / 1024)
    predicted = math.erf(0.02 / sd / math.sqrt(2))
    assert abs(np.mean(np.abs(err) <= 0.02) - predicted) <= 0.05


@pytest.mark.xfail(strict=True, reason="the estimate fluctuates by about 1/sqrt(n) = 0.044 at n = 512")
def test_alpha_estimate_within_002_in_95_percent():
    assert np.mean(np.abs(alpha_trials()) <= 0.02) >= 0.95


def n32_gaussian_babble_config(trials=500):
    P = 1.0
    N = P / 3
    return ExperimentConfig.from_dict({
        "params": {"n": 32, "P": P, "N": N},
        "code_a": {"lattice": {"kind": "integer", "n": 32}, "P": P, "rate": capacity_symmetric(P, N) / 2},
        "attack": {"kind": "gaussian_babble"},
        "decoder": {"kind": "estimation", "tolerances": {"mu": 0.1}},
        "trials": trials, "root_seed": 1})


@pytest.mark.xfail(strict=True, reason="at n = 32 the alpha estimate misses by about 0.2; measured error ~0.75")
def test_estimation_decoder_n32_gaussian_babble():
    summary, _ = run_experiment(n32_gaussian_babble_config())
    assert summary.pe_hat <= 0.1

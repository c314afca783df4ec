import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twc.errors import CapacityError, ParameterError, StructureError
from twc.lattice import (Lattice, LinearCode, babai, construction_a, count_bounds, enumerate_in_ball,
                         lattice_from_dict, lattice_to_dict, mod_lattice, nested_construction_a, nld,
                         packing_radius, quantize, quantize_flagged, radii, sample_ball_points)
from twc.linalg import SeededRng


def checkerboard():
    return construction_a(LinearCode(2, np.array([[1], [1]])), 1.0)


def brute_points(L, R, box=6):
    """Oracle: integer combinations of the basis in a box, filtered by norm."""
    n = L.n
    pts = []
    for c in itertools.product(range(-box, box + 1), repeat=n):
        x = L.basis @ np.array(c, dtype=float)
        if x @ x <= R * R + 1e-9:
            pts.append(tuple(np.round(x, 9)))
    return sorted(set(pts))


def test_linear_code_validation():
    with pytest.raises(ParameterError):
        LinearCode(4, np.array([[1]]))
    with pytest.raises(ParameterError):
        LinearCode(3, np.array([[3]]))


def test_construction_a_integer_line():
    L = construction_a(LinearCode(3, np.array([[1]])), 3.0)
    assert L.covolume == pytest.approx(1.0)
    assert L.contains([1.0]) and L.contains([-2.0]) and not L.contains([0.5])


def test_construction_a_zero_code():
    L = construction_a(LinearCode(5, np.zeros((3, 1), dtype=int)), 2.0)
    assert L.covolume == pytest.approx(8.0)
    assert L.contains([2, 0, -2]) and not L.contains([1, 0, 0])


def test_checkerboard():
    L = checkerboard()
    assert L.covolume == pytest.approx(0.5)
    for a, b in itertools.product(range(-3, 4), repeat=2):
        assert L.contains([a / 2, b / 2]) == ((a - b) % 2 == 0)


def test_construction_a_covolume_formula():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n, q = int(rng.integers(1, 6)), int(rng.choice([2, 3, 5, 7]))
        k = int(rng.integers(0, n + 1))
        code = LinearCode.random(n, k, q, int(rng.integers(1000)))
        L = construction_a(code, 1.5)
        rank = L.meta["rank"]
        assert rank <= k
        assert L.log_covolume == pytest.approx(n * math.log(1.5 / q) + (n - rank) * math.log(q))
        # every codeword lifts into the lattice
        for m in itertools.islice(itertools.product(range(q), repeat=k), 20):
            c = (code.G @ np.array(m, dtype=np.int64)) % q if k else np.zeros(n)
            assert L.contains(1.5 * c / q)


def test_nested_examples():
    fine, coarse = nested_construction_a(Lattice.scaled(1, 3.0), LinearCode(3, np.array([[1]])))
    assert fine.covolume == pytest.approx(1.0)
    assert coarse.covolume / fine.covolume == pytest.approx(3)
    f0, c0 = nested_construction_a(Lattice.scaled(2, 2.0), LinearCode(2, np.zeros((2, 0), dtype=int)))
    assert f0.covolume == pytest.approx(c0.covolume)
    f2, c2 = nested_construction_a(Lattice.scaled(2, 2.0), LinearCode(2, np.array([[1], [1]])))
    assert c2.covolume / f2.covolume == pytest.approx(2)
    for a, b in itertools.product(range(-3, 4), repeat=2):
        assert f2.contains([a, b]) == ((a - b) % 2 == 0)


def test_quantize_examples():
    assert np.array_equal(quantize(Lattice.integer(2), [0.4, -1.6]), [0, -2])
    assert np.array_equal(quantize(Lattice.integer(1), [0.5]), [1])
    assert np.array_equal(quantize(Lattice.integer(1), [-0.5]), [0])
    assert np.allclose(quantize(checkerboard(), [0.3, 0.1]), [0, 0])
    assert np.allclose(mod_lattice(Lattice.integer(2), [0.4, -1.6]), [0.4, 0.4])
    assert not np.any(mod_lattice(checkerboard(), [0.5, 1.5]))


def test_quantize_matches_brute_force_cvp():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(2, 4))
        code = LinearCode.random(n, 1, 5, int(rng.integers(100)))
        L = construction_a(code, 1.0)
        x = rng.normal(size=n)
        res = quantize_flagged(L, x)
        assert not res.approximate
        pts = np.array(brute_points(L, float(np.linalg.norm(x)) + 2.0, box=8))
        best = np.min(np.sum((pts - x) ** 2, axis=1))
        assert np.sum((res.point - x) ** 2) <= best + 1e-9


def test_large_dimension_uses_babai_flag():
    L = Lattice(np.eye(20) + 0.1 * np.tri(20, k=-1))
    res = quantize_flagged(L, np.full(20, 0.3))
    assert res.approximate
    assert L.contains(res.point)


def test_mod_lattice_within_covering_radius():
    L = Lattice.integer(4)
    X = SeededRng(4).gen.uniform(-10, 10, size=(10**4, 4))
    for x in X[:2000]:
        assert np.linalg.norm(mod_lattice(L, x)) <= math.sqrt(4) / 2 + 1e-12


def test_enumerate_examples():
    assert len(enumerate_in_ball(Lattice.integer(2), [0, 0], 1.5)) == 9
    L = checkerboard()
    p = enumerate_in_ball(L, [0.5, 0.5], 0.0)
    assert np.allclose(p, [[0.5, 0.5]])
    assert len(enumerate_in_ball(L, [0.5, 0.5], 0.9 * packing_radius(L))) == 1


@given(st.integers(1, 3), st.floats(0.0, 3.0), st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_enumerate_matches_brute_force(n, R, seed):
    rng = np.random.default_rng(seed)
    code = LinearCode.random(n, 1, 3, seed % 97)
    L = construction_a(code, 1.0 + rng.random())
    c = rng.normal(size=n)
    got = sorted(tuple(np.round(p, 9)) for p in enumerate_in_ball(L, c, R))
    pts = []
    for co in itertools.product(range(-10, 11), repeat=n):
        x = L.basis @ np.array(co, dtype=float)
        if np.sum((x - c) ** 2) <= R * R:
            pts.append(tuple(np.round(x, 9)))
    assert got == sorted(set(pts))


def test_enumerate_budget():
    with pytest.raises(CapacityError):
        enumerate_in_ball(Lattice.integer(10), np.zeros(10), 10.0, budget=1000)


def test_count_bounds_example():
    b = count_bounds(Lattice.integer(2), [0, 0], 1.5, r_cov=math.sqrt(2) / 2)
    assert b.lower == pytest.approx(math.pi * (1.5 - math.sqrt(0.5)) ** 2)
    assert b.upper == pytest.approx(math.pi * (1.5 + math.sqrt(0.5)) ** 2)
    assert b.lower <= 9 <= b.upper
    assert count_bounds(Lattice.integer(2), [0, 0], 0.5).lower == 0
    far = count_bounds(Lattice.integer(2), [0, 0], 1e6)
    assert far.upper / far.lower == pytest.approx(1, abs=1e-5)


def test_count_bounds_default_is_certified():
    rng = np.random.default_rng(2)
    for _ in range(40):
        L = construction_a(LinearCode.random(3, 1, 5, int(rng.integers(1000))), 1.0)
        c, R = rng.normal(size=3), float(rng.uniform(0, 2))
        b = count_bounds(L, c, R)
        k = len(enumerate_in_ball(L, c, R))
        assert b.lower <= k <= b.upper


def test_radii_z2_and_z1():
    r = radii(Lattice.integer(2), sample_budget=10**5, analytic=False)
    assert r.r_pack == pytest.approx(0.5)
    assert r.r_eff == pytest.approx(1 / math.sqrt(math.pi))
    assert abs(r.r_cov - math.sqrt(2) / 2) <= 0.02 * math.sqrt(2) / 2
    r1 = radii(Lattice.integer(1))
    for v in (r1.r_pack, r1.r_eff, r1.r_cov):
        assert v == pytest.approx(0.5)


def test_radii_homogeneous():
    L = checkerboard()
    a, b = radii(L), radii(L.scaled_by(3.0))
    assert b.r_pack == pytest.approx(3 * a.r_pack)
    assert b.r_eff == pytest.approx(3 * a.r_eff)
    assert a.r_pack <= a.r_eff <= a.r_cov


def test_nld():
    assert nld(Lattice.integer(5)) == pytest.approx(0)
    assert nld(Lattice.scaled(2, 0.5)) == pytest.approx(1)
    assert nld(Lattice.scaled(3, 4.0)) == pytest.approx(-2)


def test_high_dimensional_covolume_does_not_underflow():
    L = Lattice.scaled(256, 0.01)
    assert L.log_covolume == pytest.approx(256 * math.log(0.01))


def test_serialization_round_trip():
    fine, coarse = nested_construction_a(Lattice.scaled(2, 2.0), LinearCode(2, np.array([[1], [1]])))
    for L in (Lattice.integer(3), Lattice.scaled(2, 0.5), checkerboard(), fine, Lattice(np.array([[2.0, 1.0], [0.0, 1.0]]))):
        M = lattice_from_dict(lattice_to_dict(L))
        assert M.log_covolume == pytest.approx(L.log_covolume)
        assert np.allclose(babai(M, [0.3, 1.7, 2.2][:L.n]), babai(L, [0.3, 1.7, 2.2][:L.n]))
    with pytest.raises(StructureError):
        lattice_from_dict({"kind": "nope"})


def test_sample_ball_points_uniform():
    L = Lattice.integer(2)
    pts = sample_ball_points(L, 1.5, SeededRng(3), 9000)
    assert np.all(np.sum(pts * pts, axis=1) <= 2.25)
    _, counts = np.unique(pts, axis=0, return_counts=True)
    assert len(counts) == 9
    assert np.all(np.abs(counts - 1000) < 5 * math.sqrt(1000))

"""Full-rank lattices: Construction-A builders, closest-point search, radii and ball enumeration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapacityError, DimensionError, ParameterError, StructureError
from .linalg import as_generator, as_vec, log_ball_volume, SeededRng

EXACT_CVP_DIM = 12
ENUM_BUDGET = 10**7


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    return all(q % d for d in range(2, math.isqrt(q) + 1))


@dataclass(frozen=True)
class LinearCode:
    """q-ary linear code given by an n x k generator matrix."""

    q: int
    G: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.G, dtype=np.int64)
        if G.ndim == 1:
            G = G.reshape(-1, 1)
        if G.ndim != 2:
            raise DimensionError("generator matrix must be 2-D (n x k)")
        if not is_prime(int(self.q)):
            raise ParameterError(f"q must be prime, got {self.q}")
        if np.any(G < 0) or np.any(G >= self.q):
            raise ParameterError("generator entries must lie in {0..q-1}")
        if G.shape[1] > G.shape[0]:
            raise ParameterError("k must not exceed n")
        G.setflags(write=False)
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "G", G)

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @property
    def k(self) -> int:
        return self.G.shape[1]

    @classmethod
    def random(cls, n: int, k: int, q: int, seed: int = 0) -> "LinearCode":
        gen = SeededRng(seed, 0x6C).gen
        return cls(q, gen.integers(0, q, size=(n, k)))


def rref_mod_q(A: np.ndarray, q: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(q); returns nonzero rows and pivot columns."""
    M = np.array(A, dtype=np.int64) % q
    rows, cols = M.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(M[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + nz[0]
        M[[r, p]] = M[[p, r]]
        M[r] = (M[r] * pow(int(M[r, c]), -1, q)) % q
        for i in range(rows):
            if i != r and M[i, c]:
                M[i] = (M[i] - M[i, c] * M[r]) % q
        pivots.append(c)
        r += 1
    return M[:r], pivots


def _code_lattice_basis(code: LinearCode) -> tuple[np.ndarray, int]:
    """Integer basis (columns) of C + qZ^n in Hermite-like form, plus the GF(q) rank."""
    n, q = code.n, code.q
    if code.k == 0:
        return q * np.eye(n, dtype=np.int64), 0
    E, piv = rref_mod_q(code.G.T, q)
    cols = [E[i] for i in range(E.shape[0])]
    for j in range(n):
        if j not in piv:
            e = np.zeros(n, dtype=np.int64)
            e[j] = q
            cols.append(e)
    order = piv + [j for j in range(n) if j not in piv]
    B = np.column_stack(cols)
    # put each generator next to its leading coordinate so B is triangular up to a permutation
    return B[:, np.argsort(order)], len(piv)


class Lattice:
    """Lattice generated by the columns of ``basis``.

    ``kind`` records provenance: "integer", "scaled", "construction_a",
    "nested" or "basis". ``meta`` holds the builder parameters.
    """

    def __init__(self, basis, kind: str = "basis", meta: dict | None = None,
                 exact_cvp_dim: int = EXACT_CVP_DIM):
        B = np.array(basis, dtype=np.float64)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise DimensionError(f"basis must be square, got {B.shape}")
        if not np.all(np.isfinite(B)):
            raise ParameterError("basis has non-finite entries")
        n = B.shape[0]
        sign, logdet = np.linalg.slogdet(B)
        col_scale = float(np.max(np.linalg.norm(B, axis=0)))
        if sign == 0 or logdet <= math.log(1e-12) + n * math.log(col_scale):
            raise ParameterError("basis is singular")
        Q, R = np.linalg.qr(B)
        d = np.sign(np.diag(R))
        d[d == 0] = 1.0
        Q, R = Q * d, R * d[:, None]
        for a in (B, Q, R):
            a.setflags(write=False)
        self.basis = B
        self.n = n
        self.kind = kind
        self.meta = dict(meta or {})
        self.log_covolume = float(logdet)
        self.covolume = math.exp(logdet) if logdet > -700 else 0.0
        self.inv = np.linalg.inv(B)
        self.inv.setflags(write=False)
        self._Q, self._R = Q, R
        self.exact_cvp_dim = int(exact_cvp_dim)

    # constructors
    @classmethod
    def integer(cls, n: int) -> "Lattice":
        return cls(np.eye(n), "integer", {"scale": 1.0})

    @classmethod
    def scaled(cls, n: int, a: float) -> "Lattice":
        if a <= 0:
            raise ParameterError("scale must be positive")
        return cls(a * np.eye(n), "scaled", {"scale": float(a)})

    @property
    def zn_scale(self) -> float | None:
        """Spacing a when the lattice is aZ^n, else None."""
        if self.kind in ("integer", "scaled"):
            return float(self.meta["scale"])
        return None

    def scaled_by(self, c: float) -> "Lattice":
        """The lattice cΛ with provenance kept where it is closed under scaling."""
        if c <= 0:
            raise ParameterError("scale must be positive")
        meta = dict(self.meta)
        kind = self.kind
        if kind in ("integer", "scaled"):
            return Lattice.scaled(self.n, c * meta["scale"])
        if kind == "construction_a":
            meta["scale"] = c * meta["scale"]
        else:
            kind, meta = "basis", {}
        return Lattice(c * self.basis, kind, meta, self.exact_cvp_dim)

    def babai_radius(self) -> float:
        """Certified upper bound on the covering radius (half the diagonal of the Babai box)."""
        a = self.zn_scale
        if a is not None:
            return a * math.sqrt(self.n) / 2
        return 0.5 * float(np.sqrt(np.sum(np.diag(self._R) ** 2)))

    def coords(self, x) -> np.ndarray:
        """Real coordinates of x in the basis."""
        return self.inv @ as_vec(x, self.n)

    def contains(self, x, tol: float = 1e-9) -> bool:
        u = self.coords(x)
        return bool(np.all(np.abs(u - np.round(u)) <= tol * max(1.0, float(np.max(np.abs(u))))))

    def __repr__(self):
        return f"Lattice(kind={self.kind!r}, n={self.n}, covolume={self.covolume:.6g})"

    def to_dict(self) -> dict:
        return lattice_to_dict(self)


def construction_a(code: LinearCode, scale: float = 1.0) -> Lattice:
    """scale * ((1/q) * lift(C) + Z^n)."""
    if scale <= 0:
        raise ParameterError("scale must be positive")
    Bint, rank = _code_lattice_basis(code)
    B = (scale / code.q) * Bint.astype(np.float64)
    meta = {"q": code.q, "k": code.k, "G": code.G, "scale": float(scale), "rank": rank}
    return Lattice(B, "construction_a", meta)


def nested_construction_a(coarse: Lattice, code: LinearCode) -> tuple[Lattice, Lattice]:
    """Fine lattice G0 * ((1/q) lift(C) + Z^n) containing ``coarse`` with index q^rank."""
    if code.n != coarse.n:
        raise DimensionError("code length must match the coarse lattice dimension")
    Bint, rank = _code_lattice_basis(code)
    B = coarse.basis @ (Bint.astype(np.float64) / code.q)
    meta = {"q": code.q, "k": code.k, "G": code.G, "rank": rank, "coarse": coarse}
    return Lattice(B, "nested", meta, coarse.exact_cvp_dim), coarse


# enumeration core

def _gauss_estimate(L: Lattice, radius: float) -> float:
    if radius <= 0:
        return 1.0
    lg = log_ball_volume(L.n) + L.n * math.log(radius) - L.log_covolume
    return math.exp(min(lg, 700.0))


ENUM_CHUNK = 1 << 10


def _enum_coeffs(L: Lattice, center: np.ndarray, r2: float, budget: int,
                 extra: tuple | None = None) -> np.ndarray:
    """All integer u with ||B u - center||^2 <= r2, ordered lexicographically on (u_{n-1}, ..., u_0).

    ``extra = (center2, r2_2)`` adds a second ball constraint, pruned the same way.
    The search tree is walked depth first over blocks of at most ENUM_CHUNK
    nodes, each level expanded with array operations.
    """
    n = L.n
    R = L._R
    diag = np.diag(R)
    balls = [(L._Q.T @ center, r2)]
    if extra is not None:
        balls.append((L._Q.T @ extra[0], extra[1]))
    out: list[np.ndarray] = []
    count = 0
    nodes = 0
    node_cap = 50 * budget + 10**5
    # stack entries: (level, coords of levels above, partial squared distance per ball)
    stack = [(n - 1, np.zeros((1, 0), dtype=np.int64), [np.zeros(1) for _ in balls])]
    while stack:
        i, U, parts = stack.pop()
        lo = np.full(U.shape[0], -np.inf)
        hi = np.full(U.shape[0], np.inf)
        cs = []
        for (y, rr), part in zip(balls, parts):
            c = (y[i] - U @ R[i, i + 1:]) / diag[i]
            w = np.sqrt(np.maximum(rr - part, 0.0)) / diag[i]
            lo = np.maximum(lo, np.ceil(c - w))
            hi = np.minimum(hi, np.floor(c + w))
            cs.append(c)
        cnt = np.maximum(hi - lo + 1, 0).astype(np.int64)
        total = int(cnt.sum())
        if total == 0:
            continue
        rep = np.repeat(np.arange(U.shape[0]), cnt)
        start = np.cumsum(cnt) - cnt
        vals = lo.astype(np.int64)[rep] + (np.arange(total) - start[rep])
        block = np.empty((total, U.shape[1] + 1), dtype=np.int64)
        block[:, 0] = vals
        block[:, 1:] = U[rep]
        if i == 0:
            out.append(block)
            count += total
            if count > budget:
                raise CapacityError(f"ball enumeration exceeded budget {budget}", estimate=count,
                                    found_points=True)
            continue
        nodes += total
        if nodes > node_cap:
            raise CapacityError(f"enumeration tree exceeded {node_cap} nodes", estimate=nodes)
        new_parts = [part[rep] + (diag[i] * (vals - c[rep])) ** 2 for part, c in zip(parts, cs)]
        keep = np.ones(total, dtype=bool)
        for p_, (_, rr) in zip(new_parts, balls):
            keep &= p_ <= rr
        block = block[keep]
        new_parts = [p_[keep] for p_ in new_parts]
        for a in range((block.shape[0] - 1) // ENUM_CHUNK * ENUM_CHUNK, -1, -ENUM_CHUNK):
            stack.append((i - 1, block[a:a + ENUM_CHUNK], [p_[a:a + ENUM_CHUNK] for p_ in new_parts]))
    if not out:
        return np.zeros((0, n), dtype=np.int64)
    return np.concatenate(out, axis=0)


def _tol(L: Lattice, r2: float) -> float:
    return 1e-9 * (r2 + math.exp(2.0 * L.log_covolume / L.n))


def enumerate_in_ball(L: Lattice, center, radius: float, budget: int = ENUM_BUDGET) -> np.ndarray:
    """Every lattice point v with ||v - center|| <= radius (rows, enumeration order).

    Boundary points are included up to a relative tolerance of 1e-9.
    """
    c = as_vec(center, L.n)
    if radius < 0:
        raise ParameterError("radius must be nonnegative")
    est = _gauss_estimate(L, radius)
    if est > budget:
        raise CapacityError(f"expected about {est:.3g} lattice points, budget {budget}", estimate=est)
    r2 = radius * radius
    tol = _tol(L, r2)
    U = _enum_coeffs(L, c, r2 + tol, budget)
    pts = U @ L.basis.T
    d2 = np.sum((pts - c) ** 2, axis=1)
    return pts[d2 <= r2 + tol]


def enumerate_in_lens(L: Lattice, c1, r1: float, c2, r2: float, budget: int = ENUM_BUDGET) -> np.ndarray:
    """Lattice points in B(c1, r1) ∩ B(c2, r2), pruning on both balls at once.

    No volume pre-check is made, since the lens can be far smaller than
    either ball; the point and node caps still apply.
    """
    c1, c2 = as_vec(c1, L.n), as_vec(c2, L.n)
    if r1 < 0 or r2 < 0:
        raise ParameterError("radii must be nonnegative")
    if float(np.linalg.norm(c1 - c2)) > r1 + r2:
        return np.zeros((0, L.n))
    q1, q2 = r1 * r1 + _tol(L, r1 * r1), r2 * r2 + _tol(L, r2 * r2)
    U = _enum_coeffs(L, c1, q1, budget, extra=(c2, q2))
    pts = U @ L.basis.T
    keep = (np.sum((pts - c1) ** 2, axis=1) <= q1) & (np.sum((pts - c2) ** 2, axis=1) <= q2)
    return pts[keep]


def enumerate_coeffs_in_ball(L: Lattice, center, radius: float, budget: int = ENUM_BUDGET) -> np.ndarray:
    """Integer coordinates of the points returned by :func:`enumerate_in_ball`."""
    c = as_vec(center, L.n)
    est = _gauss_estimate(L, radius)
    if est > budget:
        raise CapacityError(f"expected about {est:.3g} lattice points, budget {budget}", estimate=est)
    r2 = radius * radius
    tol = _tol(L, r2)
    U = _enum_coeffs(L, c, r2 + tol, budget)
    d2 = np.sum((U @ L.basis.T - c) ** 2, axis=1)
    return U[d2 <= r2 + tol]


# closest-point search

@dataclass(frozen=True)
class QuantizeResult:
    point: np.ndarray
    approximate: bool


def _round_half_up(t):
    return np.floor(t + 0.5)


def babai(L: Lattice, x) -> np.ndarray:
    """Nearest-plane approximation of the closest lattice point."""
    x = as_vec(x, L.n)
    a = L.zn_scale
    if a is not None:
        return a * _round_half_up(x / a)
    y = L._Q.T @ x
    R = L._R
    u = np.zeros(L.n)
    for i in range(L.n - 1, -1, -1):
        u[i] = _round_half_up((y[i] - R[i, i + 1:] @ u[i + 1:]) / R[i, i])
    return L.basis @ u


def quantize_flagged(L: Lattice, x) -> QuantizeResult:
    """Closest lattice point; ``approximate`` is set when Babai was used instead of exact search.

    Scaled Z^n rounds each coordinate half-up. Other lattices up to
    ``exact_cvp_dim`` are solved exactly by enumerating the ball whose radius
    is the Babai distance; ties go to the first point in enumeration order.
    """
    x = as_vec(x, L.n)
    b = babai(L, x)
    if L.zn_scale is not None:
        return QuantizeResult(b, False)
    if L.n > L.exact_cvp_dim:
        return QuantizeResult(b, True)
    d2 = float(np.sum((b - x) ** 2))
    U = _enum_coeffs(L, x, d2 * (1 + 1e-9) + _tol(L, d2), ENUM_BUDGET)
    pts = U @ L.basis.T
    dist = np.sum((pts - x) ** 2, axis=1)
    dmin = float(dist.min())
    idx = int(np.nonzero(dist <= dmin * (1 + 1e-12) + 1e-300)[0][0])
    return QuantizeResult(pts[idx], False)


def quantize(L: Lattice, x) -> np.ndarray:
    return quantize_flagged(L, x).point


def quantize_many(L: Lattice, X: np.ndarray) -> np.ndarray:
    """Row-wise quantize; vectorized for scaled Z^n."""
    X = np.asarray(X, dtype=np.float64)
    a = L.zn_scale
    if a is not None:
        return a * _round_half_up(X / a)
    return np.array([quantize(L, x) for x in X])


def mod_lattice(L: Lattice, x) -> np.ndarray:
    """Quantization error x - Q(x), a point of the Voronoi region."""
    x = as_vec(x, L.n)
    return x - quantize(L, x)


# radii and counting

@dataclass(frozen=True)
class LatticeRadii:
    r_eff: float
    r_pack: float | None
    r_pack_exact: bool
    r_cov: float
    r_cov_estimated: bool
    r_cov_budget: int
    omega: float
    tau: float


def effective_radius(L: Lattice) -> float:
    return math.exp((L.log_covolume - log_ball_volume(L.n)) / L.n)


def packing_radius(L: Lattice) -> float:
    """Half the minimum distance, by exact shortest-vector enumeration."""
    if L.zn_scale is not None:
        return L.zn_scale / 2
    if L.n > L.exact_cvp_dim:
        raise ParameterError("exact packing radius only available up to exact_cvp_dim")
    r = float(np.min(np.linalg.norm(L.basis, axis=0)))
    pts = enumerate_in_ball(L, np.zeros(L.n), r)
    norms = np.linalg.norm(pts, axis=1)
    return float(norms[norms > 1e-9 * r].min()) / 2


def radii(L: Lattice, sample_budget: int = 10**4, seed: int = 0, analytic: bool = True) -> LatticeRadii:
    """Effective, packing and covering radii.

    r_cov is exact (a*sqrt(n)/2) for scaled Z^n when ``analytic``; otherwise
    it is the largest quantization error over ``sample_budget`` uniform points
    of the fundamental parallelepiped, a lower-bound estimate.
    """
    n = L.n
    r_eff = effective_radius(L)
    if L.zn_scale is not None or n <= L.exact_cvp_dim:
        r_pack, pack_exact = packing_radius(L), True
    else:
        r_pack, pack_exact = None, False
    if analytic and L.zn_scale is not None:
        r_cov, estimated = L.babai_radius(), False
    else:
        gen = SeededRng(seed, 0x72).gen
        U = gen.random((sample_budget, n))
        X = U @ L.basis.T
        if L.zn_scale is not None:
            E = X - quantize_many(L, X)
        else:
            E = np.array([mod_lattice(L, x) for x in X])
        r_cov, estimated = float(np.max(np.linalg.norm(E, axis=1))), True
    return LatticeRadii(r_eff, r_pack, pack_exact, r_cov, estimated, int(sample_budget),
                        r_cov**2 / n, r_eff**2 / n)


@dataclass(frozen=True)
class CountBounds:
    lower: float
    upper: float
    r_cov: float
    certified: bool


def count_bounds(L: Lattice, ball_center, radius: float, r_cov: float | None = None) -> CountBounds:
    """Volume sandwich for |Λ ∩ B(center, radius)|.

    Without an explicit ``r_cov`` the certified Babai-box bound is used, so
    the sandwich is rigorous. A supplied estimate is flagged uncertified.
    """
    as_vec(ball_center, L.n)
    if radius < 0:
        raise ParameterError("radius must be nonnegative")
    certified = r_cov is None
    rc = L.babai_radius() if r_cov is None else float(r_cov)
    n = L.n
    lv = log_ball_volume(n) - L.log_covolume
    lo_r = max(radius - rc, 0.0)
    lower = math.exp(lv + n * math.log(lo_r)) if lo_r > 0 else 0.0
    upper = math.exp(lv + n * math.log(radius + rc)) if radius + rc > 0 else 0.0
    return CountBounds(lower, upper, rc, certified)


def nld(L: Lattice) -> float:
    """Normalized logarithmic density (1/n) log2(1/covolume)."""
    return -L.log_covolume / (math.log(2.0) * L.n)


# serialization

def lattice_to_dict(L: Lattice) -> dict:
    m = L.meta
    if L.kind == "integer":
        return {"kind": "integer", "n": L.n}
    if L.kind == "scaled":
        return {"kind": "scaled", "n": L.n, "scale": m["scale"]}
    if L.kind == "construction_a":
        return {"kind": "construction_a", "n": L.n, "q": m["q"], "k": m["k"],
                "G": np.asarray(m["G"]).tolist(), "scale": m["scale"]}
    if L.kind == "nested":
        return {"kind": "nested", "n": L.n, "q": m["q"], "k": m["k"],
                "G": np.asarray(m["G"]).tolist(), "coarse": lattice_to_dict(m["coarse"])}
    return {"kind": "basis", "matrix": L.basis.tolist()}


def lattice_from_dict(d: dict) -> Lattice:
    kind = d.get("kind")
    try:
        if kind == "integer":
            return Lattice.integer(int(d["n"]))
        if kind == "scaled":
            return Lattice.scaled(int(d["n"]), float(d["scale"]))
        if kind in ("construction_a", "nested"):
            n, k = int(d["n"]), int(d["k"])
            G = np.asarray(d["G"], dtype=np.int64).reshape(n, k)
            code = LinearCode(int(d["q"]), G)
            if kind == "construction_a":
                return construction_a(code, float(d["scale"]))
            return nested_construction_a(lattice_from_dict(d["coarse"]), code)[0]
        if kind == "basis":
            return Lattice(np.asarray(d["matrix"], dtype=np.float64))
    except KeyError as e:
        raise StructureError(f"lattice description missing field {e}") from None
    raise StructureError(f"unknown lattice kind {kind!r}")


ZN_TABLE_LIMIT = 2 * 10**7


@lru_cache(maxsize=16)
def _zn_shell_table(n: int, M: int) -> np.ndarray:
    """T[j, s] proportional to #{k in Z^j : ||k||^2 <= s}, each row scaled to max 1."""
    T = np.zeros((n + 1, M + 1))
    T[0, :] = 1.0
    ks = np.arange(-math.isqrt(M), math.isqrt(M) + 1)
    sq = ks * ks
    for j in range(1, n + 1):
        row = np.zeros(M + 1)
        for q in sq:
            row[q:] += T[j - 1, : M + 1 - q]
        T[j] = row / row.max()
    T.setflags(write=False)
    return T


def _sample_zn_ball(n: int, M: int, gen, count: int) -> np.ndarray:
    """Exactly uniform integer vectors with ||k||^2 <= M, one coordinate at a time."""
    T = _zn_shell_table(n, M)
    out = np.zeros((count, n))
    for c in range(count):
        left = M
        for i in range(n):
            r = math.isqrt(left)
            ks = np.arange(-r, r + 1)
            w = T[n - 1 - i, left - ks * ks]
            k = int(ks[np.searchsorted(np.cumsum(w), gen.random() * w.sum(), side="right")])
            out[c, i] = k
            left -= k * k
    return out


def sample_ball_points(L: Lattice, radius: float, rng, count: int, batch: int = 4096,
                       max_draws: int = 10**8) -> np.ndarray:
    """Exactly uniform draws from Λ ∩ B(0, radius), with replacement.

    A uniform point of B(0, radius + rho) is mapped to its Babai point and kept
    when that point lies in the target ball; every Babai cell has volume
    covol(Λ) and sits inside the enlarged ball, so acceptance is uniform.
    Scaled Z^n with a modest squared radius (in lattice units) is sampled
    directly from shell counts instead, which is exact and never rejects.
    """
    gen = as_generator(rng)
    a = L.zn_scale
    if a is not None:
        M = math.floor((radius / a) ** 2 * (1 + 1e-12))
        if L.n * (M + 1) <= ZN_TABLE_LIMIT and M <= 10**4:
            return a * _sample_zn_ball(L.n, M, gen, count)
    rho = L.babai_radius()
    R = radius + rho
    n = L.n
    out = []
    got = 0
    draws = 0
    r2 = radius * radius * (1 + 1e-12)
    # volume ratio, a rough acceptance rate used only to size batches
    acc = max((radius / R) ** n, 1e-6) if R > 0 else 1.0
    while got < count:
        if draws > max_draws:
            raise CapacityError("rejection sampler acceptance too low", estimate=draws)
        m = int(min(batch, math.ceil(1.2 * (count - got) / acc) + 4))
        g = gen.standard_normal((m, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        X = g * (R * gen.random(m) ** (1.0 / n))[:, None]
        if L.zn_scale is not None:
            V = quantize_many(L, X)
        else:
            V = np.array([babai(L, x) for x in X])
        keep = V[np.sum(V * V, axis=1) <= r2]
        out.append(keep)
        got += keep.shape[0]
        draws += m
    return np.concatenate(out, axis=0)[:count]

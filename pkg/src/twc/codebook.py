"""Finite codebooks carved from lattices: ball and Voronoi shaping, expurgation, indexing."""

from __future__ import annotations

import math

import numpy as np

from .errors import CapacityError, CodeIndexError, DegenerateError, ParameterError, StructureError
from .lattice import (
    ENUM_BUDGET,
    Lattice,
    count_bounds,
    enumerate_in_ball,
    lattice_from_dict,
    lattice_to_dict,
    mod_lattice,
    sample_ball_points,
)
from .linalg import SeededRng, as_generator, as_vec, log_ball_volume

def lex_sort(X: np.ndarray) -> np.ndarray:
    """Rows sorted lexicographically, first coordinate most significant."""
    if X.shape[0] == 0:
        return X
    return X[np.lexsort(X.T[::-1])]


class FiniteCode:
    """Explicit list of distinct codewords with 0-based message indices."""

    def __init__(self, codewords, sort: bool = True):
        X = np.array(codewords, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[0] == 0:
            raise DegenerateError("code has no codewords")
        if sort:
            X = lex_sort(X)
        X.setflags(write=False)
        self.codewords = X
        self._index: dict | None = None

    @property
    def n(self) -> int:
        return self.codewords.shape[1]

    @property
    def size(self) -> int:
        return self.codewords.shape[0]

    def __len__(self):
        return self.size

    @property
    def rate(self) -> float:
        return math.log2(self.size) / self.n

    def max_power(self) -> float:
        """Largest per-symbol power ||x||^2 / n."""
        return float(np.max(np.sum(self.codewords**2, axis=1))) / self.n

    def _key(self, x: np.ndarray):
        return tuple(np.round(x, 9).tolist())

    def _build_index(self):
        self._index = {self._key(x): i for i, x in enumerate(self.codewords)}

    def index_of(self, x) -> int:
        """Message index of codeword x, or -1 when x is not a codeword."""
        if self._index is None:
            self._build_index()
        return self._index.get(self._key(as_vec(x, self.n)), -1)

    def encode(self, m: int) -> np.ndarray:
        return encode(self, m)

    def sample_index(self, rng) -> int:
        return int(as_generator(rng).integers(self.size))


class LatticeCode(FiniteCode):
    """Λ ∩ B(0, sqrt(nP)) (shaping "ball") or Λ ∩ V(coarse) (shaping "voronoi")."""

    def __init__(self, lattice: Lattice, shaping: str, codewords, P: float | None = None,
                 coarse: Lattice | None = None):
        super().__init__(codewords)
        self.lattice = lattice
        self.shaping = shaping
        self.P = P
        self.coarse = coarse

    def _key(self, x):
        return tuple(np.round(self.lattice.inv @ x).astype(np.int64).tolist())

    def index_of(self, x) -> int:
        x = as_vec(x, self.n)
        if not self.lattice.contains(x):
            return -1
        return super().index_of(x)


class ExpurgatedCode(FiniteCode):
    """Codewords of ``base`` surviving an independent keep-coin per index."""

    def __init__(self, base: FiniteCode, gamma: float, seed: int, keep_mask: np.ndarray):
        mask = np.asarray(keep_mask, dtype=bool)
        if not mask.any():
            raise DegenerateError("expurgation removed every codeword")
        super().__init__(base.codewords[mask], sort=False)
        mask.setflags(write=False)
        self.base = base
        self.gamma = float(gamma)
        self.seed = int(seed)
        self.keep_mask = mask
        self.P = getattr(base, "P", None)

    @property
    def lattice(self):
        return getattr(self.base, "lattice", None)

    def _key(self, x):
        return self.base._key(x)


class ImplicitBallCode:
    """Λ ∩ B(0, sqrt(nP)) known only through uniform sampling.

    Used when the codebook is far too large to list (n in the hundreds).
    """

    def __init__(self, lattice: Lattice, P: float):
        if P <= 0:
            raise ParameterError("P must be positive")
        self.lattice = lattice
        self.P = float(P)
        self.shaping = "ball"

    @property
    def n(self) -> int:
        return self.lattice.n

    def size_bounds(self) -> tuple[float, float]:
        cb = count_bounds(self.lattice, np.zeros(self.n), math.sqrt(self.n * self.P))
        return cb.lower, cb.upper

    def rate_bounds(self) -> tuple[float, float]:
        lo, hi = self.size_bounds()
        f = lambda v: math.log2(v) / self.n if v > 0 else float("-inf")
        return f(lo), f(hi)

    def sample(self, rng, count: int = 1) -> np.ndarray:
        X = sample_ball_points(self.lattice, math.sqrt(self.n * self.P), rng, count)
        return X

    def subsample(self, size: int, seed: int = 0) -> "FiniteCode":
        """A FiniteCode of ``size`` distinct uniform codewords."""
        rng = SeededRng(seed, 0x5B)
        seen: dict = {}
        while len(seen) < size:
            for x in self.sample(rng, size):
                seen.setdefault(tuple(x.tolist()), x)
                if len(seen) == size:
                    break
        code = FiniteCode(np.array(list(seen.values())))
        code.P = self.P
        code.lattice = self.lattice
        return code


def build_ball_code(L: Lattice, P: float, budget: int = ENUM_BUDGET) -> LatticeCode:
    """Λ ∩ B(0, sqrt(nP)), complete and sorted."""
    if P <= 0:
        raise ParameterError("P must be positive")
    R = math.sqrt(L.n * P)
    pts = enumerate_in_ball(L, np.zeros(L.n), R, budget)
    if pts.shape[0] == 0:
        raise DegenerateError("no lattice point within the power ball")
    return LatticeCode(L, "ball", pts, P=P)


def _hnf_diagonal(M: np.ndarray) -> np.ndarray:
    """Upper-triangular column Hermite form H = M U of a nonsingular integer matrix."""
    H = np.array(M, dtype=object)
    n = H.shape[0]
    for i in range(n - 1, -1, -1):
        # gcd-reduce row i over columns 0..i so only column i keeps a nonzero entry
        for j in range(i):
            while H[i, j] != 0:
                qt = H[i, i] // H[i, j]
                H[:, i] = H[:, i] - qt * H[:, j]
                H[:, [i, j]] = H[:, [j, i]]
        if H[i, i] < 0:
            H[:, i] = -H[:, i]
    return H


def _coset_reps(M: np.ndarray) -> np.ndarray:
    """Representatives of Z^n / M Z^n for integer nonsingular M."""
    H = _hnf_diagonal(M)
    d = [int(H[i, i]) for i in range(H.shape[0])]
    grids = np.meshgrid(*[np.arange(v) for v in d], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def is_nested(fine: Lattice, coarse: Lattice, tol: float = 1e-7) -> bool:
    if fine.n != coarse.n:
        return False
    M = fine.inv @ coarse.basis
    return bool(np.all(np.abs(M - np.round(M)) <= tol * max(1.0, float(np.max(np.abs(M))))))


def build_voronoi_code(fine: Lattice, coarse: Lattice, budget: int = ENUM_BUDGET) -> LatticeCode:
    """Λ_f ∩ V(Λ_c): one fine point per coset, reduced into the coarse Voronoi region."""
    if not is_nested(fine, coarse):
        raise StructureError("coarse lattice is not a sublattice of the fine lattice")
    M = np.round(fine.inv @ coarse.basis).astype(np.int64)
    index = int(round(coarse.covolume / fine.covolume))
    if index > budget:
        raise CapacityError(f"nesting index {index} exceeds budget {budget}", estimate=index)
    U = _coset_reps(M)
    reps = U @ fine.basis.T
    pts = np.array([mod_lattice(coarse, x) for x in reps])
    code = LatticeCode(fine, "voronoi", pts, coarse=coarse)
    if code.size != index:
        raise StructureError(f"found {code.size} cosets, expected {index}")
    return code


def expurgation_mask(size: int, gamma: float, n: int, seed: int) -> np.ndarray:
    """Independent keep-coins with probability 2^(-gamma n), one per index."""
    if gamma < 0:
        raise ParameterError("gamma must be nonnegative")
    p = 2.0 ** (-gamma * n)
    gen = SeededRng(seed, 0xE4).gen
    return gen.random(size) < p


def expurgate(code: FiniteCode, gamma: float, seed: int) -> ExpurgatedCode:
    mask = expurgation_mask(code.size, gamma, code.n, seed)
    return ExpurgatedCode(code, gamma, seed, mask)


def encode(code: FiniteCode, m: int) -> np.ndarray:
    if not 0 <= int(m) < code.size:
        raise CodeIndexError(f"message {m} outside [0, {code.size})")
    return np.array(code.codewords[int(m)])


def index_of(code: FiniteCode, x) -> int:
    return code.index_of(x)


def scale_for_rate(base: Lattice, P: float, rate: float, budget: int = ENUM_BUDGET) -> tuple[float, LatticeCode]:
    """Largest c so that (cΛ) ∩ B(0, sqrt(nP)) has at least 2^(n*rate) points.

    With k = ceil(2^(n*rate)), c = sqrt(nP) / r_k where r_k is the k-th
    smallest norm in Λ. A ball around the origin is grown from the volume
    estimate until it holds k points, then the norms are sorted.
    """
    if P <= 0:
        raise ParameterError("P must be positive")
    n = base.n
    k = math.ceil(2.0 ** (n * rate) - 1e-9)
    R = math.sqrt(n * P)
    rho = math.exp((math.log(k) + base.log_covolume - log_ball_volume(n)) / n)
    while True:
        pts = enumerate_in_ball(base, np.zeros(n), rho, budget)
        if pts.shape[0] >= k:
            break
        rho *= 1.05
    r_k = float(np.sort(np.sqrt(np.sum(pts * pts, axis=1)))[k - 1])
    if r_k == 0.0:
        return math.inf, LatticeCode(base, "ball", np.zeros((1, n)), P=P)
    # back off slightly so boundary points sit strictly inside the ball
    c = R / r_k * (1 - 1e-8)
    code = build_ball_code(base.scaled_by(c), P, budget)
    if code.size < k:
        raise DegenerateError("rate target not reached")
    return c, code


def code_to_dict(code) -> dict:
    """Re-derivable description; codewords are never stored."""
    if isinstance(code, ExpurgatedCode):
        d = code_to_dict(code.base)
        d.update(gamma=code.gamma, seed=code.seed)
        return d
    if isinstance(code, ImplicitBallCode):
        return {"lattice": lattice_to_dict(code.lattice), "shaping": "ball", "n": code.n, "P": code.P}
    if isinstance(code, LatticeCode):
        d = {"lattice": lattice_to_dict(code.lattice), "shaping": code.shaping, "n": code.n}
        if code.shaping == "ball":
            d["P"] = code.P
        else:
            d["coarse"] = lattice_to_dict(code.coarse)
        return d
    raise StructureError("only lattice-derived codes are serializable")


def code_from_dict(d: dict, budget: int = ENUM_BUDGET):
    """Inverse of :func:`code_to_dict`.

    Extra keys: ``subsample`` (size, with ``subsample_seed``) draws that many
    distinct uniform codewords; ``implicit: true`` returns an ImplicitBallCode.
    """
    L = lattice_from_dict(d["lattice"])
    shaping = d.get("shaping", "ball")
    if shaping == "ball":
        P = float(d["P"])
        if d.get("implicit") or d.get("subsample"):
            imp = ImplicitBallCode(L, P)
            if d.get("subsample"):
                code = imp.subsample(int(d["subsample"]), int(d.get("subsample_seed", 0)))
            else:
                return imp
        else:
            code = build_ball_code(L, P, budget)
    elif shaping == "voronoi":
        code = build_voronoi_code(L, lattice_from_dict(d["coarse"]), budget)
    else:
        raise StructureError(f"unknown shaping {shaping!r}")
    if "gamma" in d and float(d["gamma"]) > 0:
        code = expurgate(code, float(d["gamma"]), int(d.get("seed", 0)))
    return code

"""Real-vector primitives and seeded random streams."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateError, DimensionError, ParameterError

REL_TOL = 1e-9

ROLE_CODES = {"messageA": 1, "messageB": 2, "attack": 3, "decoder": 4}


def as_vec(x, n: int | None = None) -> np.ndarray:
    """Coerce to a finite 1-D float64 array, optionally checking its length."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionError(f"expected length {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ParameterError("vector has non-finite entries")
    return v


def inner(u, v) -> float:
    """Euclidean inner product."""
    a, b = as_vec(u), as_vec(v)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(a @ b)


def norm_sq(u) -> float:
    a = as_vec(u)
    return float(a @ a)


def project_perp(s, z) -> tuple[float, np.ndarray]:
    """Split ``s = -alpha*z + s_perp`` with ``s_perp`` orthogonal to ``z``."""
    s, z = as_vec(s), as_vec(z)
    if s.shape != z.shape:
        raise DimensionError(f"length mismatch: {s.shape[0]} vs {z.shape[0]}")
    zz = float(z @ z)
    if zz == 0.0:
        raise DegenerateError("cannot project against the zero vector")
    alpha = -float(s @ z) / zz
    return alpha, s + alpha * z


class SeededRng:
    """Counter-based random stream keyed by ``(root_seed, stream_id)``.

    ``stream_id`` may be an int or a tuple of ints; equal keys give equal
    sequences and distinct keys give independent streams (Philox over a
    spawned ``SeedSequence``).
    """

    def __init__(self, root_seed: int, stream_id: int | tuple = 0):
        root_seed = int(root_seed)
        if not 0 <= root_seed < 2**64:
            raise ParameterError("root_seed must fit in 64 unsigned bits")
        key = tuple(int(k) for k in stream_id) if isinstance(stream_id, (tuple, list)) else (int(stream_id),)
        if any(k < 0 for k in key):
            raise ParameterError("stream ids must be nonnegative")
        self.root_seed = root_seed
        self.stream_id = key
        ss = np.random.SeedSequence(root_seed, spawn_key=key)
        self.gen = np.random.Generator(np.random.Philox(ss))

    def child(self, *key: int) -> "SeededRng":
        """Independent sub-stream addressed by extending the key."""
        return SeededRng(self.root_seed, self.stream_id + tuple(key))

    def __repr__(self):
        return f"SeededRng({self.root_seed}, {self.stream_id})"


def trial_stream(root_seed: int, trial_index: int, role: str) -> SeededRng:
    """Stream for one role of one trial."""
    try:
        code = ROLE_CODES[role]
    except KeyError:
        raise ParameterError(f"unknown role {role!r}") from None
    return SeededRng(root_seed, (int(trial_index), code))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.gen
    if isinstance(rng, np.random.Generator):
        return rng
    raise ParameterError(f"expected SeededRng or numpy Generator, got {type(rng).__name__}")


def sample_gaussian(n: int, variance: float, rng) -> np.ndarray:
    """i.i.d. N(0, variance) vector of length n."""
    if variance < 0:
        raise ParameterError(f"variance must be >= 0, got {variance}")
    if n < 1:
        raise ParameterError("n must be positive")
    g = as_generator(rng).standard_normal(n)
    return g * np.sqrt(variance)


def uniform_ball(n: int, radius: float, rng, size: int | None = None) -> np.ndarray:
    """Uniform point(s) in the n-ball of the given radius."""
    gen = as_generator(rng)
    m = 1 if size is None else size
    g = gen.standard_normal((m, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * gen.random(m) ** (1.0 / n)
    out = g * r[:, None]
    return out[0] if size is None else out


def log_ball_volume(n: int) -> float:
    """Natural log of the unit n-ball volume."""
    from math import lgamma, log, pi

    return 0.5 * n * log(pi) - lgamma(0.5 * n + 1.0)

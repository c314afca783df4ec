"""Jamming strategies: James maps his observation z to a power-feasible vector s."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import CapacityError, ConfigError, ParameterError
from .lattice import Lattice, enumerate_in_ball
from .linalg import SeededRng, as_generator, as_vec, sample_gaussian, trial_stream


@dataclass(frozen=True)
class ChannelParams:
    """Blocklength and per-symbol power budgets.

    pA, pB are the transmit powers; nA, nB the jammer budgets toward Alice
    and toward Bob respectively.
    """

    n: int
    pA: float
    pB: float
    nA: float
    nB: float

    def __post_init__(self):
        if int(self.n) < 1:
            raise ParameterError("blocklength must be positive")
        for name in ("pA", "pB", "nA", "nB"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")

    @classmethod
    def symmetric(cls, n: int, P: float, N: float) -> "ChannelParams":
        return cls(int(n), float(P), float(P), float(N), float(N))

    @property
    def is_symmetric(self) -> bool:
        return self.pA == self.pB and self.nA == self.nB

    @property
    def P(self) -> float:
        if self.pA != self.pB:
            raise ParameterError("P is only defined for equal transmit powers")
        return self.pA

    @property
    def N(self) -> float:
        if self.nA != self.nB:
            raise ParameterError("N is only defined for equal jammer budgets")
        return self.nA

    def to_dict(self) -> dict:
        return asdict(self)


# attack descriptions

@dataclass(frozen=True)
class ScaleAndBabble:
    alpha: float
    eps: float
    center_correction: bool = False
    kind: str = field(default="scale_and_babble", init=False)

    def __post_init__(self):
        if not self.eps > 0:
            raise ParameterError("eps must be positive")


@dataclass(frozen=True)
class ZAwareSymmetrization:
    victim: str = "A"
    kind: str = field(default="z_aware_symmetrization", init=False)


@dataclass(frozen=True)
class RandomCodeword:
    victim: str = "A"
    kind: str = field(default="random_codeword", init=False)


@dataclass(frozen=True)
class GaussianBabble:
    """Gaussian noise of the given variance; None means N - 0.05 N."""

    variance: float | None = None
    kind: str = field(default="gaussian_babble", init=False)

    def __post_init__(self):
        if self.variance is not None and self.variance < 0:
            raise ParameterError("variance must be nonnegative")


@dataclass(frozen=True)
class NetSearch:
    eta_prime: float
    objective: Callable | None = None
    kind: str = field(default="net_search", init=False)


@dataclass(frozen=True)
class Silent:
    kind: str = field(default="silent", init=False)


ATTACKS = {c.__dataclass_fields__["kind"].default: c for c in
           (ScaleAndBabble, ZAwareSymmetrization, RandomCodeword, GaussianBabble, Silent)}


def attack_to_dict(spec) -> dict:
    if isinstance(spec, NetSearch):
        raise ConfigError("net search carries a decoder handle and is not serializable")
    return asdict(spec)


def attack_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in ATTACKS:
        raise ConfigError(f"unknown attack kind {kind!r}")
    cls = ATTACKS[kind]
    allowed = {k for k in cls.__dataclass_fields__ if k != "kind"}
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown keys for {kind}: {sorted(extra)}")
    return cls(**d)


# primitives

def jam_budget(params: ChannelParams, target: str = "B") -> float:
    """Per-symbol jammer power against the given receiver."""
    return params.nB if target == "B" else params.nA


def clamp_to_sphere(s_tilde: np.ndarray, radius: float) -> tuple[np.ndarray, bool]:
    """Project onto the sphere when strictly outside; equality is not truncation."""
    nrm = float(np.linalg.norm(s_tilde))
    if nrm > radius:
        return s_tilde * (radius / nrm), True
    return s_tilde, False


def babble_variance(params: ChannelParams, alpha: float, eps: float, target: str = "B") -> float:
    """gamma^2 = N - alpha^2 (P_A + P_B)(1 + 2 eps); N - 2 alpha^2 P (1 + 2 eps) when symmetric."""
    return jam_budget(params, target) - alpha * alpha * (params.pA + params.pB) * (1 + 2 * eps)


def scale_and_babble(z, params: ChannelParams, alpha: float, eps: float, rng,
                     target: str = "B") -> tuple[np.ndarray, bool]:
    """s~ = -alpha z + g, g ~ N(0, gamma^2 I), clamped to radius sqrt(nN)."""
    z = as_vec(z, params.n)
    g2 = babble_variance(params, alpha, eps, target)
    if g2 < 0:
        raise ParameterError(f"infeasible parameters: gamma^2 = {g2:.6g} < 0")
    g = sample_gaussian(params.n, g2, rng)
    return clamp_to_sphere(-alpha * z + g, math.sqrt(params.n * jam_budget(params, target)))


def scale_and_babble_centered(z, params: ChannelParams, alpha: float, eps: float, meanA, meanB,
                              rng, target: str = "B") -> tuple[np.ndarray, bool]:
    """Scale-and-babble applied to z - a - b for codebooks with means a and b."""
    z = as_vec(z, params.n)
    zc = z - as_vec(meanA, params.n) - as_vec(meanB, params.n)
    return scale_and_babble(zc, params, alpha, eps, rng, target)


def z_aware_symmetrization(z, victim_code, params: ChannelParams, rng,
                           target: str = "B") -> tuple[np.ndarray, bool, int]:
    """s~ = -(z - x')/2 with x' a uniform codeword of the victim, clamped."""
    z = as_vec(z, params.n)
    j = victim_code.sample_index(rng)
    x_spoof = victim_code.codewords[j]
    s, trunc = clamp_to_sphere(-0.5 * (z - x_spoof), math.sqrt(params.n * jam_budget(params, target)))
    return s, trunc, j


def random_codeword_attack(victim_code, params: ChannelParams, rng, target: str = "B") -> np.ndarray:
    """A uniform codeword of the victim, independent of z."""
    j = victim_code.sample_index(rng)
    s, _ = clamp_to_sphere(np.array(victim_code.codewords[j]), math.sqrt(params.n * jam_budget(params, target)))
    return s


def gaussian_babble(params: ChannelParams, rng, delta: float | None = None,
                    target: str = "B") -> np.ndarray:
    """N(0, (N - delta) I) clamped to the power sphere; delta defaults to 0.05 N."""
    N = jam_budget(params, target)
    d = 0.05 * N if delta is None else float(delta)
    if not 0 <= d <= N:
        raise ParameterError("delta must lie in [0, N]")
    s, _ = clamp_to_sphere(sample_gaussian(params.n, N - d, rng), math.sqrt(params.n * N))
    return s


# exhaustive net search

@dataclass(frozen=True)
class NetSearchResult:
    s: np.ndarray
    error: bool
    margin: float
    net_size: int


def jamming_net(n: int, N: float, eta_prime: float, budget: int = 10**6) -> np.ndarray:
    """A sqrt(n eta')-net of the ball B(0, sqrt(nN)).

    Points of aZ^n (a = 2 sqrt(eta')) within sqrt(nN) + sqrt(n eta') of the
    origin, with those outside the ball projected onto its surface. Projection
    onto a convex set is non-expansive, so the covering radius is kept.
    """
    if not eta_prime > 0:
        raise ParameterError("eta_prime must be positive")
    est = (math.sqrt(N / eta_prime) + 1) ** n
    if est > budget:
        raise CapacityError(f"net of about {est:.3g} points exceeds budget {budget}", estimate=est)
    a = 2 * math.sqrt(eta_prime)
    R = math.sqrt(n * N)
    pts = enumerate_in_ball(Lattice.scaled(n, a), np.zeros(n), R + math.sqrt(n * eta_prime), budget=10 * budget)
    nrm = np.linalg.norm(pts, axis=1)
    out = np.where((nrm > R)[:, None], pts * (R / np.maximum(nrm, 1e-300))[:, None], pts)
    _, idx = np.unique(np.round(out, 12), axis=0, return_index=True)
    return out[np.sort(idx)]


def net_search_attack(z, params: ChannelParams, objective: Callable, eta_prime: float,
                      budget: int = 10**6, target: str = "B") -> NetSearchResult:
    """Search the net for a jamming vector that makes the decoder fail.

    ``objective(s)`` returns ``(error, margin)``. Among erring points the one
    with the smallest margin wins; if none errs, the global margin minimizer.
    Ties go to the earlier net point.
    """
    as_vec(z, params.n)
    net = jamming_net(params.n, jam_budget(params, target), eta_prime, budget)
    best = None
    for s in net:
        err, margin = objective(s)
        key = (not err, float(margin))
        if best is None or key < best[0]:
            best = (key, s)
    (not_err, margin), s = best
    return NetSearchResult(np.array(s), not not_err, margin, int(net.shape[0]))


# dispatch

@dataclass(frozen=True)
class AttackOutput:
    s: np.ndarray
    truncated: bool
    spoof_index: int | None = None


def apply_attack(spec, z, params: ChannelParams, rng, code_a=None, code_b=None,
                 target: str = "B") -> AttackOutput:
    """Run an attack description against observation z."""
    z = as_vec(z, params.n)
    n = params.n
    if isinstance(spec, Silent):
        return AttackOutput(np.zeros(n), False)
    if isinstance(spec, ScaleAndBabble):
        if spec.center_correction:
            ma = _code_mean(code_a, n)
            mb = _code_mean(code_b, n)
            s, t = scale_and_babble_centered(z, params, spec.alpha, spec.eps, ma, mb, rng, target)
        else:
            s, t = scale_and_babble(z, params, spec.alpha, spec.eps, rng, target)
        return AttackOutput(s, t)
    if isinstance(spec, ZAwareSymmetrization):
        code = code_a if spec.victim == "A" else code_b
        s, t, j = z_aware_symmetrization(z, code, params, rng, target)
        return AttackOutput(s, t, j)
    if isinstance(spec, RandomCodeword):
        code = code_a if spec.victim == "A" else code_b
        j = code.sample_index(rng)
        s, t = clamp_to_sphere(np.array(code.codewords[j]), math.sqrt(n * jam_budget(params, target)))
        return AttackOutput(s, t, j)
    if isinstance(spec, GaussianBabble):
        N = jam_budget(params, target)
        var = 0.95 * N if spec.variance is None else spec.variance
        s, t = clamp_to_sphere(sample_gaussian(n, var, rng), math.sqrt(n * N))
        return AttackOutput(s, t)
    if isinstance(spec, NetSearch):
        res = net_search_attack(z, params, spec.objective, spec.eta_prime, target=target)
        return AttackOutput(res.s, False)
    raise ConfigError(f"unsupported attack {spec!r}")


def _code_mean(code, n):
    if code is None or not hasattr(code, "codewords"):
        return np.zeros(n)
    return np.mean(code.codewords, axis=0)


def _draw_codeword(code, rng) -> np.ndarray:
    if hasattr(code, "codewords"):
        return np.array(code.codewords[code.sample_index(rng)])
    return code.sample(rng, 1)[0]


@dataclass(frozen=True)
class TruncationStats:
    trials: int
    truncated: int
    q_hat: float
    ci95: tuple[float, float]


def binomial_ci(k: int, m: int) -> tuple[float, float]:
    """Normal-approximation 95% interval, clipped to [0, 1]."""
    p = k / m
    h = 1.96 * math.sqrt(max(p * (1 - p), 0.0) / m)
    return max(0.0, p - h), min(1.0, p + h)


def estimate_truncation_q(strategy, code_a, code_b, params: ChannelParams, trials: int,
                          root_seed: int = 0) -> TruncationStats:
    """Fraction of trials where the attack had to be projected onto the power sphere."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    hits = 0
    for t in range(trials):
        xa = _draw_codeword(code_a, trial_stream(root_seed, t, "messageA"))
        xb = _draw_codeword(code_b, trial_stream(root_seed, t, "messageB"))
        out = apply_attack(strategy, xa + xb, params, trial_stream(root_seed, t, "attack"), code_a, code_b)
        hits += int(out.truncated)
    return TruncationStats(trials, hits, hits / trials, binomial_ci(hits, trials))

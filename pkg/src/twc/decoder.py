"""Bob's decoders: the estimation-based rule, a minimum-distance baseline and a list decoder."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .adversary import ChannelParams
from .errors import CapacityError, DimensionError, ParameterError
from .lattice import ENUM_BUDGET, enumerate_in_ball, enumerate_in_lens
from .linalg import as_vec

ALPHA_CLAMP = 1.0 - 1e-6
DECODE_BUDGET = 10**5
SCAN_LIMIT = 10**6


def strip_theta(rho: float, delta: float) -> float:
    """theta = ((rho+delta)P - rho P(1+delta)/2) / ((1-rho)P + rho P(1+delta)/2); P cancels."""
    return ((rho + delta) - rho * (1 + delta) / 2) / ((1 - rho) + rho * (1 + delta) / 2)


def strip_c2(z_norm_sq: float, n: int, P: float, rho: float, eps: float) -> float:
    """Norm deficit c_2: strip members satisfy n(P - c_2) <= ||x||^2 <= nP."""
    z = math.sqrt(z_norm_sq)
    return (P - z_norm_sq / (4 * n)) * rho + z * math.sqrt(eps) / (2 * math.sqrt(n)) - eps / 4


@dataclass(frozen=True)
class ToleranceProfile:
    """Slack constants of the error-event catalogue; theta defaults to its strip formula."""

    delta: float = 0.1
    zeta: float = 0.1
    zeta1: float = 0.1
    rho: float = 0.1
    eps_strip: float = 0.01
    theta: float | None = None
    xi: float = 0.1
    mu: float = 0.1
    nu: float = 0.1
    eta_prime: float = 0.01

    def __post_init__(self):
        if self.theta is None:
            object.__setattr__(self, "theta", strip_theta(self.rho, self.delta))
        for f in fields(self):
            v = getattr(self, f.name)
            if not 0 < v < 1:
                raise ParameterError(f"tolerance {f.name}={v} must lie in (0, 1)")
        if self.theta < self.delta:
            raise ParameterError("theta must be at least delta")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class DecodeDiagnostics:
    alpha_hat: float
    alpha_hat_raw: float
    alpha_clamped: bool
    r_dec: float
    effective_y: np.ndarray = field(repr=False)
    candidates_found: int
    candidates: tuple
    verdict: str  # "decoded" | "ambiguous" | "empty"
    index: int | None
    codeword: np.ndarray | None = field(default=None, repr=False)

    @property
    def decoded(self) -> bool:
        return self.verdict == "decoded"


def estimate_alpha_raw(yB, xB, P: float) -> float:
    yB, xB = as_vec(yB), as_vec(xB)
    if yB.shape != xB.shape:
        raise DimensionError("y and x_B lengths differ")
    if not np.any(xB):
        raise ParameterError("x_B must be nonzero")
    return 1.0 - float(yB @ xB) / (yB.shape[0] * P)


def estimate_alpha(yB, xB, P: float) -> float:
    """alpha_hat = 1 - <y_B, x_B>/(nP), clamped to +-(1 - 1e-6)."""
    a = estimate_alpha_raw(yB, xB, P)
    return min(max(a, -ALPHA_CLAMP), ALPHA_CLAMP)


def estimate_r_dec(yB, xB, alpha_hat: float, P: float | None = None) -> float:
    """r_dec = ||y_B||^2 - 2(1 - alpha_hat)<y_B, x_B>, in squared-norm units (may be negative).

    ``P`` is accepted for signature symmetry with :func:`estimate_alpha` and unused.
    """
    yB, xB = as_vec(yB), as_vec(xB)
    return float(yB @ yB) - 2.0 * (1.0 - alpha_hat) * float(yB @ xB)


def effective_received(yB, xB, alpha_hat: float) -> np.ndarray:
    """y~_B = y_B - (1 - alpha_hat) x_B."""
    return as_vec(yB) - (1.0 - alpha_hat) * as_vec(xB)


def _radius_tol(yB, xB) -> float:
    return 1e-9 * (float(yB @ yB) + float(xB @ xB))


def _ball_lattice(code):
    """(lattice, P) when the code is a subset of a lattice power ball, else None."""
    L, P = getattr(code, "lattice", None), getattr(code, "P", None)
    if L is None or P is None or getattr(code, "shaping", "ball") != "ball":
        return None
    return L, P


def _is_full_ball(code) -> bool:
    return getattr(code, "shaping", None) == "ball" and not hasattr(code, "keep_mask")


def decode_unique(codeA, yB, xB, P: float, tolerances: ToleranceProfile | None = None,
                  budget: int = DECODE_BUDGET) -> DecodeDiagnostics:
    """Accept codeword x iff ||(1 - alpha_hat) x - y~_B||^2 <= r_dec; succeed iff exactly one passes.

    With ``tolerances`` the acceptance threshold is widened to r_dec + n*mu.
    A relative slack of 1e-9 absorbs rounding at the boundary.

    Codes of at most SCAN_LIMIT words are scanned. Larger lattice ball codes
    are searched by enumerating lattice points of the acceptance ball inside
    the power ball. Implicit codes report index -1 and the decoded point in
    ``codeword``. If more than ``budget`` points of a full ball code pass, the
    verdict is "ambiguous" and ``candidates_found`` is a lower bound.
    x_B = 0 carries no information on alpha; the decoder then takes alpha_hat = 0.
    """
    yB, xB = as_vec(yB), as_vec(xB)
    n = yB.shape[0]
    raw = estimate_alpha_raw(yB, xB, P) if np.any(xB) else 0.0
    ah = min(max(raw, -ALPHA_CLAMP), ALPHA_CLAMP)
    r_dec = estimate_r_dec(yB, xB, ah, P)
    ytil = effective_received(yB, xB, ah)
    thr = max(r_dec, 0.0) + (n * tolerances.mu if tolerances is not None else 0.0)
    thr += _radius_tol(yB, xB)
    b = 1.0 - ah
    ball = _ball_lattice(codeA)
    explicit = hasattr(codeA, "codewords")
    pts = None
    if ball is not None and not (explicit and codeA.size <= SCAN_LIMIT):
        L, Pc = ball
        try:
            pts = enumerate_in_lens(L, ytil / b, math.sqrt(thr) / b, np.zeros(n), math.sqrt(n * Pc), budget)
        except CapacityError as e:
            # more than budget points of a full ball code passed: surely ambiguous
            if e.found_points and _is_full_ball(codeA):
                return DecodeDiagnostics(ah, raw, ah != raw, r_dec, ytil, int(e.estimate), (), "ambiguous", None)
            raise
        else:
            if explicit:
                idx = np.array([codeA.index_of(x) for x in pts], dtype=np.int64)
                pts, hits = pts[idx >= 0], np.sort(idx[idx >= 0])
            else:
                hits = np.full(pts.shape[0], -1, dtype=np.int64)
    if pts is None:
        X = codeA.codewords
        d2 = np.sum((b * X - ytil) ** 2, axis=1)
        hits = np.nonzero(d2 <= thr)[0]
        pts = X[hits]
    k = int(hits.size)
    verdict = "decoded" if k == 1 else ("ambiguous" if k > 1 else "empty")
    if k == 1:
        word = np.array(codeA.codewords[hits[0]]) if explicit else np.array(pts[0])
        index = int(hits[0])
    else:
        word, index = None, None
    return DecodeDiagnostics(ah, raw, ah != raw, r_dec, ytil, k, tuple(int(i) for i in hits[:16]),
                             verdict, index, word)


def decode_min_distance(codeA, yB, xB) -> int:
    """argmin ||y_B - x_B - x|| over the code; near-ties (relative 1e-9) go to the lowest index."""
    r = as_vec(yB) - as_vec(xB)
    d2 = np.sum((codeA.codewords - r) ** 2, axis=1)
    dmin = float(d2.min())
    return int(np.nonzero(d2 <= dmin + 1e-9 * max(dmin, 1e-300) + 1e-15 * float(r @ r))[0][0])


def min_distance_margin(codeA, yB, xB, true_index: int) -> tuple[bool, float]:
    """(error, margin): margin is the gap between the best wrong distance and the true one."""
    r = as_vec(yB) - as_vec(xB)
    d2 = np.sum((codeA.codewords - r) ** 2, axis=1)
    err = decode_min_distance(codeA, yB, xB) != true_index
    if codeA.size == 1:
        return err, math.inf
    others = np.delete(d2, true_index)
    return err, float(np.sqrt(others.min()) - np.sqrt(d2[true_index]))


def list_decode(code, center, radius_sq: float, budget: int = ENUM_BUDGET) -> list[int]:
    """Indices of all codewords within squared distance radius_sq of center.

    Lattice-backed codes enumerate the lattice ball and keep codebook members;
    plain finite codes are scanned directly.
    """
    if radius_sq < 0:
        raise ParameterError("radius_sq must be nonnegative")
    c = as_vec(center, code.n)
    L = getattr(code, "lattice", None)
    tol = 1e-9 * (radius_sq + float(c @ c) + 1.0)
    if L is not None and hasattr(code, "index_of"):
        try:
            pts = enumerate_in_ball(L, c, math.sqrt(radius_sq), budget)
        except CapacityError:
            if code.size > budget:
                raise
        else:
            idx = [code.index_of(p) for p in pts]
            return sorted(i for i in idx if i >= 0)
    d2 = np.sum((code.codewords - c) ** 2, axis=1)
    return [int(i) for i in np.nonzero(d2 <= radius_sq + tol)[0]]


@dataclass(frozen=True)
class EffectiveChannel:
    p_tilde: float
    n_tilde: float
    r_bar: float
    p_tilde_prime: float | None = None
    n_tilde_prime: float | None = None
    c2: float | None = None
    xi_min: float | None = None
    mu_min: float | None = None

    @property
    def naive_snr(self) -> float:
        return self.p_tilde / self.n_tilde

    @property
    def average_snr(self) -> float:
        return self.p_tilde / self.r_bar


def xi_min(P: float, alpha: float, theta: float, c2: float, zeta: float) -> float:
    """Smallest xi for which the alpha estimate is guaranteed accurate."""
    return (zeta + (1 - alpha) * (P * theta + c2)) / P


def mu_min(P: float, alpha: float, theta: float, c2: float, zeta: float) -> float:
    """Smallest mu for which the radius estimate is guaranteed accurate."""
    b = 1 - alpha
    t1 = c2 * b * b + zeta * zeta / P + 2 * b * zeta * (1 + theta) + P * b * b * theta * (3 + theta)
    t2 = b * (-c2 * c2 * b / P + 2 * c2 * b * (1 - theta) + 3 * P * b * theta + 2 * zeta * (1 + theta))
    return 2 * max(t1, t2)


def effective_channel(params: ChannelParams, alpha: float,
                      tolerances: ToleranceProfile | None = None) -> EffectiveChannel:
    """Effective AWGN channel seen by Bob after scale-and-babble with factor alpha.

    P~ = (1-alpha)^2 P_A, N~ = N_B - alpha^2 (P_A + P_B), r_bar = P~N~/(P~+N~).
    With tolerances (symmetric powers only) the robust pair P~', N~' is added,
    using c_2 at the typical ||z||^2 = 2nP.
    """
    pt = (1 - alpha) ** 2 * params.pA
    nt = params.nB - alpha * alpha * (params.pA + params.pB)
    if nt < 0:
        raise ParameterError(f"alpha={alpha} infeasible: N~ = {nt:.6g} < 0")
    rb = pt * nt / (pt + nt) if pt + nt > 0 else 0.0
    if tolerances is None:
        return EffectiveChannel(pt, nt, rb)
    if params.pA != params.pB:
        raise ParameterError("robust effective channel needs equal transmit powers")
    P, N, t = params.pA, params.nB, tolerances
    c2 = strip_c2(2 * P, 1, P, t.rho, t.eps_strip)
    ptp = (1 - alpha - t.xi) ** 2 * (P - c2)
    inner = N - 2 * alpha * alpha * P * (1 - t.delta) + t.mu
    ntp = (math.sqrt(max(inner, 0.0)) + (1 - alpha) * t.theta * math.sqrt(P)
           + (1 - alpha) * c2 / math.sqrt(P) + t.zeta / math.sqrt(P)) ** 2
    return EffectiveChannel(pt, nt, rb, ptp, ntp, c2,
                            xi_min(P, alpha, t.theta, c2, t.zeta),
                            mu_min(P, alpha, t.theta, c2, t.zeta))

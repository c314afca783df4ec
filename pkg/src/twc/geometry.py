"""Sumset and strip geometry as executable checks, plus Monte Carlo event-rate tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .adversary import ChannelParams, apply_attack, binomial_ci, _draw_codeword
from .codebook import FiniteCode
from .decoder import (
    ToleranceProfile,
    estimate_alpha_raw,
    estimate_r_dec,
    mu_min,
    strip_c2,
    xi_min,
)
from .errors import CapacityError, DegenerateError, DomainError, ParameterError, StructureError
from .lattice import ENUM_BUDGET, enumerate_in_ball
from .linalg import as_generator, as_vec, project_perp, trial_stream

TOL = 1e-9


@dataclass(frozen=True)
class Ufo:
    """B(0, sqrt(nP)) ∩ B(z, sqrt(nP))."""

    z: np.ndarray
    P: float

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def nonempty(self) -> bool:
        return float(self.z @ self.z) <= 4 * self.n * self.P * (1 + TOL)

    def contains(self, x) -> bool:
        x = as_vec(x, self.n)
        lim = self.n * self.P * (1 + TOL)
        return float(x @ x) <= lim and float((x - self.z) @ (x - self.z)) <= lim


@dataclass(frozen=True)
class Strip:
    """Thin band of the UFO around its equator.

    x is a member iff |<x - z/2, z>| <= ||z|| sqrt(n eps)/2, x lies in the
    UFO, and the component of x - z/2 orthogonal to z has length at least
    r sqrt(1 - rho), where r = sqrt(nP - ||z||^2/4).
    """

    z: np.ndarray
    P: float
    rho: float
    eps_strip: float

    def __post_init__(self):
        z = as_vec(self.z)
        object.__setattr__(self, "z", z)
        if not 0 <= self.rho <= 1 or self.eps_strip < 0:
            raise ParameterError("need 0 <= rho <= 1 and eps >= 0")
        if self.r_sq <= 0:
            raise DomainError("degenerate strip: ||z||^2 >= 4nP")
        if not np.any(z):
            raise DomainError("degenerate strip: z = 0")

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def z_norm(self) -> float:
        return float(np.linalg.norm(self.z))

    @property
    def r_sq(self) -> float:
        return self.n * self.P - float(self.z @ self.z) / 4

    @property
    def r(self) -> float:
        return math.sqrt(self.r_sq)

    @property
    def half_width(self) -> float:
        """Largest axial offset |<x - z/2, z/||z||>|."""
        return math.sqrt(self.n * self.eps_strip) / 2

    @property
    def inner_radius(self) -> float:
        return self.r * math.sqrt(1 - self.rho)

    def ufo(self) -> Ufo:
        return Ufo(self.z, self.P)

    def decompose(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Axial offsets t and radial lengths of rows X relative to z/2."""
        X = np.atleast_2d(X)
        zh = self.z / self.z_norm
        D = X - self.z / 2
        t = D @ zh
        rad = np.sqrt(np.maximum(np.sum(D * D, axis=1) - t * t, 0.0))
        return t, rad

    def contains_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        t, rad = self.decompose(X)
        lim = self.n * self.P * (1 + TOL)
        in_ufo = (np.sum(X * X, axis=1) <= lim) & (np.sum((X - self.z) ** 2, axis=1) <= lim)
        slab = np.abs(t) <= self.half_width * (1 + TOL) + TOL
        ring = rad >= self.inner_radius * (1 - TOL)
        return in_ufo & slab & ring

    def contains(self, x) -> bool:
        return bool(self.contains_many(as_vec(x, self.n)[None, :])[0])

    def _basis_perp(self, gen, m):
        zh = self.z / self.z_norm
        U = gen.standard_normal((m, self.n))
        U -= np.outer(U @ zh, zh)
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        return U

    def sample(self, rng, count: int, method: str = "exact") -> np.ndarray:
        """Uniform points of the strip (rows).

        ``method="reject"`` draws the radial part uniformly from the full
        (n-1)-dimensional annulus and a uniform axial offset, then rejects
        points outside the UFO. ``method="exact"`` draws the axial offset
        from its true marginal by rejection under an exponential envelope and
        the radius from the annulus that fits at that offset; both give the
        same uniform law, the second without vanishing acceptance at large n.
        """
        gen = as_generator(rng)
        if self.n < 2:
            raise DomainError("strip sampling needs n >= 2")
        if method == "reject":
            return self._sample_reject(gen, count)
        if method != "exact":
            raise ParameterError(f"unknown method {method!r}")
        n, m = self.n, self.n - 1
        a, r, h, rin = self.z_norm / 2, self.r, self.half_width, self.inner_radius
        lam = m * a / (r * r)
        zh = self.z / self.z_norm
        out = []
        got = 0
        tries = 0
        while got < count:
            tries += 1
            if tries > 10**4:
                raise CapacityError("strip sampler made no progress")
            k = max(2 * (count - got), 64)
            u = gen.random(k)
            if lam * h > 1e-12:
                tt = -np.log1p(-u * (-np.expm1(-lam * h))) / lam
            else:
                tt = u * h
            rmax2 = n * self.P - (a + tt) ** 2
            ok = rmax2 > rin * rin
            log_ratio = np.full(k, -np.inf)
            rmax = np.sqrt(np.maximum(rmax2, 1e-300))
            lr1 = m * (np.log(rmax) - math.log(r)) + lam * tt
            lr0 = (m * (math.log(rin) - math.log(r)) if rin > 0 else -np.inf) + lam * tt
            log_ratio[ok] = lr1[ok] + np.log1p(-np.exp(np.minimum(lr0[ok] - lr1[ok], 0.0)))
            acc = ok & (np.log(gen.random(k)) < log_ratio)
            tt, rmax = tt[acc], rmax[acc]
            if tt.size == 0:
                continue
            sign = np.where(gen.random(tt.size) < 0.5, -1.0, 1.0)
            q = (rin / rmax) ** m if rin > 0 else np.zeros_like(rmax)
            rad = rmax * (q + gen.random(tt.size) * (1 - q)) ** (1.0 / m)
            U = self._basis_perp(gen, tt.size)
            X = self.z / 2 + np.outer(sign * tt, zh) + rad[:, None] * U
            out.append(X)
            got += X.shape[0]
        return np.concatenate(out)[:count]

    def _sample_reject(self, gen, count: int) -> np.ndarray:
        m = self.n - 1
        zh = self.z / self.z_norm
        r, rin, h = self.r, self.inner_radius, self.half_width
        out, got, draws = [], 0, 0
        while got < count:
            k = max(2 * (count - got), 256)
            draws += k
            if draws > 10**9:
                raise CapacityError("strip rejection sampler acceptance too low")
            rad = (rin**m + gen.random(k) * (r**m - rin**m)) ** (1.0 / m)
            t = gen.uniform(-h, h, k)
            X = self.z / 2 + np.outer(t, zh) + rad[:, None] * self._basis_perp(gen, k)
            X = X[self.contains_many(X)]
            out.append(X)
            got += X.shape[0]
        return np.concatenate(out)[:count]


def strip_membership(strip: Strip, x) -> bool:
    return strip.contains(x)


# sumset counting

def _ball_code_parts(code):
    L = getattr(code, "lattice", None)
    P = getattr(code, "P", None)
    if L is None or P is None:
        raise StructureError("sumset counting needs a ball-shaped lattice code")
    return L, P


def count_sum_pairs(code, z, code_b=None, budget: int = ENUM_BUDGET) -> int:
    """|{(x_A, x_B) in C_A x C_B : x_A + x_B = z}| via lattice enumeration.

    Pairs live in the UFO, which sits inside B(z/2, sqrt(nP - ||z||^2/4)); that
    ball is enumerated and each point x kept when x is in C_A and z - x in C_B.
    For an unexpurgated ball code this is |Λ ∩ B(0, sqrt(nP)) ∩ B(z, sqrt(nP))|.
    """
    code_b = code if code_b is None else code_b
    L, P = _ball_code_parts(code)
    z = as_vec(z, code.n)
    n = code.n
    if not L.contains(z):
        return 0
    r2 = n * P - float(z @ z) / 4
    if r2 < -TOL * n * P:
        return 0
    pts = enumerate_in_ball(L, z / 2, math.sqrt(max(r2, 0.0)), budget)
    lim = n * P * (1 + TOL)
    keep = (np.sum(pts * pts, axis=1) <= lim) & (np.sum((pts - z) ** 2, axis=1) <= lim)
    pts = pts[keep]
    plain = type(code) is not FiniteCode and not hasattr(code, "keep_mask") and code_b is code
    if plain:
        return int(pts.shape[0])
    return int(sum(1 for x in pts if code.index_of(x) >= 0 and code_b.index_of(z - x) >= 0))


def count_sum_pairs_direct(code_a, z, code_b=None) -> int:
    """Scan C_A and look up z - x_A in C_B."""
    code_b = code_a if code_b is None else code_b
    z = as_vec(z, code_a.n)
    return int(sum(1 for x in code_a.codewords if code_b.index_of(z - x) >= 0))


@dataclass(frozen=True)
class SumsetBoundConstants:
    c_omega: float
    C1: float
    F1: float


def sumset_constants(P: float, tau: float, omega: float, delta: float) -> SumsetBoundConstants:
    """c_omega = 2 sqrt(P omega) - omega + P delta/2, C1 and F1 (log base 2)."""
    if not (P > 0 and tau > 0 and omega >= 0 and delta >= 0):
        raise ParameterError("need P, tau > 0 and omega, delta >= 0")
    c = 2 * math.sqrt(P * omega) - omega + P * delta / 2
    if not P / 2 > c:
        raise DomainError(f"premise P/2 > c_omega fails (c_omega = {c:.6g})")
    g = P / 2 - c
    return SumsetBoundConstants(c, 1 / math.sqrt(2 * math.pi * g), 0.5 * math.log2(g) + 0.5 * math.log2(1 / tau))


def sumset_lower_bound(P: float, tau: float, omega: float, delta: float, n: int) -> float:
    """C1 * 2^((n/2)(log(P/2 - c_omega) + log(1/tau)))."""
    k = sumset_constants(P, tau, omega, delta)
    return k.C1 * 2.0 ** (n * k.F1)


def extremal_cos(z_norm_sq: float, n: int, P: float, rho: float) -> tuple[float, float]:
    """(cos of the smallest angle, cos of the largest angle); pairs in the strip have
    cos between -first and -second."""
    if z_norm_sq > 4 * n * P * (1 + TOL):
        raise DomainError("||z||^2 must not exceed 4nP")
    cmin = 1 - z_norm_sq / (2 * n * P)
    cmax = 1 - z_norm_sq / (2 * ((1 - rho) * n * P + rho * z_norm_sq / 4))
    return cmin, cmax


def avg_effective_radius_sample(x_tilde, s_perp) -> float:
    """(||x||^2/n)(1 - (||x||^2 + <x,s>)^2 / ((||x||^2 + ||s||^2 + 2<x,s>) ||x||^2))."""
    x, s = as_vec(x_tilde), as_vec(s_perp)
    if x.shape != s.shape:
        raise ParameterError("length mismatch")
    xx, xs, ss = float(x @ x), float(x @ s), float(s @ s)
    den = (xx + ss + 2 * xs) * xx
    if den <= 0:
        raise DegenerateError("received vector or x_tilde is zero")
    r = (xx / x.shape[0]) * (1 - (xx + xs) ** 2 / den)
    return max(r, 0.0)


# Monte Carlo tables

EVENTS = ("E_len", "E_inprod", "E_z", "E", "E_zz", "E_T", "E_1", "E_2", "E_3", "E_prime",
          "E_alpha", "E_decrad", "E_avgrad", "E_sumset")

IMPLICATIONS = ("E_1<=E_T", "E_2<=E_T|E_z", "E_alpha<=E_prime", "E_decrad<=E_prime|E_zz",
                "E_len<=E", "E_inprod<=E", "E_z<=E")


@dataclass
class EventTable:
    trials: int
    counts: dict
    violations: dict
    checked: dict
    label: str = ""

    def freq(self, name: str) -> float | None:
        c = self.counts.get(name)
        return None if c is None else c / self.trials

    def ci(self, name: str):
        c = self.counts.get(name)
        return None if c is None else binomial_ci(c, self.trials)

    def row(self) -> dict:
        out = {"label": self.label, "trials": self.trials}
        for e in EVENTS:
            f = self.freq(e)
            out[e] = "" if f is None else repr(f)
        return out

    def to_csv(self) -> str:
        return table_to_csv([self])


def table_to_csv(tables) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["label", "trials", *EVENTS], lineterminator="\n")
    w.writeheader()
    for t in tables:
        w.writerow(t.row())
    return buf.getvalue()


@dataclass(frozen=True)
class TrialEvents:
    flags: dict = field(default_factory=dict)
    alpha: float = 0.0
    xi_min: float = 0.0
    mu_min: float = 0.0


def trial_events(xa, xb, s, params: ChannelParams, tol: ToleranceProfile, sumset_threshold=None,
                 code=None) -> TrialEvents:
    """Evaluate every event of the catalogue on one channel use (Bob decodes Alice)."""
    if not params.is_symmetric:
        raise ParameterError("event catalogue is stated for symmetric powers")
    n, P, N = params.n, params.P, params.N
    z = xa + xb
    y = z + s
    zz = float(z @ z)
    if zz > 0:
        alpha, sp = project_perp(s, z)
    else:
        alpha, sp = 0.0, np.array(s, dtype=float)
    na, nb, ab = float(xa @ xa), float(xb @ xb), float(xa @ xb)
    spn = float(sp @ sp)
    slack = 1 + TOL
    f = {}
    f["E_len"] = na <= n * P * (1 - tol.zeta1) or nb <= n * P * (1 - tol.zeta1)
    f["E_inprod"] = abs(ab) >= n * P * tol.zeta1 * slack
    f["E_z"] = not (2 * n * P * (1 - tol.delta) / slack <= zz <= 2 * n * P * (1 + tol.delta) * slack)
    f["E"] = f["E_len"] or f["E_inprod"] or f["E_z"]
    lo_zz = n * (N - 2 * alpha**2 * P * (1 + tol.delta))
    hi_zz = n * (N - 2 * alpha**2 * P * (1 - tol.delta))
    band = TOL * n * (N + 2 * alpha**2 * P)
    f["E_zz"] = not (lo_zz - band <= spn <= hi_zz + band)
    if zz < 4 * n * P and zz > 0:
        st = Strip(z, P, tol.rho, tol.eps_strip)
        inT = st.contains_many(np.vstack([xa, xb]))
        f["E_T"] = not bool(inT.all())
        c2 = strip_c2(zz, n, P, tol.rho, tol.eps_strip)
    else:
        f["E_T"] = True
        c2 = P
    thr1 = n * (P - c2) / slack
    f["E_1"] = na <= thr1 or nb <= thr1
    f["E_2"] = abs(ab) >= n * P * tol.theta * slack
    f["E_3"] = max(abs(float(xa @ sp)), abs(float(xb @ sp))) >= n * tol.zeta * slack
    f["E_prime"] = f["E_1"] or f["E_2"] or f["E_3"]
    ah = estimate_alpha_raw(y, xb, P)
    f["E_alpha"] = abs(ah - alpha) > tol.xi * slack
    r_dec = estimate_r_dec(y, xb, ah, P)
    band = TOL * n * (N + 2 * alpha**2 * P + tol.mu)
    f["E_decrad"] = not (lo_zz - n * tol.mu - band <= r_dec <= hi_zz + n * tol.mu + band)
    pt = (1 - alpha) ** 2 * P
    nt = N - 2 * alpha**2 * P
    if (1 - alpha) != 0 and np.any(xa) and pt + nt > 0:
        r_hat = avg_effective_radius_sample((1 - alpha) * xa, sp)
        r_bar = pt * nt / (pt + nt)
        f["E_avgrad"] = abs(r_hat - r_bar) > tol.nu * slack
    else:
        f["E_avgrad"] = True
    if sumset_threshold is not None and code is not None:
        f["E_sumset"] = count_sum_pairs(code, z) <= sumset_threshold
    return TrialEvents(f, alpha, xi_min(P, alpha, tol.theta, c2, tol.zeta),
                       mu_min(P, alpha, tol.theta, c2, tol.zeta))


def _violations(te: TrialEvents, tol: ToleranceProfile) -> dict:
    f = te.flags
    out = {
        "E_1<=E_T": (True, f["E_1"] and not f["E_T"]),
        "E_2<=E_T|E_z": (True, f["E_2"] and not (f["E_T"] or f["E_z"])),
        "E_len<=E": (True, f["E_len"] and not f["E"]),
        "E_inprod<=E": (True, f["E_inprod"] and not f["E"]),
        "E_z<=E": (True, f["E_z"] and not f["E"]),
    }
    # the two estimator inclusions hold only when the tolerance covers the derived minimum
    ok_a = tol.xi >= te.xi_min and te.alpha <= 1
    out["E_alpha<=E_prime"] = (ok_a, ok_a and f["E_alpha"] and not f["E_prime"])
    ok_m = tol.mu >= te.mu_min and te.alpha <= 1
    out["E_decrad<=E_prime|E_zz"] = (ok_m, ok_m and f["E_decrad"] and not (f["E_prime"] or f["E_zz"]))
    return out


def empirical_event_rates(code_a, code_b, params: ChannelParams, attack, tolerances: ToleranceProfile,
                          trials: int, root_seed: int = 0, sumset_threshold: float | None = None,
                          label: str = "") -> EventTable:
    """Frequencies of every error event plus per-trial inclusion checks.

    ``attack`` is an attack description or a callable ``(z, rng) -> s``.
    ``violations[name]`` counts trials where an inclusion applied and failed;
    ``checked[name]`` counts trials where it applied.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    counts = {e: 0 for e in EVENTS if e != "E_sumset" or sumset_threshold is not None}
    viol = {k: 0 for k in IMPLICATIONS}
    checked = {k: 0 for k in IMPLICATIONS}
    for t in range(trials):
        xa = _draw_codeword(code_a, trial_stream(root_seed, t, "messageA"))
        xb = _draw_codeword(code_b, trial_stream(root_seed, t, "messageB"))
        rng = trial_stream(root_seed, t, "attack")
        if callable(attack):
            s = as_vec(attack(xa + xb, rng), params.n)
        else:
            s = apply_attack(attack, xa + xb, params, rng, code_a, code_b).s
        te = trial_events(xa, xb, s, params, tolerances, sumset_threshold, code_a)
        for e in counts:
            counts[e] += int(te.flags[e])
        for k, (applies, bad) in _violations(te, tolerances).items():
            checked[k] += int(applies)
            viol[k] += int(bad)
    return EventTable(trials, counts, viol, checked, label)


@dataclass(frozen=True)
class OrthogonalityEstimate:
    fraction: float
    ci95: tuple
    pairs: int


def empirical_orthogonality(code_a, code_b, eta: float, trials: int | None = None, rng=None,
                            two_sided: bool = False, k: int = 1) -> OrthogonalityEstimate:
    """Fraction of draws with <x_A, x_B> > n*eta (or |.| with ``two_sided``).

    With ``k > 1``, k independent codewords of B are drawn per trial and the
    event is that any of them violates the bound. ``trials=None`` scans all
    pairs exhaustively (k = 1 only).
    """
    n = code_a.n
    if trials is None:
        A, B = code_a.codewords, code_b.codewords
        G = A @ B.T
        G = np.abs(G) if two_sided else G
        hits = int(np.sum(G > n * eta))
        m = G.size
        return OrthogonalityEstimate(hits / m, binomial_ci(hits, m), m)
    gen = as_generator(rng)
    hits = 0
    for _ in range(trials):
        xa = _draw_codeword(code_a, gen)
        vals = np.array([float(xa @ _draw_codeword(code_b, gen)) for _ in range(k)])
        vals = np.abs(vals) if two_sided else vals
        hits += int(np.any(vals > n * eta))
    return OrthogonalityEstimate(hits / trials, binomial_ci(hits, trials), trials)

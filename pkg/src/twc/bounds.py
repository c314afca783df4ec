"""Closed-form capacity expressions, the scale-and-babble rate and symmetrization thresholds.

All logarithms are base 2; rates are in bits per channel use.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .adversary import ChannelParams
from .errors import DomainError, ParameterError


def _pos(*vals):
    for v in vals:
        if not v > 0:
            raise ParameterError(f"expected a positive value, got {v}")


def _clamp_half_log(v: float) -> float:
    if v <= 1.0:
        return 0.0
    return 0.5 * math.log2(v)


def capacity_symmetric(P: float, N: float) -> float:
    """[1/2 log(1/2 + P/N)]^+."""
    _pos(P, N)
    return _clamp_half_log(0.5 + P / N)


def capacity_asymmetric(params: ChannelParams) -> tuple[float, float]:
    """(C_A, C_B), indexed by receiver.

    C_A is the rate Alice can decode (Bob's message, jammer budget N_A);
    C_B is the rate Bob can decode (Alice's message, jammer budget N_B).
    """
    pa, pb, na, nb = params.pA, params.pB, params.nA, params.nB
    c_a = _clamp_half_log(pa / (pa + pb) + pb / na)
    c_b = _clamp_half_log(pb / (pa + pb) + pa / nb)
    return c_a, c_b


def list_dec_capacity(P: float, N: float) -> float:
    """[1/2 log(P/N)]^+."""
    _pos(P, N)
    return _clamp_half_log(P / N)


def awgn_capacity(P: float, N: float) -> float:
    """1/2 log(1 + P/N)."""
    _pos(P, N)
    return 0.5 * math.log2(1.0 + P / N)


def _alpha_limit(params: ChannelParams, decoder: str) -> tuple[float, float, float]:
    """(P_signal, N_jam, P_sum) for the link being decoded."""
    if decoder == "B":
        return params.pA, params.nB, params.pA + params.pB
    if decoder == "A":
        return params.pB, params.nA, params.pA + params.pB
    raise ParameterError("decoder must be 'A' or 'B'")


def scale_babble_rate(alpha: float, params: ChannelParams, decoder: str = "B") -> float:
    """Rate left to the decoder when James scales by alpha and babbles with the rest of his power.

    For Bob (decoder "B") this is 1/2 log(1 + (1-a)^2 P_A / (N_B - a^2 (P_A+P_B))).
    """
    ps, nj, psum = _alpha_limit(params, decoder)
    den = nj - alpha * alpha * psum
    if den <= 0:
        raise DomainError(f"alpha={alpha} leaves no babble power (denominator {den:.3g})")
    return 0.5 * math.log2(1.0 + (1.0 - alpha) ** 2 * ps / den)


@dataclass(frozen=True)
class AlphaOptimum:
    alpha_star: float
    value: float
    grid_alpha: float
    grid_value: float


def optimize_alpha(params: ChannelParams, decoder: str = "B", grid_step: float = 1e-4) -> AlphaOptimum:
    """James' best scale factor alpha* = N/(P_A+P_B), which minimizes the rate.

    A grid search over the feasible interval is returned alongside as a check.
    """
    ps, nj, psum = _alpha_limit(params, decoder)
    a_star = nj / psum
    if a_star * a_star * psum >= nj:
        raise DomainError("closed-form optimum is infeasible (N >= P_A + P_B)")
    value = scale_babble_rate(a_star, params, decoder)
    lim = math.sqrt(nj / psum)
    grid = np.arange(-lim + grid_step, lim, grid_step)
    den = nj - grid**2 * psum
    grid = grid[den > 0]
    vals = 0.5 * np.log2(1.0 + (1.0 - grid) ** 2 * ps / (nj - grid**2 * psum))
    i = int(np.argmin(vals))
    return AlphaOptimum(a_star, value, float(grid[i]), float(vals[i]))


def symmetrization_threshold(params: ChannelParams) -> tuple[bool, bool]:
    """(zero_rate_A, zero_rate_B): N_A > (2P_B + P_A)/4 and N_B > (2P_A + P_B)/4."""
    za = params.nA > (2 * params.pB + params.pA) / 4
    zb = params.nB > (2 * params.pA + params.pB) / 4
    return za, zb


def symmetrization_error_lb(eps: float) -> tuple[float, float]:
    """(minimum code size, error lower bound) at N = 3P(1+eps)/4."""
    if not eps > 0:
        raise ParameterError("eps must be positive")
    return 2 * (1 + eps) / eps, eps / (4 * (1 + eps))


@dataclass(frozen=True)
class BoundReport:
    capacity_A: float
    capacity_B: float
    awgn_capacity: float
    list_dec_capacity: float
    alpha_star_A: float | None
    alpha_star_B: float | None
    zero_rate_A: bool
    zero_rate_B: bool
    bounds_conflict_A: bool
    bounds_conflict_B: bool
    symm_error_lb: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def bound_report(params: ChannelParams) -> BoundReport:
    """All bounds for one parameter point.

    Suffixes name the receiver, as in :func:`capacity_asymmetric`. The AWGN
    and list-decoding columns describe Bob's link (P_A, N_B). A conflict flag is raised
    when the achievability formula is positive but symmetrization already
    forces rate zero.
    """
    c_a, c_b = capacity_asymmetric(params)
    za, zb = symmetrization_threshold(params)

    def a_star(nj, psum):
        a = nj / psum
        return a if a * a * psum < nj else None

    lb = None
    if params.is_symmetric and params.nA > 0.75 * params.pA:
        eps = 4 * params.nA / (3 * params.pA) - 1
        lb = symmetrization_error_lb(eps)[1]
    return BoundReport(
        capacity_A=c_a,
        capacity_B=c_b,
        awgn_capacity=awgn_capacity(params.pA, params.nB),
        list_dec_capacity=list_dec_capacity(params.pA, params.nB),
        alpha_star_A=a_star(params.nA, params.pA + params.pB),
        alpha_star_B=a_star(params.nB, params.pA + params.pB),
        zero_rate_A=za,
        zero_rate_B=zb,
        bounds_conflict_A=bool(za and c_a > 0),
        bounds_conflict_B=bool(zb and c_b > 0),
        symm_error_lb=lb,
    )


def snr_sweep(lo: float, hi: float, steps: int, P: float = 1.0) -> list[dict]:
    """Symmetric rows over SNR = P/N on a linear grid (SNR in linear units)."""
    if steps < 1 or not 0 < lo <= hi:
        raise ParameterError("sweep needs 0 < lo <= hi and steps >= 1")
    rows = []
    for snr in np.linspace(lo, hi, steps):
        N = P / snr
        rep = bound_report(ChannelParams.symmetric(1, P, N))
        rows.append({"snr": float(snr), "capacity": rep.capacity_B,
                     "list_dec_capacity": rep.list_dec_capacity,
                     "awgn_capacity": rep.awgn_capacity,
                     "zero_rate": rep.zero_rate_B, "bounds_conflict": rep.bounds_conflict_B})
    return rows

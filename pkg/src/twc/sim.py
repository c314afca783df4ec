"""Monte Carlo orchestration: single channel uses, whole experiments and parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .adversary import apply_attack, binomial_ci
from .bounds import awgn_capacity, capacity_asymmetric, list_dec_capacity
from .config import ExperimentConfig
from .decoder import (ALPHA_CLAMP, DecodeDiagnostics, decode_min_distance, decode_unique, effective_received,
                      estimate_alpha_raw, estimate_r_dec)
from .errors import CapacityError, ConfigError, TwcError
from .linalg import project_perp, trial_stream

CSV_COLUMNS = ("trial", "mA", "mB", "alpha_true", "alpha_hat", "r_dec", "truncated", "verdict", "correct")
POWER_SLACK = 1e-9


class PowerAuditError(TwcError, AssertionError):
    """A transmitted or jamming vector broke its power budget."""


class TrialError(TwcError):
    """Wraps a failure inside one trial with its index."""

    def __init__(self, trial_index: int, cause: Exception):
        super().__init__(f"trial {trial_index}: {cause}")
        self.trial_index = trial_index
        self.cause = cause


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    mA: int
    mB: int
    alpha_true: float | None
    truncated: bool
    diagnostics: DecodeDiagnostics
    correct: bool
    s_perp_sq: float | None

    def csv_row(self) -> list[str]:
        d = self.diagnostics
        f = lambda v: "" if v is None else repr(float(v))
        return [str(self.trial), str(self.mA), str(self.mB), f(self.alpha_true), f(d.alpha_hat),
                f(d.r_dec), str(int(self.truncated)), d.verdict, str(int(self.correct))]


def _pick(code, rng):
    """(index, codeword); implicit codes report index -1 and are judged by the decoded point."""
    if hasattr(code, "codewords"):
        m = code.sample_index(rng)
        return m, np.array(code.codewords[m])
    return -1, code.sample(rng, 1)[0]


def _audit(vec, budget, n, what):
    p = float(vec @ vec)
    if p > n * budget * (1 + POWER_SLACK):
        raise PowerAuditError(f"{what} power {p / n:.6g} exceeds budget {budget:.6g}")


def run_trial(config: ExperimentConfig, trial_index: int) -> TrialRecord:
    """One channel use, deterministic in (root_seed, trial_index)."""
    try:
        return _run_trial(config, trial_index)
    except TrialError:
        raise
    except (TwcError, ValueError, ArithmeticError) as e:
        if isinstance(e, (ConfigError, PowerAuditError, CapacityError)):
            raise
        raise TrialError(trial_index, e) from e


def _run_trial(config: ExperimentConfig, t: int) -> TrialRecord:
    p = config.params
    n = p.n
    seed = config.root_seed
    code_a, code_b = config.code_a, config.code_b
    mA, xa = _pick(code_a, trial_stream(seed, t, "messageA"))
    mB, xb = _pick(code_b, trial_stream(seed, t, "messageB"))
    _audit(xa, p.pA, n, "x_A")
    _audit(xb, p.pB, n, "x_B")
    z = xa + xb
    out = apply_attack(config.attack, z, p, trial_stream(seed, t, "attack"), code_a, code_b)
    s = out.s
    _audit(s, p.nB, n, "s")
    y = z + s
    if np.any(z):
        alpha_true, sp = project_perp(s, z)
        sp2 = float(sp @ sp)
    else:
        alpha_true, sp2 = None, None
    if config.decoder_kind == "estimation":
        diag = decode_unique(code_a, y, xb, p.pA, config.tolerances)
        if mA >= 0:
            correct = diag.decoded and diag.index == mA
        else:
            correct = diag.decoded and bool(np.array_equal(diag.codeword, xa))
    else:
        idx = decode_min_distance(code_a, y, xb)
        raw = estimate_alpha_raw(y, xb, p.pA) if np.any(xb) else 0.0
        ah = min(max(raw, -ALPHA_CLAMP), ALPHA_CLAMP)
        diag = DecodeDiagnostics(ah, raw, ah != raw, estimate_r_dec(y, xb, ah, p.pA),
                                 effective_received(y, xb, ah), 1, (idx,), "decoded", idx,
                                 np.array(code_a.codewords[idx]))
        correct = idx == mA
    return TrialRecord(t, mA, mB, alpha_true, out.truncated, diag, bool(correct), sp2)


@dataclass(frozen=True)
class Partial:
    """Exact, associative accumulator of trial statistics."""

    trials: int = 0
    errors: int = 0
    truncated: int = 0
    alpha_err: Fraction = Fraction(0)
    alpha_count: int = 0
    rdec_err: Fraction = Fraction(0)
    rdec_count: int = 0

    @classmethod
    def of(cls, rec: TrialRecord, n: int) -> "Partial":
        ae, ac, re_, rc = Fraction(0), 0, Fraction(0), 0
        if rec.alpha_true is not None:
            ae, ac = Fraction(abs(rec.diagnostics.alpha_hat - rec.alpha_true)), 1
        if rec.s_perp_sq is not None:
            re_, rc = Fraction(abs(rec.diagnostics.r_dec - rec.s_perp_sq)) / n, 1
        return cls(1, int(not rec.correct), int(rec.truncated), ae, ac, re_, rc)

    def merge(self, other: "Partial") -> "Partial":
        return Partial(self.trials + other.trials, self.errors + other.errors,
                       self.truncated + other.truncated, self.alpha_err + other.alpha_err,
                       self.alpha_count + other.alpha_count, self.rdec_err + other.rdec_err,
                       self.rdec_count + other.rdec_count)


@dataclass(frozen=True)
class RunSummary:
    pe_hat: float
    ci95: tuple
    trials: int
    mean_alpha_err: float | None
    mean_rdec_err: float | None
    q_hat: float
    wall_time: float = 0.0

    @classmethod
    def from_partial(cls, acc: Partial, wall_time: float = 0.0) -> "RunSummary":
        pe = acc.errors / acc.trials
        mae = float(acc.alpha_err / acc.alpha_count) if acc.alpha_count else None
        mre = float(acc.rdec_err / acc.rdec_count) if acc.rdec_count else None
        return cls(pe, binomial_ci(acc.errors, acc.trials), acc.trials, mae, mre,
                   acc.truncated / acc.trials, wall_time)

    def to_dict(self, include_time: bool = False) -> dict:
        d = {"pe_hat": self.pe_hat, "ci95": list(self.ci95), "trials": self.trials,
             "mean_alpha_err": self.mean_alpha_err, "mean_rdec_err": self.mean_rdec_err,
             "q_hat": self.q_hat}
        if include_time:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _run_chunk(config, idx):
    return [run_trial(config, t) for t in idx]


def run_records(config: ExperimentConfig, threads: int = 1) -> list[TrialRecord]:
    """All trial records in trial order, independent of the thread count."""
    config.code_a, config.code_b, config.attack  # build shared state before fanning out
    idx = list(range(config.trials))
    if threads <= 1:
        return _run_chunk(config, idx)
    chunks = [idx[i::threads] for i in range(threads)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: _run_chunk(config, c), chunks))
    recs = [r for part in parts for r in part]
    recs.sort(key=lambda r: r.trial)
    return recs


def summarize(records, n: int, wall_time: float = 0.0) -> RunSummary:
    acc = Partial()
    for r in records:
        acc = acc.merge(Partial.of(r, n))
    return RunSummary.from_partial(acc, wall_time)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue()


def run_experiment(config: ExperimentConfig, threads: int = 1, out_dir: str | None = None):
    """Run every trial; returns (summary, records) and optionally writes summary JSON and trials CSV.

    The JSON leaves out wall time so identical configs give identical bytes.
    """
    t0 = time.perf_counter()
    recs = run_records(config, threads)
    summary = summarize(recs, config.params.n, time.perf_counter() - t0)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, config.outputs["summary"]), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(summary.to_json())
        with open(os.path.join(out_dir, config.outputs["trials_csv"]), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(records_to_csv(recs))
    return summary, recs


SWEEP_AXES = ("snr", "rate", "alpha", "n")


def _with_axis(config: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    d = config.to_dict()
    if axis == "snr":
        p = d["params"]
        p["nA"] = p["pA"] / value
        p["nB"] = p["pB"] / value
    elif axis == "rate":
        d["code_a"]["rate"] = float(value)
        if "code_b" in d:
            d["code_b"]["rate"] = float(value)
    elif axis == "alpha":
        if d["attack"].get("kind") != "scale_and_babble":
            raise ConfigError("alpha sweeps need a scale_and_babble attack")
        d["attack"]["alpha"] = float(value)
    elif axis == "n":
        n = int(value)
        d["params"]["n"] = n
        for key in ("code_a", "code_b"):
            if key in d:
                lat = d[key]["lattice"]
                if lat.get("kind") not in ("integer", "scaled"):
                    raise ConfigError("n sweeps need integer or scaled lattices")
                lat["n"] = n
                d[key].pop("n", None)
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    return ExperimentConfig.from_dict(d)


def sweep(config: ExperimentConfig, axis: str, grid, threads: int = 1) -> list[dict]:
    """One summary row per grid value, with the bound columns for that point."""
    grid = list(grid)
    if not grid:
        raise ConfigError("sweep grid is empty")
    rows = []
    for v in grid:
        cfg = _with_axis(config, axis, v)
        summary, _ = run_experiment(cfg, threads)
        p = cfg.params
        row = {axis: float(v), "code_rate": cfg.code_a.rate}
        row.update(summary.to_dict())
        row["ci95_lo"], row["ci95_hi"] = row.pop("ci95")
        row["capacity"] = capacity_asymmetric(p)[1]
        row["list_dec_capacity"] = list_dec_capacity(p.pA, p.nB)
        row["awgn_capacity"] = awgn_capacity(p.pA, p.nB)
        rows.append(row)
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()

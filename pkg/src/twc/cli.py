"""Command-line entry point ``twc``.

Exit codes: 0 success, 2 configuration error, 3 budget or capacity error,
1 for any other library error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .adversary import ChannelParams
from .bounds import bound_report, snr_sweep
from .config import ExperimentConfig
from .errors import CapacityError, ConfigError, TwcError
from .geometry import (Strip, empirical_event_rates, empirical_orthogonality, extremal_cos,
                       table_to_csv)
from .decoder import ToleranceProfile
from .adversary import _draw_codeword
from .lattice import lattice_from_dict, lattice_to_dict, nld, radii
from .linalg import SeededRng
from .sim import rows_to_csv, run_experiment

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_CAPACITY = 0, 1, 2, 3


def _write(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _parse_sweep(text: str):
    parts = text.split(":")
    if len(parts) != 4 or parts[0] != "snr":
        raise ConfigError("--sweep must look like snr:lo:hi:steps")
    try:
        return float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError:
        raise ConfigError(f"bad --sweep value {text!r}") from None


def cmd_bounds(args) -> int:
    try:
        params = ChannelParams(1, args.pa, args.pb, args.na, args.nb)
    except TwcError as e:
        raise ConfigError(str(e)) from None
    if args.sweep:
        lo, hi, steps = _parse_sweep(args.sweep)
        if args.pa != args.pb:
            raise ConfigError("SNR sweeps need --pa equal to --pb")
        try:
            rows = snr_sweep(lo, hi, steps, args.pa)
        except TwcError as e:
            raise ConfigError(str(e)) from None
        _write(rows_to_csv(rows), args.out)
    else:
        _write(_dump(bound_report(params).to_dict()), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    summary, _ = run_experiment(cfg, args.threads, args.out_dir)
    d = summary.to_dict(include_time=True)
    sys.stdout.write(_dump(d))
    return EXIT_OK


def _check_events(cfg: ExperimentConfig) -> str:
    tol = cfg.tolerances or ToleranceProfile()
    t = empirical_event_rates(cfg.code_a, cfg.code_b, cfg.params, cfg.attack, tol,
                              cfg.trials, cfg.root_seed, label="events")
    return table_to_csv([t])


def _check_concentration(cfg: ExperimentConfig) -> str:
    p = cfg.params
    gen = SeededRng(cfg.root_seed, 0xC0).gen
    n, P = p.n, p.pA
    short = misaligned = zout = 0
    for _ in range(cfg.trials):
        xa, xb = _draw_codeword(cfg.code_a, gen), _draw_codeword(cfg.code_b, gen)
        na, nb = float(xa @ xa), float(xb @ xb)
        short += int(na <= 0.9 * n * P) + int(nb <= 0.9 * n * P)
        c = float(xa @ xb) / math.sqrt(na * nb) if na > 0 and nb > 0 else 1.0
        misaligned += int(abs(c) >= 0.1)
        z = xa + xb
        zz = float(z @ z)
        zout += int(not 2 * n * P * 0.9 <= zz <= 2 * n * P * 1.1)
    m = cfg.trials
    return _dump({"trials": m, "freq_short": short / (2 * m), "freq_abs_cos_ge_0.1": misaligned / m,
                  "freq_z_outside_shell": zout / m})


def _check_orthogonality(cfg: ExperimentConfig) -> str:
    tol = cfg.tolerances or ToleranceProfile()
    est = empirical_orthogonality(cfg.code_a, cfg.code_b, tol.zeta1 * cfg.params.pA, cfg.trials,
                                  SeededRng(cfg.root_seed, 0x0A).gen, two_sided=True)
    return _dump({"eta": tol.zeta1 * cfg.params.pA, "fraction": est.fraction,
                  "ci95": list(est.ci95), "pairs": est.pairs})


def _check_strip_angles(cfg: ExperimentConfig) -> str:
    p = cfg.params
    tol = cfg.tolerances or ToleranceProfile()
    n, P = p.n, p.pA
    gen = SeededRng(cfg.root_seed, 0x5A).gen
    z = np.zeros(n)
    z[0] = math.sqrt(2 * n * P)
    st = Strip(z, P, tol.rho, tol.eps_strip)
    X = st.sample(gen, cfg.trials)
    Y = z - X
    cos = np.sum(X * Y, axis=1) / np.sqrt(np.sum(X * X, axis=1) * np.sum(Y * Y, axis=1))
    cmin, cmax = extremal_cos(float(z @ z), n, P, tol.rho)
    lo, hi = -cmin, -cmax
    bad = int(np.sum((cos < lo - 1e-9) | (cos > hi + 1e-9)))
    return _dump({"samples": int(X.shape[0]), "interval": [lo, hi], "observed": [float(cos.min()), float(cos.max())],
                  "violations": bad})


GEOMETRY_CHECKS = {
    "events": _check_events,
    "concentration": _check_concentration,
    "orthogonality": _check_orthogonality,
    "strip-angles": _check_strip_angles,
}


def cmd_geometry(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    _write(GEOMETRY_CHECKS[args.check](cfg), args.out)
    return EXIT_OK


def cmd_lattice_info(args) -> int:
    try:
        with open(args.spec, encoding="utf-8") as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read lattice spec {args.spec}: {e}") from None
    try:
        L = lattice_from_dict(spec)
    except TwcError as e:
        raise ConfigError(str(e)) from None
    r = radii(L, sample_budget=args.samples)
    out = {"lattice": lattice_to_dict(L), "n": L.n, "log_covolume": L.log_covolume,
           "nld": nld(L), "r_eff": r.r_eff, "r_pack": r.r_pack, "r_pack_exact": r.r_pack_exact,
           "r_cov": r.r_cov, "r_cov_estimated": r.r_cov_estimated, "omega": r.omega, "tau": r.tau}
    _write(_dump(out), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twc", description="Two-way adversarial channel laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="capacity and converse bounds for one parameter point")
    for name in ("pa", "pb", "na", "nb"):
        b.add_argument(f"--{name}", type=float, required=True)
    b.add_argument("--sweep", help="snr:lo:hi:steps, writes CSV rows instead of one JSON report")
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("simulate", help="Monte Carlo run from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("geometry", help="empirical geometric checks")
    g.add_argument("check", choices=sorted(GEOMETRY_CHECKS))
    g.add_argument("--config", required=True)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_geometry)

    lat = sub.add_parser("lattice", help="lattice utilities")
    lsub = lat.add_subparsers(dest="lattice_command", required=True)
    info = lsub.add_parser("info", help="radii and density of a lattice")
    info.add_argument("--spec", required=True)
    info.add_argument("--samples", type=int, default=10**4)
    info.add_argument("--out", default="-")
    info.set_defaults(func=cmd_lattice_info)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"twc: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as e:
        print(f"twc: budget exceeded: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except TwcError as e:
        print(f"twc: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

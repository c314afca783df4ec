"""Experiment configuration: JSON schema, validation and object construction.

Schema (unknown keys are rejected)::

    {
      "params": {"n": 32, "P": 1.0, "N": 0.25}          # or n, pA, pB, nA, nB
      "code_a": {"lattice": {...}, "P": 1.0, ...},      # see twc.codebook.code_from_dict
      "code_b": {...},                                  # optional, defaults to code_a
      "attack": {"kind": "scale_and_babble", "alpha": "star", "eps": 0.05},
      "decoder": {"kind": "estimation", "tolerances": {"mu": 0.2}},
      "trials": 500,
      "root_seed": 1,
      "outputs": {"summary": "summary.json", "trials_csv": "trials.csv"}
    }

A code entry may carry ``"rate": R`` to rescale its lattice so the ball code
has at least 2^(nR) points. Implicit codes are scaled by the volume estimate
instead, so their size is about 2^(nR). ``"alpha": "star"`` resolves to N_B/(P_A+P_B).
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

from .adversary import ChannelParams, ScaleAndBabble, attack_from_dict
from .codebook import ImplicitBallCode, code_from_dict, scale_for_rate
from .decoder import ToleranceProfile
from .errors import ConfigError, TwcError
from .lattice import lattice_from_dict
from .linalg import log_ball_volume

TOP_KEYS = {"params", "code_a", "code_b", "attack", "decoder", "trials", "root_seed", "outputs"}
REQUIRED = {"params", "code_a", "attack", "decoder", "trials", "root_seed"}
CODE_KEYS = {"lattice", "shaping", "n", "P", "coarse", "gamma", "seed", "subsample",
             "subsample_seed", "implicit", "rate"}
DECODER_KEYS = {"kind", "tolerances"}
OUTPUT_KEYS = {"summary", "trials_csv"}


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def parse_params(d: dict) -> ChannelParams:
    _check_keys(d, {"n", "P", "N", "pA", "pB", "nA", "nB"}, "params")
    try:
        if "P" in d or "N" in d:
            if any(k in d for k in ("pA", "pB", "nA", "nB")):
                raise ConfigError("give either P/N or pA/pB/nA/nB, not both")
            return ChannelParams.symmetric(int(d["n"]), float(d["P"]), float(d["N"]))
        return ChannelParams(int(d["n"]), float(d["pA"]), float(d["pB"]), float(d["nA"]), float(d["nB"]))
    except KeyError as e:
        raise ConfigError(f"params missing {e}") from None
    except TwcError as e:
        raise ConfigError(str(e)) from None


def volume_scaled(base, P: float, rate: float):
    """c*base with vol(B(0, sqrt(nP)))/covol(c*base) = 2^(n*rate)."""
    n = base.n
    c = math.sqrt(n * P) * math.exp((log_ball_volume(n) - base.log_covolume - n * rate * math.log(2)) / n)
    return base.scaled_by(c)


def build_code(spec: dict):
    """Code object for a code entry, honouring an optional rate target."""
    _check_keys(spec, CODE_KEYS, "code")
    spec = dict(spec)
    rate = spec.pop("rate", None)
    if rate is not None:
        base = lattice_from_dict(spec["lattice"])
        if spec.get("subsample"):
            raise ConfigError("rate and subsample cannot be combined")
        if spec.get("implicit"):
            return ImplicitBallCode(volume_scaled(base, float(spec["P"]), float(rate)), float(spec["P"]))
        scale, code = scale_for_rate(base, float(spec["P"]), float(rate))
        if spec.get("gamma"):
            from .codebook import expurgate
            code = expurgate(code, float(spec["gamma"]), int(spec.get("seed", 0)))
        return code
    return code_from_dict(spec)


@dataclass
class ExperimentConfig:
    params: ChannelParams
    code_a_spec: dict
    code_b_spec: dict | None
    attack_spec: dict
    decoder_kind: str
    tolerances: ToleranceProfile | None
    trials: int
    root_seed: int
    outputs: dict = field(default_factory=lambda: {"summary": "summary.json", "trials_csv": "trials.csv"})

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        _check_keys(d, TOP_KEYS, "config")
        missing = REQUIRED - set(d)
        if missing:
            raise ConfigError(f"config missing keys: {sorted(missing)}")
        params = parse_params(d["params"])
        _check_keys(d["decoder"], DECODER_KEYS, "decoder")
        kind = d["decoder"].get("kind", "estimation")
        if kind not in ("estimation", "min_distance"):
            raise ConfigError(f"unknown decoder kind {kind!r}")
        tol = d["decoder"].get("tolerances")
        try:
            tol = ToleranceProfile(**tol) if tol is not None else None
        except TypeError as e:
            raise ConfigError(f"bad tolerances: {e}") from None
        except TwcError as e:
            raise ConfigError(str(e)) from None
        trials = d["trials"]
        if not isinstance(trials, int) or trials < 1:
            raise ConfigError("trials must be a positive integer")
        seed = d["root_seed"]
        if not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError("root_seed must be a 64-bit nonnegative integer")
        outputs = {"summary": "summary.json", "trials_csv": "trials.csv"}
        if "outputs" in d:
            _check_keys(d["outputs"], OUTPUT_KEYS, "outputs")
            outputs.update(d["outputs"])
        for name in ("code_a", "code_b"):
            if d.get(name) is not None:
                _check_keys(d[name], CODE_KEYS, name)
        cfg = cls(params, dict(d["code_a"]), dict(d["code_b"]) if d.get("code_b") else None,
                  dict(d["attack"]), kind, tol, trials, seed, outputs)
        cfg.attack  # validate eagerly
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = {
            "params": self.params.to_dict(),
            "code_a": copy.deepcopy(self.code_a_spec),
            "attack": copy.deepcopy(self.attack_spec),
            "decoder": {"kind": self.decoder_kind,
                        "tolerances": self.tolerances.to_dict() if self.tolerances else None},
            "trials": self.trials,
            "root_seed": self.root_seed,
            "outputs": dict(self.outputs),
        }
        if self.code_b_spec is not None:
            d["code_b"] = copy.deepcopy(self.code_b_spec)
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(changes)
        return ExperimentConfig.from_dict(d)

    @cached_property
    def attack(self):
        spec = dict(self.attack_spec)
        if spec.get("alpha") == "star":
            spec["alpha"] = self.params.nB / (self.params.pA + self.params.pB)
        try:
            return attack_from_dict(spec)
        except TwcError as e:
            raise ConfigError(str(e)) from None
        except TypeError as e:
            raise ConfigError(f"bad attack: {e}") from None

    @cached_property
    def code_a(self):
        code = build_code(self.code_a_spec)
        if isinstance(code, ImplicitBallCode) and self.decoder_kind == "min_distance":
            raise ConfigError("the min_distance decoder needs an explicit code_a")
        self._check_code(code, self.params.pA, "code_a")
        return code

    @cached_property
    def code_b(self):
        if self.code_b_spec is None:
            return self.code_a
        code = build_code(self.code_b_spec)
        self._check_code(code, self.params.pB, "code_b")
        return code

    def _check_code(self, code, budget, name):
        if code.n != self.params.n:
            raise ConfigError(f"{name} has length {code.n}, params say n={self.params.n}")
        P = getattr(code, "P", None)
        if P is not None and P > budget * (1 + 1e-9):
            raise ConfigError(f"{name} shaping power {P} exceeds budget {budget}")

    @property
    def uses_scale_and_babble(self) -> bool:
        return isinstance(self.attack, ScaleAndBabble)

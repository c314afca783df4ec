"""Simulation laboratory for the quadratically constrained two-way adversarial channel."""

from .adversary import (ChannelParams, GaussianBabble, RandomCodeword, ScaleAndBabble, Silent,
                        ZAwareSymmetrization, NetSearch, apply_attack, estimate_truncation_q)
from .bounds import (bound_report, capacity_asymmetric, capacity_symmetric, optimize_alpha,
                     scale_babble_rate)
from .codebook import (FiniteCode, ImplicitBallCode, LatticeCode, build_ball_code, build_voronoi_code,
                       expurgate)
from .config import ExperimentConfig
from .decoder import ToleranceProfile, decode_min_distance, decode_unique, effective_channel
from .errors import (CapacityError, CodeIndexError, ConfigError, DegenerateError, DimensionError,
                     DomainError, ParameterError, StructureError, TwcError)
from .lattice import Lattice, LinearCode, construction_a, nested_construction_a, quantize
from .sim import RunSummary, TrialRecord, run_experiment, run_trial, sweep

__version__ = "0.1.0"

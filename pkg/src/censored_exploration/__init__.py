"""Censored multi-venue exploration: Kaplan-Meier learning and greedy allocation."""

from ._validation import DomainError, InsufficientDataError
from .allocator import (
    brute_force_allocate,
    expected_fill,
    greedy_allocate,
    mean_min_fill,
)
from .core import Allocation, CensoredSample, TailCurve
from .km import (
    KaplanMeierTail,
    VenueCounters,
    cutoff,
    ingest,
    km_tail,
    km_tail_exact,
    optimistic_km,
)
from .models import CensoredMLE, Family, VenueModel, fit_mle, log_loss, pmf, sample, tail_curve
from .policies import BanditPolicy, IdealPolicy, KMLearner, ParametricLearner, UniformPolicy
from .simulator import (
    SimConfig,
    VolumeSource,
    order_half_life,
    run_episode,
    run_experiment,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation", "BanditPolicy", "CensoredMLE", "CensoredSample", "DomainError", "Family",
    "IdealPolicy", "InsufficientDataError", "KMLearner", "KaplanMeierTail", "ParametricLearner",
    "SimConfig", "TailCurve", "UniformPolicy", "VenueCounters", "VenueModel", "VolumeSource",
    "brute_force_allocate", "cutoff", "expected_fill", "fit_mle", "greedy_allocate", "ingest",
    "km_tail", "km_tail_exact", "log_loss", "mean_min_fill", "optimistic_km", "order_half_life", "pmf",
    "run_episode", "run_experiment", "sample", "step", "tail_curve",
]

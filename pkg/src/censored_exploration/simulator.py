"""Venue simulator, episode loop, order half-life and multi-trial experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.base import clone

from ._validation import DomainError, check_random_state, check_volume
from .core import Allocation, CensoredSample
from .models import VenueModel

INFINITE = math.inf


@dataclass(frozen=True, eq=False)
class VolumeSource:
    """Constant order size, or a discrete distribution over ``values``."""

    values: tuple
    probs: Optional[tuple] = None

    def __post_init__(self):
        values = tuple(int(v) for v in np.atleast_1d(self.values))
        if not values or min(values) < 1:
            raise DomainError("volumes must be positive")
        object.__setattr__(self, "values", values)
        if self.probs is not None:
            p = np.asarray(self.probs, dtype=float)
            if len(p) != len(values) or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
                raise DomainError("volume probabilities must match values and sum to 1")
            object.__setattr__(self, "probs", tuple(p / p.sum()))
        elif len(values) != 1:
            raise DomainError("several volumes need probabilities")

    @classmethod
    def constant(cls, v: int) -> "VolumeSource":
        return cls((v,))

    @property
    def v_max(self) -> int:
        return max(self.values)

    def draw(self, rng) -> int:
        if self.probs is None:
            return self.values[0]
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        return self.values[int(np.searchsorted(cdf, rng.random(), side="right"))]

    def to_dict(self):
        if self.probs is None:
            return self.values[0]
        return {"values": list(self.values), "probs": list(self.probs)}

    @classmethod
    def from_obj(cls, obj) -> "VolumeSource":
        if isinstance(obj, VolumeSource):
            return obj
        if isinstance(obj, dict):
            return cls(tuple(obj["values"]), tuple(obj["probs"]))
        return cls.constant(int(obj))


@dataclass(eq=False)
class SimConfig:
    venues: Sequence[VenueModel]
    volume: Union[VolumeSource, int] = 1000
    episodes: int = 2000
    trials: int = 1
    seed: int = 0
    half_life_cap: int = 1000
    smoothing: float = 0.99
    half_life_every: int = 1

    def __post_init__(self):
        self.venues = [VenueModel.from_dict(m) if isinstance(m, dict) else m for m in self.venues]
        self.volume = VolumeSource.from_obj(self.volume)
        if not self.venues:
            raise DomainError("need at least one venue")
        if self.episodes < 1 or self.trials < 1:
            raise DomainError("episodes and trials must be at least 1")
        if self.half_life_cap < 1 or self.half_life_every < 1:
            raise DomainError("half_life_cap and half_life_every must be at least 1")
        if not 0 <= self.smoothing < 1:
            raise DomainError("smoothing retention must lie in [0, 1)")

    @property
    def n_venues(self) -> int:
        return len(self.venues)

    def to_dict(self) -> dict:
        return {
            "venues": [m.to_dict() for m in self.venues],
            "volume": self.volume.to_dict(),
            "episodes": self.episodes,
            "trials": self.trials,
            "seed": self.seed,
            "half_life_cap": self.half_life_cap,
            "smoothing": self.smoothing,
            "half_life_every": self.half_life_every,
        }


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    allocation: Allocation
    fills: tuple
    filled_fraction: float


def step(venues, alloc, rng) -> list:
    """Draw fresh latent liquidity per venue and return the censored fills."""
    v = alloc.v if isinstance(alloc, Allocation) else np.asarray(alloc, dtype=np.int64)
    if len(v) != len(venues):
        raise DomainError("allocation length must match the number of venues")
    rng = check_random_state(rng)
    u = rng.random(len(venues))
    out = []
    for model, vi, ui in zip(venues, v, u):
        latent = int(model.sample_from_uniform(ui))
        out.append(CensoredSample(int(vi), min(int(vi), latent)))
    return out


def run_episode(config: SimConfig, policy, rng, episode: int = 0):
    """One allocate-fill-observe round. Returns ``(policy, record)``."""
    total = config.volume.draw(rng)
    alloc = policy.decide(total)
    fills = step(config.venues, alloc, rng)
    policy.observe(fills)
    consumed = tuple(f.consumed for f in fills)
    return policy, EpisodeRecord(episode, alloc, consumed, sum(consumed) / total)


def order_half_life(config: SimConfig, policy, total: int, rng) -> float:
    """Resubmission steps until more than half of ``total`` has executed.

    The policy is only asked to decide; it does not observe these fills.
    Returns ``inf`` when ``config.half_life_cap`` steps do not suffice.
    """
    total = check_volume(total, "total")
    if total < 1:
        raise DomainError("total must be at least 1")
    filled = 0
    for n_steps in range(1, config.half_life_cap + 1):
        alloc = policy.decide(total - filled)
        filled += sum(f.consumed for f in step(config.venues, alloc, rng))
        if 2 * filled > total:
            return n_steps
    return INFINITE


@dataclass
class TrialResult:
    filled_fraction: np.ndarray
    half_life: Optional[np.ndarray] = None


def trial_streams(seed: int, trial: int):
    """Independent (episode, evaluation) generators for one trial."""
    episode_ss, eval_ss = np.random.SeedSequence([seed, trial]).spawn(2)
    return np.random.default_rng(episode_ss), np.random.default_rng(eval_ss)


def run_trial(config: SimConfig, template, trial: int, half_life: bool = False) -> TrialResult:
    policy = clone(template)
    rng, eval_rng = trial_streams(config.seed, trial)
    frac = np.empty(config.episodes)
    hl = [] if half_life else None
    for ep in range(config.episodes):
        if half_life and ep % config.half_life_every == 0:
            hl.append(order_half_life(config, policy, config.volume.draw(eval_rng), eval_rng))
        policy, record = run_episode(config, policy, rng, ep)
        frac[ep] = record.filled_fraction
    return TrialResult(frac, None if hl is None else np.array(hl, dtype=float))


def smooth(values: np.ndarray, retention: float) -> np.ndarray:
    """Exponential moving average ``s_t = r s_{t-1} + (1 - r) x_t``, seeded with ``x_0``."""
    out = np.empty(len(values))
    acc = values[0]
    for i, x in enumerate(values):
        acc = x if i == 0 else retention * acc + (1 - retention) * x
        out[i] = acc
    return out


@dataclass
class LearningCurve:
    """Per-episode mean over trials, its smoothed version and standard error.

    ``per_trial`` keeps the raw ``(trials, points)`` matrix.
    """

    episode: np.ndarray
    per_trial: np.ndarray
    retention: float = 0.99
    mean: np.ndarray = field(init=False)
    smoothed: np.ndarray = field(init=False)
    stderr: np.ndarray = field(init=False)

    def __post_init__(self):
        data = self.per_trial
        n = data.shape[0]
        with np.errstate(invalid="ignore"):
            self.mean = data.mean(axis=0)
            if n > 1:
                self.stderr = data.std(axis=0, ddof=1) / math.sqrt(n)
            else:
                self.stderr = np.zeros(data.shape[1])
        self.stderr = np.where(np.isfinite(self.mean), self.stderr, np.inf)
        self.smoothed = smooth(self.mean, self.retention)

    def final_window(self, points: int = 50):
        """Mean of the last ``points`` curve points and its across-trial standard error."""
        per_trial = self.per_trial[:, -points:].mean(axis=1)
        mean = float(per_trial.mean())
        n = len(per_trial)
        if n < 2 or not np.isfinite(mean):
            return mean, (0.0 if n < 2 else math.inf)
        return mean, float(per_trial.std(ddof=1) / math.sqrt(n))


@dataclass
class ExperimentResult:
    filled_fraction: LearningCurve
    half_life: Optional[LearningCurve] = None


def run_experiment(config: SimConfig, template, half_life: bool = False) -> ExperimentResult:
    """Run ``config.trials`` independent trials of ``config.episodes`` episodes each.

    Trial ``k`` draws from a stream derived from ``(config.seed, k)`` only, so
    results do not depend on the order trials are executed in.
    """
    trials = [run_trial(config, template, k, half_life) for k in range(config.trials)]
    frac = LearningCurve(np.arange(1, config.episodes + 1),
                         np.vstack([t.filled_fraction for t in trials]), config.smoothing)
    hl = None
    if half_life:
        points = np.arange(0, config.episodes, config.half_life_every) + 1
        hl = LearningCurve(points, np.vstack([t.half_life for t in trials]), config.smoothing)
    return ExperimentResult(frac, hl)

"""Kaplan-Meier tail estimation from censored fills, with the optimistic cutoff."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DomainError, check_samples
from .core import CensoredSample, TailCurve

DEFAULT_EXPLORE_CONST = 128.0


@dataclass(eq=False)
class VenueCounters:
    """Direct-observation counts ``d[s]`` and opportunity counts ``n[s]``.

    ``d[s]`` counts fills with ``consumed == s < submitted``; ``n[s]`` counts
    fills with ``consumed >= s`` and ``submitted > s``.
    """

    s_max: int
    d: np.ndarray = field(default=None)
    n: np.ndarray = field(default=None)
    total_obs: int = 0

    def __post_init__(self):
        if self.s_max < 0:
            raise DomainError("s_max must be nonnegative")
        size = self.s_max + 1
        self.d = np.zeros(size, np.int64) if self.d is None else np.asarray(self.d, np.int64)
        self.n = np.zeros(size, np.int64) if self.n is None else np.asarray(self.n, np.int64)
        if self.d.shape != (size,) or self.n.shape != (size,):
            raise DomainError(f"count arrays must have length s_max+1={size}")

    def ingest(self, sample) -> "VenueCounters":
        v, r = int(sample[0]), int(sample[1])
        if v > self.s_max:
            raise DomainError(f"submitted volume {v} exceeds s_max={self.s_max}")
        if not 0 <= r <= v:
            raise DomainError(f"need 0 <= consumed <= submitted, got ({v}, {r})")
        # indicator r >= s and v > s holds for s = 0..min(r, v-1)
        self.n[: min(r, v - 1) + 1] += 1
        if r < v:
            self.d[r] += 1
        self.total_obs += 1
        return self

    def ingest_many(self, X) -> "VenueCounters":
        """Vectorized equivalent of calling :meth:`ingest` on every row of ``X``."""
        X = check_samples(X, s_max=self.s_max)
        if len(X) == 0:
            return self
        v, r = X[:, 0], X[:, 1]
        hi = np.minimum(r, v - 1)
        live = hi >= 0
        # difference array: +1 on [0, hi]
        diff = np.bincount(hi[live] + 1, minlength=self.s_max + 2)
        self.n += int(live.sum()) - np.cumsum(diff)[: self.s_max + 1]
        direct = r < v
        self.d += np.bincount(r[direct], minlength=self.s_max + 1)[: self.s_max + 1]
        self.total_obs += len(X)
        return self

    def copy(self) -> "VenueCounters":
        return VenueCounters(self.s_max, self.d.copy(), self.n.copy(), self.total_obs)

    def to_dict(self, venue_id=None) -> dict:
        return {
            "venue_id": venue_id,
            "s_max": self.s_max,
            "total_obs": self.total_obs,
            "d": self.d.tolist(),
            "n": self.n.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VenueCounters":
        return cls(int(data["s_max"]), data["d"], data["n"], int(data.get("total_obs", 0)))


def ingest(counters: VenueCounters, sample: CensoredSample) -> VenueCounters:
    return counters.ingest(sample)


def _km_rows(d: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Kaplan-Meier curves for stacked count rows; last axis is ``s``."""
    hazard = np.divide(d, n, out=np.zeros(d.shape), where=n > 0)
    t = np.empty(d.shape[:-1] + (d.shape[-1] + 1,))
    t[..., 0] = 1.0
    np.cumprod(1.0 - hazard, axis=-1, out=t[..., 1:])
    # nothing above s_max is ever submitted, so no mass is attributed past it
    t[..., -1] = 0.0
    return t


def km_tail(counters: VenueCounters) -> TailCurve:
    """Kaplan-Meier tail curve on ``0..s_max+1``; hazards with no opportunity are zero."""
    return TailCurve.adopt(_km_rows(counters.d, counters.n))


def km_tail_exact(counters: VenueCounters) -> list:
    """The same curve as :func:`km_tail` in exact rational arithmetic."""
    t = [Fraction(1)]
    for d, n in zip(counters.d.tolist(), counters.n.tolist()):
        t.append(t[-1] * (1 - Fraction(d, n)) if n else t[-1])
    t[-1] = Fraction(0)
    return t


@lru_cache(maxsize=64)
def _thresholds(top, epsilon, delta, v_cap, explore_const):
    """Opportunity counts needed at ``s - 1`` for ``s = 1..top``."""
    s = np.arange(1, top + 1, dtype=float)
    need = explore_const * (s * v_cap / epsilon) ** 2 * math.log(2 * v_cap / delta)
    need.setflags(write=False)
    return need


def _check_params(epsilon, delta, v_cap, explore_const):
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    if v_cap < 1:
        raise DomainError("v_cap must be at least 1")
    if not explore_const > 0:
        raise DomainError("explore_const must be positive")


def _cutoff_rows(n: np.ndarray, epsilon, delta, v_cap, explore_const) -> np.ndarray:
    _check_params(epsilon, delta, v_cap, explore_const)
    n = np.atleast_2d(n)
    top = min(v_cap, n.shape[-1])
    need = _thresholds(top, float(epsilon), float(delta), int(v_cap), float(explore_const))
    ok = n[:, :top] >= need
    # cutoff is the largest qualifying s, i.e. one past the last qualifying index
    last = top - np.argmax(ok[:, ::-1], axis=1)
    return np.where(ok.any(axis=1), last, 0)


def cutoff(counters: VenueCounters, epsilon: float, delta: float, v_cap: int,
           explore_const: float = DEFAULT_EXPLORE_CONST) -> int:
    """Largest ``s <= v_cap`` with ``s == 0`` or enough opportunities at ``s - 1``."""
    return int(_cutoff_rows(counters.n, epsilon, delta, v_cap, explore_const)[0])


def _optimistic_rows(d, n, epsilon, delta, v_cap, explore_const):
    t = np.atleast_2d(_km_rows(d, n))
    c = _cutoff_rows(n, epsilon, delta, v_cap, explore_const)
    rows = np.flatnonzero((c < v_cap) & (c + 1 < t.shape[1]))
    t[rows, c[rows] + 1] = t[rows, c[rows]]
    return t, c


def optimistic_km(counters: VenueCounters, epsilon: float, delta: float, v_cap: int,
                  explore_const: float = DEFAULT_EXPLORE_CONST) -> TailCurve:
    """KM curve with the unit just past the cutoff raised to the cutoff's value."""
    t, c = _optimistic_rows(counters.d, counters.n, epsilon, delta, v_cap, explore_const)
    return TailCurve.adopt(t[0], cutoff=int(c[0]))


def concentration_halfwidth(counters: VenueCounters, delta: float, v_cap: int) -> np.ndarray:
    """Per-``s`` deviation bound ``s * sqrt(2 ln(2V/delta) / n[s-1])``.

    Entry 0 is 0; entries whose opportunity count is zero are ``inf``.
    """
    s = np.arange(counters.s_max + 2, dtype=float)
    prev = np.concatenate([[np.inf], counters.n.astype(float)])
    with np.errstate(divide="ignore"):
        width = s * np.sqrt(2 * math.log(2 * v_cap / delta) / prev)
    width[0] = 0.0
    return width


def save_checkpoint(path, counters_by_venue: dict) -> None:
    payload = [c.to_dict(venue_id=vid) for vid, c in counters_by_venue.items()]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"venues": payload}, fh)


def load_checkpoint(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return {entry["venue_id"]: VenueCounters.from_dict(entry) for entry in payload["venues"]}


class KaplanMeierTail(BaseEstimator):
    """Estimator wrapper: fit censored ``(submitted, consumed)`` pairs, expose the curve.

    Parameters
    ----------
    v_cap : int
        Largest volume ever submitted; counters are sized ``v_cap + 1``.
    epsilon, delta, explore_const : float
        Cutoff parameters. Ignored when ``optimistic`` is False.
    optimistic : bool
        Apply the cutoff modification to the returned curve.

    Attributes
    ----------
    counters_ : VenueCounters
    tail_ : TailCurve
    cutoff_ : int or None
    """

    def __init__(self, v_cap, epsilon=1.0, delta=0.05, explore_const=DEFAULT_EXPLORE_CONST,
                 optimistic=True):
        self.v_cap = v_cap
        self.epsilon = epsilon
        self.delta = delta
        self.explore_const = explore_const
        self.optimistic = optimistic

    def fit(self, X, y=None):
        self.counters_ = VenueCounters(self.v_cap)
        return self.partial_fit(X)

    def partial_fit(self, X, y=None):
        if not hasattr(self, "counters_"):
            self.counters_ = VenueCounters(self.v_cap)
        self.counters_.ingest_many(X)
        if self.optimistic:
            self.tail_ = optimistic_km(self.counters_, self.epsilon, self.delta, self.v_cap,
                                       self.explore_const)
        else:
            self.tail_ = km_tail(self.counters_)
        self.cutoff_ = self.tail_.cutoff
        return self

    def predict(self, s):
        """Estimated ``P(latent >= s)`` for each requested volume."""
        check_is_fitted(self, "tail_")
        s = np.asarray(s, dtype=np.int64)
        t = np.append(self.tail_.t, 0.0)
        return t[np.clip(s, 0, len(t) - 1)]

"""Allocation policies: Kaplan-Meier learner, parametric learner, ideal, uniform, bandit.

Every policy has the same two-call loop: ``decide(total)`` returns an
:class:`Allocation`, then ``observe(fills)`` receives one
``(submitted, consumed)`` pair per venue. Constructor arguments are plain
parameters so ``sklearn.base.clone`` yields a fresh, unobserved policy.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import DomainError, InsufficientDataError, check_volume
from .allocator import greedy_allocate
from .core import Allocation, TailCurve
from .km import DEFAULT_EXPLORE_CONST, VenueCounters, _cutoff_rows, _optimistic_rows
from .models import Family, VenueModel, fit_mle

DEFAULT_ALPHA = 1.05
WEIGHT_CEILING = 1e100


def _check_fills(fills, k):
    fills = np.asarray(fills, dtype=np.int64).reshape(-1, 2)
    if len(fills) != k:
        raise DomainError(f"expected {k} fills, got {len(fills)}")
    return fills


class Policy(BaseEstimator):
    n_venues: int

    def decide(self, total: int) -> Allocation:
        raise NotImplementedError

    def observe(self, fills) -> "Policy":
        _check_fills(fills, self.n_venues)
        return self

    def current_tails(self) -> list:
        raise DomainError(f"{type(self).__name__} does not keep tail estimates")


class UniformPolicy(Policy):
    """Equal split; the remainder goes one unit each to the lowest-index venues."""

    def __init__(self, n_venues):
        self.n_venues = n_venues

    def decide(self, total):
        total = check_volume(total, "total")
        base, extra = divmod(total, self.n_venues)
        v = np.full(self.n_venues, base, dtype=np.int64)
        v[:extra] += 1
        return Allocation(v)


class IdealPolicy(Policy):
    """Greedy allocation on the true venue tails."""

    def __init__(self, venues):
        self.venues = venues

    @property
    def n_venues(self):
        return len(self.venues)

    def current_tails(self):
        return [VenueModel.from_dict(m).tail if isinstance(m, dict) else m.tail
                for m in self.venues]

    def decide(self, total):
        total = check_volume(total, "total")
        cache = self.__dict__.setdefault("_decisions", {})
        if total not in cache:
            tails = [t.padded(total + 1) for t in self.current_tails()]
            cache[total] = greedy_allocate(total, tails)
        return cache[total]


def largest_remainder(total: int, weights) -> np.ndarray:
    """Integer apportionment of ``total`` proportional to ``weights``.

    Floors of the exact quotas first; leftover units go to the largest
    fractional parts, ties to the lowest index. Quotas are rational so ties
    are detected exactly.
    """
    w = [Fraction(float(x)) for x in weights]
    denom = sum(w)
    quota = [total * x / denom for x in w]
    v = [q.numerator // q.denominator for q in quota]
    order = sorted(range(len(w)), key=lambda i: (v[i] - quota[i], i))
    for i in order[: total - sum(v)]:
        v[i] += 1
    return np.array(v, dtype=np.int64)


class BanditPolicy(Policy):
    """Weight-proportional allocation; a venue's weight grows by ``alpha`` on any fill.

    Attributes
    ----------
    weights_ : ndarray of shape (n_venues,)
    """

    def __init__(self, n_venues, alpha=DEFAULT_ALPHA):
        self.n_venues = n_venues
        self.alpha = alpha

    @property
    def weights_(self):
        if "_weights" not in self.__dict__:
            if not self.alpha > 1:
                raise DomainError("alpha must exceed 1")
            self._weights = np.ones(self.n_venues)
        return self._weights

    @weights_.setter
    def weights_(self, value):
        w = np.asarray(value, dtype=float)
        if w.shape != (self.n_venues,) or np.any(w <= 0):
            raise DomainError("weights must be positive, one per venue")
        self._weights = w

    def decide(self, total):
        total = check_volume(total, "total")
        return Allocation(largest_remainder(total, self.weights_))

    def observe(self, fills):
        fills = _check_fills(fills, self.n_venues)
        w = self.weights_
        w[fills[:, 1] > 0] *= self.alpha
        if w.max() > WEIGHT_CEILING:
            w /= w.max()
        return self


class KMLearner(Policy):
    """Estimate-allocate loop on optimistic Kaplan-Meier tails.

    Parameters
    ----------
    n_venues : int
    v_cap : int
        Largest volume that will ever be allocated.
    epsilon, delta, explore_const : float
        Cutoff parameters; ``delta`` is split evenly across venues.

    Attributes
    ----------
    counters_ : list of VenueCounters
    """

    def __init__(self, n_venues, v_cap, epsilon=1.0, delta=0.05,
                 explore_const=DEFAULT_EXPLORE_CONST):
        self.n_venues = n_venues
        self.v_cap = v_cap
        self.epsilon = epsilon
        self.delta = delta
        self.explore_const = explore_const

    @property
    def counters_(self):
        if "_counters" not in self.__dict__:
            # per-venue counters are row views of one matrix so tails compute in one pass
            shape = (self.n_venues, self.v_cap + 1)
            self._d, self._n = np.zeros(shape, np.int64), np.zeros(shape, np.int64)
            self._counters = [VenueCounters(self.v_cap, self._d[i], self._n[i])
                              for i in range(self.n_venues)]
        return self._counters

    def _params(self):
        return self.epsilon, self.delta / self.n_venues, self.v_cap, self.explore_const

    def cutoffs(self):
        self.counters_
        return [int(c) for c in _cutoff_rows(self._n, *self._params())]

    def current_tails(self):
        self.counters_
        t, c = _optimistic_rows(self._d, self._n, *self._params())
        return [TailCurve.adopt(row, cutoff=int(ci)) for row, ci in zip(t, c)]

    def decide(self, total):
        total = check_volume(total, "total")
        if total > self.v_cap:
            raise DomainError(f"total {total} exceeds v_cap={self.v_cap}")
        return greedy_allocate(total, self.current_tails())

    def observe(self, fills):
        fills = _check_fills(fills, self.n_venues)
        for counters, sample in zip(self.counters_, fills):
            counters.ingest(sample)
        return self


class ParametricLearner(Policy):
    """Estimate-allocate loop on maximum-likelihood Zero-Bin fits.

    Venues without informative data keep an all-ones tail, which the greedy
    step treats as maximally attractive. Refits happen every
    ``refit_every`` observations.

    Attributes
    ----------
    observations_ : list of list of (submitted, consumed)
    models_ : list of VenueModel or None
    """

    def __init__(self, n_venues, v_cap, family="zb-power-law", refit_every=1):
        self.n_venues = n_venues
        self.v_cap = v_cap
        self.family = family
        self.refit_every = refit_every

    def _state(self):
        if "_obs" not in self.__dict__:
            self._obs = [[] for _ in range(self.n_venues)]
            self._models = [None] * self.n_venues
            self._tails = [TailCurve(np.ones(self.v_cap + 1))] * self.n_venues
            self._seen = 0
        return self

    @property
    def observations_(self):
        return self._state()._obs

    @property
    def models_(self):
        return self._state()._models

    def refit(self):
        self._state()
        family = Family.parse(self.family)
        for i, obs in enumerate(self._obs):
            try:
                model = fit_mle(obs, family, self.v_cap).model
            except InsufficientDataError:
                continue
            self._models[i] = model
            self._tails[i] = model.tail
        return self

    def current_tails(self):
        return list(self._state()._tails)

    def decide(self, total):
        total = check_volume(total, "total")
        if total > self.v_cap:
            raise DomainError(f"total {total} exceeds v_cap={self.v_cap}")
        return greedy_allocate(total, self.current_tails())

    def observe(self, fills):
        fills = _check_fills(fills, self.n_venues)
        self._state()
        for obs, (v, r) in zip(self._obs, fills):
            obs.append((int(v), int(r)))
        self._seen += 1
        if self._seen % self.refit_every == 0:
            self.refit()
        return self


POLICY_KINDS = {
    "learner-km": KMLearner,
    "learner-parametric": ParametricLearner,
    "ideal": IdealPolicy,
    "uniform": UniformPolicy,
    "bandit": BanditPolicy,
}

"""Zero-Bin venue distributions: pmf, tails, sampling and censored MLE fits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DomainError, InsufficientDataError, check_random_state, check_samples
from .core import TailCurve
from .km import VenueCounters, km_tail

PROB_FLOOR = 1e-12
POWER_LAW_RANGE = (-3.0, 3.0)
RATE_FLOOR = 1e-6
SEARCH_TOL = 1e-6


class Family(str, Enum):
    ZB_UNIFORM = "zb-uniform"
    ZB_POWER_LAW = "zb-power-law"
    ZB_POISSON = "zb-poisson"
    ZB_EXPONENTIAL = "zb-exponential"
    NONPARAMETRIC = "nonparametric"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("_", "-"))
        except ValueError:
            names = ", ".join(f.value for f in cls)
            raise DomainError(f"unknown family {value!r}; expected one of {names}") from None


def _body_logpmf(family: Family, shape, s_max: int) -> np.ndarray:
    """Normalized log-probabilities of the body on ``1..s_max``."""
    s = np.arange(1, s_max + 1, dtype=float)
    if family is Family.ZB_UNIFORM:
        raw = np.zeros(s_max)
    elif family is Family.ZB_POWER_LAW:
        raw = -shape * np.log(s)
    elif family is Family.ZB_POISSON:
        raw = s * math.log(shape) - gammaln(s + 1)
    elif family is Family.ZB_EXPONENTIAL:
        raw = -shape * s
    else:
        raise DomainError(f"{family.value} has no parametric body")
    return raw - logsumexp(raw)


def _search_range(family: Family, s_max: int):
    if family is Family.ZB_POWER_LAW:
        return POWER_LAW_RANGE
    return (RATE_FLOOR, float(s_max))


@dataclass(frozen=True, eq=False)
class VenueModel:
    """Discrete venue liquidity on ``0..s_max`` with an explicit zero bin.

    Parametric families put ``zero_prob`` at 0 and spread the rest over the
    normalized body on ``1..s_max``. ``NONPARAMETRIC`` takes an explicit
    probability table in ``table``.
    """

    family: Family
    s_max: int
    zero_prob: float = 0.0
    shape: Optional[float] = None
    table: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if self.family is Family.NONPARAMETRIC:
            if self.table is None:
                raise DomainError("nonparametric model needs a probability table")
            table = np.asarray(self.table, dtype=float)
            if self.s_max is None:
                object.__setattr__(self, "s_max", len(table) - 1)
            if len(table) != self.s_max + 1:
                raise DomainError("table length must be s_max + 1")
            if np.any(table < 0) or abs(table.sum() - 1.0) > 1e-9:
                raise DomainError("table must be nonnegative and sum to 1")
            object.__setattr__(self, "table", tuple(float(x) for x in table / table.sum()))
            object.__setattr__(self, "zero_prob", self.table[0])
            return
        if self.s_max < 1:
            raise DomainError("s_max must be at least 1")
        if not 0.0 <= self.zero_prob <= 1.0:
            raise DomainError("zero_prob must lie in [0, 1]")
        if self.family is Family.ZB_UNIFORM:
            object.__setattr__(self, "shape", None)
        elif self.shape is None:
            raise DomainError(f"{self.family.value} needs a shape parameter")
        elif self.family in (Family.ZB_POISSON, Family.ZB_EXPONENTIAL) and not self.shape > 0:
            raise DomainError("rate must be positive")

    @classmethod
    def point_mass(cls, at: int, zero_prob: float = 0.0) -> "VenueModel":
        """Mass ``zero_prob`` at 0 and the rest at ``at``."""
        table = np.zeros(at + 1)
        table[0] += zero_prob
        table[at] += 1.0 - zero_prob
        return cls(Family.NONPARAMETRIC, at, table=tuple(table))

    @cached_property
    def probs(self) -> np.ndarray:
        if self.family is Family.NONPARAMETRIC:
            p = np.array(self.table)
        else:
            body = np.exp(_body_logpmf(self.family, self.shape, self.s_max))
            p = np.concatenate([[self.zero_prob], (1.0 - self.zero_prob) * body / body.sum()])
        p.setflags(write=False)
        return p

    @cached_property
    def _cdf(self) -> np.ndarray:
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        return cdf

    @cached_property
    def tail(self) -> TailCurve:
        t = np.zeros(self.s_max + 2)
        t[: self.s_max + 1] = np.cumsum(self.probs[::-1])[::-1]
        np.minimum(t, 1.0, out=t)
        t[0] = 1.0
        return TailCurve(t)

    def pmf(self, s: int) -> float:
        if not 0 <= s <= self.s_max:
            raise DomainError(f"s={s} outside support 0..{self.s_max}")
        return float(self.probs[s])

    def tail_curve(self) -> TailCurve:
        return self.tail

    def sample(self, rng=None, size=None):
        """Inverse-CDF draws; returns an int, or an array when ``size`` is given."""
        u = check_random_state(rng).random(size)
        out = np.searchsorted(self._cdf, u, side="right")
        return int(out) if size is None else out.astype(np.int64)

    def sample_from_uniform(self, u):
        return np.searchsorted(self._cdf, u, side="right")

    def log_likelihood(self, X, floor: float = 0.0) -> float:
        """Sum of ``log P(r)`` over direct fills and ``log T(v)`` over censored ones."""
        X = check_samples(X)
        return float(np.sum(_per_sample_loglik(self, X, floor)))

    def to_dict(self) -> dict:
        out = {"family": self.family.value, "s_max": self.s_max}
        if self.family is Family.NONPARAMETRIC:
            out["pmf"] = list(self.table)
        else:
            out["zero_prob"] = self.zero_prob
            if self.shape is not None:
                out["shape"] = self.shape
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "VenueModel":
        family = Family.parse(data["family"])
        if family is Family.NONPARAMETRIC:
            table = data["pmf"]
            return cls(family, data.get("s_max", len(table) - 1), table=tuple(table))
        return cls(family, int(data["s_max"]), float(data.get("zero_prob", 0.0)),
                   data.get("shape"))

    def __repr__(self):
        if self.family is Family.NONPARAMETRIC:
            return f"VenueModel(nonparametric, s_max={self.s_max})"
        return (f"VenueModel({self.family.value}, zero_prob={self.zero_prob:g}, "
                f"shape={self.shape}, s_max={self.s_max})")


def pmf(model: VenueModel, s: int) -> float:
    return model.pmf(s)


def tail_curve(model: VenueModel) -> TailCurve:
    return model.tail


def sample(model: VenueModel, rng=None, size=None):
    return model.sample(rng, size)


def _per_sample_loglik(model: VenueModel, X: np.ndarray, floor: float) -> np.ndarray:
    v, r = X[:, 0], X[:, 1]
    p = np.append(model.probs, 0.0)
    t = np.append(model.tail.t, 0.0)
    top = len(p) - 1
    direct = r < v
    prob = np.where(direct, p[np.minimum(r, top)], t[np.minimum(v, len(t) - 1)])
    with np.errstate(divide="ignore"):
        return np.log(np.maximum(prob, floor))


def log_loss(model: VenueModel, samples, floor: float = PROB_FLOOR) -> float:
    """Mean negative log-likelihood per sample, each probability floored at ``floor``."""
    X = check_samples(samples)
    if len(X) == 0:
        raise DomainError("log_loss needs at least one sample")
    return float(-np.mean(_per_sample_loglik(model, X, floor)))


def golden_section_max(f, lo: float, hi: float, tol: float = SEARCH_TOL) -> float:
    """Maximizer of a unimodal ``f`` on ``[lo, hi]``."""
    inv_phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    x = (a + b) / 2
    # the interior search cannot land exactly on an endpoint; compare explicitly
    return max((lo, x, hi), key=f)


@dataclass(frozen=True)
class FitResult:
    model: VenueModel
    log_likelihood: float
    flagged: bool
    reason: str = ""


def _counts(X: np.ndarray, s_max: int):
    v, r = X[:, 0], X[:, 1]
    direct = r < v
    censored = (r == v) & (v > 0)
    dc = np.bincount(r[direct], minlength=s_max + 1)
    cc = np.bincount(v[censored], minlength=s_max + 1)
    return dc, cc


def _body_loglik(family, shape, s_max, dc, cc) -> float:
    logb = _body_logpmf(family, shape, s_max)
    # log of B(v) = sum_{s >= v} b(s), for v = 1..s_max
    log_tail = np.logaddexp.accumulate(logb[::-1])[::-1]
    ll = 0.0
    if dc[1:].any():
        ll += float(dc[1:] @ np.where(dc[1:] > 0, logb, 0.0))
    if cc[1:].any():
        ll += float(cc[1:] @ np.where(cc[1:] > 0, log_tail, 0.0))
    return ll


def _xlogy(x, y):
    return 0.0 if x == 0 else x * math.log(y)


def fit_mle(samples, family, s_max: Optional[int] = None) -> FitResult:
    """Maximum-likelihood member of ``family`` for censored ``(submitted, consumed)`` data.

    The Zero-Bin likelihood factors: the zero-bin MLE is the fraction of
    informative fills (``submitted > 0``) that executed nothing, and the body
    parameter is found by golden-section search.
    """
    family = Family.parse(family)
    X = check_samples(samples)
    informative = X[X[:, 0] > 0]
    if len(informative) == 0:
        raise InsufficientDataError("no sample with submitted > 0")
    if s_max is None:
        s_max = int(X[:, 0].max())
    X = check_samples(X, s_max=s_max)

    if family is Family.NONPARAMETRIC:
        counters = VenueCounters(s_max).ingest_many(X)
        tail = km_tail(counters).t
        table = np.maximum(tail[:-1] - tail[1:], 0.0)
        table /= table.sum()
        model = VenueModel(family, s_max, table=tuple(table))
        return FitResult(model, model.log_likelihood(X), False)

    dc, cc = _counts(informative, s_max)
    n_inf = len(informative)
    n_zero = int(dc[0])
    zero_prob = n_zero / n_inf
    lo, hi = _search_range(family, s_max)
    flagged, reason = False, ""
    if family is Family.ZB_UNIFORM:
        shape = None
        body_ll = _body_loglik(family, None, s_max, dc, cc)
    elif not (dc[1:].any() or cc[1:].any()):
        shape = (lo + hi) / 2
        body_ll = 0.0
        flagged, reason = True, "body unidentified: no positive fills"
    else:
        shape = golden_section_max(lambda x: _body_loglik(family, x, s_max, dc, cc), lo, hi)
        body_ll = _body_loglik(family, shape, s_max, dc, cc)
        if min(shape - lo, hi - shape) <= 10 * SEARCH_TOL:
            flagged, reason = True, "shape at search boundary"
    ll = _xlogy(n_zero, zero_prob) + _xlogy(n_inf - n_zero, 1.0 - zero_prob) + body_ll
    model = VenueModel(family, s_max, zero_prob, shape)
    return FitResult(model, ll, flagged, reason)


class CensoredMLE(BaseEstimator):
    """Fit a Zero-Bin venue model (or raw Kaplan-Meier) to censored fills.

    ``X`` is an ``(n, 2)`` array of ``(submitted, consumed)``. ``score``
    returns the negative mean log-loss so larger is better, following the
    usual estimator convention.
    """

    def __init__(self, family="zb-power-law", s_max=None, floor=PROB_FLOOR):
        self.family = family
        self.s_max = s_max
        self.floor = floor

    def fit(self, X, y=None):
        result = fit_mle(X, self.family, self.s_max)
        self.model_ = result.model
        self.log_likelihood_ = result.log_likelihood
        self.flagged_ = result.flagged
        self.zero_prob_ = result.model.zero_prob
        self.shape_ = result.model.shape
        return self

    def score(self, X, y=None):
        check_is_fitted(self, "model_")
        return -log_loss(self.model_, X, self.floor)

    def tail_curve(self) -> TailCurve:
        check_is_fitted(self, "model_")
        return self.model_.tail

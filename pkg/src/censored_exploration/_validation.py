"""Input validation helpers shared by the estimators and the simulator."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array


class DomainError(ValueError):
    """Raised when an argument lies outside an operation's domain."""


class InsufficientDataError(ValueError):
    """Raised when a fit has no informative observations."""


def check_samples(X, s_max=None):
    """Validate censored fill data.

    ``X`` is an ``(n, 2)`` array-like of ``(submitted, consumed)`` integer
    pairs. Returns an ``int64`` array. If ``s_max`` is given, every
    submitted volume must be at most ``s_max``.
    """
    X = check_array(X, dtype=None, ensure_2d=True, ensure_min_samples=0)
    if X.shape[1] != 2:
        raise DomainError(f"expected (submitted, consumed) pairs, got {X.shape[1]} columns")
    if X.size and not np.all(np.equal(np.mod(X, 1), 0)):
        raise DomainError("volumes must be integers")
    X = X.astype(np.int64)
    submitted, consumed = X[:, 0], X[:, 1]
    if np.any(consumed < 0) or np.any(consumed > submitted):
        raise DomainError("need 0 <= consumed <= submitted for every sample")
    if s_max is not None and X.size and submitted.max() > s_max:
        raise DomainError(f"submitted volume {submitted.max()} exceeds s_max={s_max}")
    return X


def check_volume(v, name="volume"):
    if not isinstance(v, numbers.Integral) or isinstance(v, bool):
        if isinstance(v, np.integer):
            v = int(v)
        else:
            raise DomainError(f"{name} must be an integer, got {v!r}")
    if v < 0:
        raise DomainError(f"{name} must be nonnegative, got {v}")
    return int(v)


def check_random_state(rng):
    """Return a ``numpy.random.Generator`` for ``rng`` (seed, Generator or None)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)

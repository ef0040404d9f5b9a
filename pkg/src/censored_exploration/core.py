"""Value types shared across the package."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ._validation import DomainError


class CensoredSample(NamedTuple):
    """One fill report from one venue: ``consumed = min(submitted, latent)``."""

    submitted: int
    consumed: int

    @property
    def censored(self) -> bool:
        return self.consumed == self.submitted and self.submitted > 0

    @property
    def direct(self) -> bool:
        return self.consumed < self.submitted


@dataclass(frozen=True, eq=False)
class TailCurve:
    """Tail probabilities ``t[s] = P(latent >= s)`` for ``s = 0..len(t)-1``.

    ``cutoff`` is set only on curves produced by the optimistic estimator.
    Values past the end of ``t`` are treated as zero.
    """

    t: np.ndarray
    cutoff: Optional[int] = None

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        t.setflags(write=False)
        object.__setattr__(self, "t", t)

    @classmethod
    def adopt(cls, t: np.ndarray, cutoff: Optional[int] = None) -> "TailCurve":
        """Wrap a freshly built float array without copying it."""
        curve = object.__new__(cls)
        t.setflags(write=False)
        object.__setattr__(curve, "t", t)
        object.__setattr__(curve, "cutoff", cutoff)
        return curve

    def __len__(self):
        return len(self.t)

    def __getitem__(self, s):
        return self.t[s]

    def value(self, s: int) -> float:
        return float(self.t[s]) if s < len(self.t) else 0.0

    def padded(self, length: int) -> "TailCurve":
        """Return a copy zero-extended to at least ``length`` entries."""
        if length <= len(self.t):
            return self
        t = np.zeros(length)
        t[: len(self.t)] = self.t
        return TailCurve(t, self.cutoff)

    def pmf(self) -> np.ndarray:
        """Point probabilities ``t[s] - t[s+1]`` (last entry keeps its tail)."""
        return self.t - np.append(self.t[1:], 0.0)

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.t) <= 0))


@dataclass(frozen=True, eq=False)
class Allocation:
    """Integer split of ``total`` units across K venues."""

    v: np.ndarray

    def __post_init__(self):
        v = np.array(self.v, dtype=np.int64)
        if v.ndim != 1:
            raise DomainError("allocation must be one-dimensional")
        if np.any(v < 0):
            raise DomainError("allocation entries must be nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def total(self) -> int:
        return int(self.v.sum())

    def __len__(self):
        return len(self.v)

    def __iter__(self):
        return iter(int(x) for x in self.v)

    def __eq__(self, other):
        if isinstance(other, Allocation):
            other = other.v
        return tuple(self) == tuple(int(x) for x in other)

    def __repr__(self):
        return f"Allocation({tuple(self)})"

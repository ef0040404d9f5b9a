"""Greedy allocation of units across venues by marginal tail probability."""

from __future__ import annotations

import heapq
import itertools

import numpy as np

from ._validation import DomainError, check_volume
from .core import Allocation, TailCurve

BRUTE_FORCE_MAX_TOTAL = 12
BRUTE_FORCE_MAX_VENUES = 4


def _marginals(total: int, tails) -> np.ndarray:
    """K x total matrix of ``T_i(s)`` for ``s = 1..total``."""
    rows = []
    for i, curve in enumerate(tails):
        t = curve.t if isinstance(curve, TailCurve) else np.asarray(curve, dtype=float)
        if len(t) < total + 1:
            raise DomainError(f"tail curve {i} has length {len(t)}, need at least {total + 1}")
        rows.append(t[1 : total + 1])
    return np.array(rows, dtype=float).reshape(len(rows), total)


def _greedy_heap(m: np.ndarray, total: int) -> np.ndarray:
    # unit-by-unit argmax with lowest-index tie-break; heap keys are (-T_i(v_i+1), i)
    v = np.zeros(m.shape[0], dtype=np.int64)
    heap = [(-m[i, 0], i) for i in range(m.shape[0])]
    heapq.heapify(heap)
    for _ in range(total):
        _, i = heapq.heappop(heap)
        v[i] += 1
        if v[i] < total:
            heapq.heappush(heap, (-m[i, v[i]], i))
    return v


def greedy_allocate(total: int, tails) -> Allocation:
    """Place each unit where the next unit's fill probability is largest.

    Ties go to the lowest venue index. For nonincreasing curves the unit
    sequence is a merge of K sorted lists, so the first ``total`` picks are
    the ``total`` largest marginals with ties ordered by venue; that lets
    the allocation be read off a threshold instead of a per-unit loop.
    Non-monotone input falls back to the literal per-unit procedure.
    """
    total = check_volume(total, "total")
    tails = list(tails)
    if not tails:
        raise DomainError("need at least one venue")
    m = _marginals(total, tails)
    k = m.shape[0]
    if total == 0:
        return Allocation(np.zeros(k, dtype=np.int64))
    if total > 1 and np.any(m[:, 1:] > m[:, :-1]):
        return Allocation(_greedy_heap(m, total))
    flat = m.ravel()
    theta = -np.partition(-flat, total - 1)[total - 1]
    above = (m > theta).sum(axis=1)
    ties = (m == theta).sum(axis=1)
    left = total - int(above.sum())
    take = np.minimum(ties, np.maximum(left - np.concatenate([[0], np.cumsum(ties)[:-1]]), 0))
    return Allocation(above + take)


def greedy_allocate_literal(total: int, tails) -> Allocation:
    """Per-unit rescanning version, kept as a reference for the fast path."""
    total = check_volume(total, "total")
    m = _marginals(total, list(tails))
    v = np.zeros(m.shape[0], dtype=np.int64)
    for _ in range(total):
        nxt = np.array([m[i, v[i]] if v[i] < total else -np.inf for i in range(len(v))])
        v[int(np.argmax(nxt))] += 1
    return Allocation(v)


def expected_fill(alloc, tails) -> float:
    """Expected units consumed: ``sum_i sum_{s=1}^{v_i} T_i(s)``."""
    v = alloc.v if isinstance(alloc, Allocation) else np.asarray(alloc, dtype=np.int64)
    tails = list(tails)
    if len(v) != len(tails):
        raise DomainError("allocation and tails disagree on the number of venues")
    parts = []
    for vi, curve in zip(v, tails):
        t = curve.t if isinstance(curve, TailCurve) else np.asarray(curve, dtype=float)
        if vi + 1 > len(t):
            raise DomainError("tail curve shorter than its allocation")
        parts.append(t[1 : vi + 1])
    # np.sum is pairwise
    return float(np.sum(np.concatenate(parts))) if parts else 0.0


def _compositions(total: int, k: int):
    for bars in itertools.combinations(range(total + k - 1), k - 1):
        prev, out = -1, []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + k - 1 - prev - 1)
        yield out


def brute_force_allocate(total: int, tails) -> Allocation:
    """Exhaustive search over all compositions; a test oracle for small instances."""
    total = check_volume(total, "total")
    tails = list(tails)
    if total > BRUTE_FORCE_MAX_TOTAL or len(tails) > BRUTE_FORCE_MAX_VENUES:
        raise DomainError(
            f"brute force limited to total <= {BRUTE_FORCE_MAX_TOTAL} "
            f"and K <= {BRUTE_FORCE_MAX_VENUES}"
        )
    best, best_fill = None, -np.inf
    for comp in _compositions(total, len(tails)):
        fill = expected_fill(np.array(comp), tails)
        if fill > best_fill:
            best, best_fill = comp, fill
    return Allocation(best)


def mean_min_fill(model, v: int) -> float:
    """``E[min(s, v)]`` under the model's pmf, computed directly."""
    v = check_volume(v, "v")
    if v > model.s_max:
        raise DomainError(f"v={v} exceeds s_max={model.s_max}")
    s = np.arange(model.s_max + 1)
    return float(np.sum(model.probs * np.minimum(s, v)))

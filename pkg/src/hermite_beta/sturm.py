"""Eigenvalue counting for symmetric tridiagonal matrices by LDL^T pivots.

For the matrix ``H - t I`` the pivots ``q_1 = d_1 - t``,
``q_k = (d_k - t) - e_{k-1}^2 / q_{k-1}`` have as many negative entries as
``H`` has eigenvalues below ``t``.  A pivot that is exactly zero is replaced
by ``-eps * ||H||_inf``, i.e. counted as negative; this keeps the count
monotone in ``t`` and never divides by zero.

Intervals are half-open, ``(lo, hi]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import TridiagonalModel

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class CountResult:
    lo: float
    hi: float
    count: int


def zero_pivot_guard(norm_inf: float) -> float:
    return EPS * norm_inf if norm_inf > 0 else EPS


def negative_pivots(d, e2, t, guard):
    """Vectorized pivot count.

    ``d`` has shape ``(n, *B)``, ``e2`` shape ``(n-1, *B)``; ``t`` and ``guard``
    broadcast against ``d[0]``.  Returns integer counts of that broadcast shape.
    """
    q = d[0] - t
    q = np.where(q == 0.0, -guard, q)
    count = (q < 0).astype(np.int64)
    for k in range(1, d.shape[0]):
        q = (d[k] - t) - e2[k - 1] / q
        q = np.where(q == 0.0, -guard, q)
        count += q < 0
    return count


def _check_threshold(t):
    if not math.isfinite(t):
        raise ParameterError(f"threshold must be finite, got {t}")


def count_below(model: TridiagonalModel, threshold: float) -> int:
    """Number of eigenvalues of H strictly below ``threshold``."""
    t = float(threshold)
    _check_threshold(t)
    guard = zero_pivot_guard(model.norm_inf())
    d = model.diagonal.tolist()
    e2 = (model.offdiagonal ** 2).tolist()
    q = d[0] - t
    if q == 0.0:
        q = -guard
    count = q < 0
    for k in range(1, len(d)):
        q = (d[k] - t) - e2[k - 1] / q
        if q == 0.0:
            q = -guard
        if q < 0:
            count += 1
    return int(count)


def count_below_many(model: TridiagonalModel, thresholds) -> np.ndarray:
    t = np.asarray(thresholds, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ParameterError("thresholds must be finite")
    guard = zero_pivot_guard(model.norm_inf())
    return negative_pivots(model.diagonal, model.offdiagonal ** 2, t, guard)


def batch_count_below(a, b, beta, thresholds) -> np.ndarray:
    """Counts below ``thresholds[r]`` for each of R raw samples ``a[r], b[r]``.

    ``a`` is ``(R, n)``, ``b`` is ``(R, n-1)``; ``thresholds`` is ``(R,)`` or
    ``(R, m)`` for m thresholds per replica.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = np.asarray(thresholds, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ParameterError("thresholds must be finite")
    rb = math.sqrt(beta)
    d = np.ascontiguousarray(a.T) / rb
    e2 = np.ascontiguousarray(b.T) ** 2 / beta
    absd = np.abs(d)
    rows = absd.copy()
    rows[:-1] += np.sqrt(e2)
    rows[1:] += np.sqrt(e2)
    norm = rows.max(axis=0)
    guard = np.where(norm > 0, EPS * norm, EPS)
    if t.ndim == 2:
        d, e2, guard = d[..., None], e2[..., None], guard[:, None]
    return negative_pivots(d, e2, t, guard)


def count_interval(model: TridiagonalModel, lo: float, hi: float) -> CountResult:
    """Eigenvalues in ``(lo, hi]``."""
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise ParameterError(f"need lo < hi, got ({lo}, {hi})")
    c = count_below(model, hi) - count_below(model, lo)
    return CountResult(lo, hi, c)


def padded_bounds(model: TridiagonalModel) -> tuple[float, float]:
    """Gershgorin interval widened by 1 on each side."""
    glo, ghi = model.gershgorin()
    return glo - 1.0, ghi + 1.0


def eigenvalue_by_index(model: TridiagonalModel, k: int, tol: float) -> float:
    """Lower end ``m`` of a bracket with ``count_below(m) <= k < count_below(m + 2 tol)``.

    ``k`` is 0-based in ascending order.
    """
    n = model.n
    if not 0 <= k < n:
        raise ParameterError(f"k must be in [0, {n}), got {k}")
    if not tol > 0:
        raise ParameterError("tol must be > 0")
    lo, hi = padded_bounds(model)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if count_below(model, mid) <= k:
            lo = mid
        else:
            hi = mid
    return lo


def bisect_all(model: TridiagonalModel, tol: float):
    """Bracket every eigenvalue simultaneously.

    Returns ``(lo, hi, count_lo, count_hi)`` arrays with
    ``count_below(lo[k]) = count_lo[k] <= k < count_hi[k] = count_below(hi[k])``
    and ``hi - lo <= tol`` (or adjacent floats).
    """
    n = model.n
    glo, ghi = padded_bounds(model)
    lo = np.full(n, glo)
    hi = np.full(n, ghi)
    c_lo = np.zeros(n, dtype=np.int64)
    c_hi = np.full(n, n, dtype=np.int64)
    idx = np.arange(n)
    active = np.ones(n, dtype=bool)
    while active.any():
        ai = np.flatnonzero(active)
        mid = 0.5 * (lo[ai] + hi[ai])
        stuck = (mid <= lo[ai]) | (mid >= hi[ai])
        c = count_below_many(model, mid)
        left = (c <= idx[ai]) & ~stuck
        right = (c > idx[ai]) & ~stuck
        lo[ai[left]], c_lo[ai[left]] = mid[left], c[left]
        hi[ai[right]], c_hi[ai[right]] = mid[right], c[right]
        active[ai] = ~stuck & ((hi[ai] - lo[ai]) > tol)
    return lo, hi, c_lo, c_hi

"""Median with nonparametric confidence bounds, success curves and cost grids."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SummaryStats:
    median: float
    lower: float
    upper: float
    n: int
    rank_lower: int
    rank_upper: int


def ci_ranks(n: int, level: float = 0.95) -> tuple[int, int]:
    """1-based order-statistic ranks ``(l, u)`` bracketing the median.

    Picks the narrowest symmetric pair ``u = n + 1 - l`` whose exact binomial
    coverage ``P(l <= B <= n - l)`` with ``B ~ Bin(n, 1/2)`` reaches ``level``;
    when even ``(1, n)`` falls short the full range is returned.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    # integer binomial weights keep the coverage test exact
    weights = [math.comb(n, k) for k in range(n + 1)]
    total = 2 ** n
    need = level * total
    best = 1
    covered = total - weights[0] - weights[n]
    lo = 1
    while lo <= n - lo and covered >= need:
        best = lo
        covered -= weights[lo] + weights[n - lo]
        lo += 1
    return best, max(n + 1 - best, best)


def median_ci(samples, level: float = 0.95) -> SummaryStats:
    """Median and nonparametric confidence bounds; failures enter as ``inf``."""
    x = np.sort(np.asarray(list(samples), dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("median_ci of an empty sample")
    if np.any(np.isnan(x)):
        raise ValueError("samples must not contain NaN")
    mid = n // 2
    med = float(x[mid]) if n % 2 else float(_mid(x[mid - 1], x[mid]))
    lo, hi = ci_ranks(n, level)
    return SummaryStats(med, float(x[lo - 1]), float(x[hi - 1]), n, lo, hi)


def _mid(a: float, b: float) -> float:
    if math.isinf(a) or math.isinf(b):
        return max(a, b)
    return 0.5 * (a + b)


def log_grid(budget: float, points: int = 64, start: float = 1e-3) -> np.ndarray:
    """Log-spaced times from ``start`` to ``budget`` (inclusive)."""
    if budget <= start:
        return np.array([budget])
    return np.geomspace(start, budget, points)


def success_curve(solve_times, grid) -> np.ndarray:
    """Fraction of runs solved by each grid time; unsolved runs carry ``inf``."""
    t = np.sort(np.asarray(list(solve_times), dtype=float))
    g = np.asarray(grid, dtype=float)
    if len(t) == 0:
        return np.zeros(len(g))
    return np.searchsorted(t, g, side="right") / len(t)


def cost_on_grid(trace, grid) -> np.ndarray:
    """Best cost known at each grid time from a ``(time, cost)`` trace; ``inf`` before the first."""
    g = np.asarray(grid, dtype=float)
    out = np.full(len(g), math.inf)
    if not trace:
        return out
    times = np.array([t for t, _ in trace])
    costs = np.minimum.accumulate(np.array([c for _, c in trace]))
    idx = np.searchsorted(times, g, side="right") - 1
    ok = idx >= 0
    out[ok] = costs[idx[ok]]
    return out


def power_law_exponent(xs, ys) -> float:
    """Least-squares slope of ``log y`` over ``log x``."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    if len(lx) < 2:
        raise ValueError("need at least two points")
    return float(np.polyfit(lx, ly, 1)[0])

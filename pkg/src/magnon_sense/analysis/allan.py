"""Overlapping Allan deviation."""
from __future__ import annotations

from typing import Iterable

import numpy as np


def allan_deviation(f, n_values: Iterable[int]) -> list[tuple[int, float]]:
    """Overlapping Allan deviation of fractional frequencies ``f`` at each averaging factor ``n``.

    ``sigma^2(n) = sum_j (sum_{i=j}^{j+n-1} f[i+n] - f[i])^2 / (2 n^2 (m - 2n + 1))``
    evaluated with cumulative sums in O(m) per ``n``.
    """
    f = np.asarray(f, dtype=float)
    m = f.size
    csum = np.concatenate(([0.0], np.cumsum(f - f.mean())))
    out = []
    for n in n_values:
        n = int(n)
        if n < 1:
            raise ValueError(f"averaging factor must be >= 1, got {n}")
        if m < 2 * n + 1:
            raise ValueError(f"series of length {m} too short for n={n} (need {2 * n + 1})")
        j = np.arange(m - 2 * n + 1)
        inner = csum[j + 2 * n] - 2 * csum[j + n] + csum[j]
        var = np.sum(inner**2) / (2.0 * n**2 * (m - 2 * n + 1))
        out.append((n, float(np.sqrt(var))))
    return out


def loglog_slope(points: list[tuple[int, float]]) -> float:
    """Least-squares slope of ``log sigma`` against ``log n``."""
    n = np.array([p[0] for p in points], dtype=float)
    s = np.array([p[1] for p in points], dtype=float)
    return float(np.polyfit(np.log(n), np.log(s), 1)[0])

"""Two-sided Mann-Whitney U test.

Ranks use midranks for ties.  When either group has fewer than 8 values the
p-value comes from the exact permutation distribution of U (ties included),
otherwise from the normal approximation with tie-corrected variance and a
0.5 continuity correction.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.stats import rankdata

from ..errors import ParameterError

EXACT_BELOW = 8


class MannWhitneyResult(NamedTuple):
    u: float  # U statistic of sample_a
    p: float
    method: str


def mann_whitney_u(sample_a, sample_b, exact: bool | None = None) -> MannWhitneyResult:
    a = np.asarray(sample_a, dtype=np.float64).ravel()
    b = np.asarray(sample_b, dtype=np.float64).ravel()
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise ParameterError("both samples must be nonempty")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ParameterError("samples must be finite")
    ranks = rankdata(np.concatenate([a, b]))
    u = float(ranks[:na].sum() - na * (na + 1) / 2.0)
    if exact is None:
        exact = min(na, nb) < EXACT_BELOW
    if exact:
        return MannWhitneyResult(u, _exact_p(ranks, na), "exact")
    return MannWhitneyResult(u, _normal_p(u, ranks, na, nb), "normal")


def _exact_p(ranks: np.ndarray, na: int) -> float:
    """P(|U - mu| >= |u - mu|) over all equally likely splits of the pooled ranks."""
    n = ranks.size
    r2 = np.rint(2 * ranks).astype(np.int64)  # midranks are multiples of 1/2
    observed = int(r2[:na].sum())
    top = int(np.sort(r2)[-na:].sum())
    # dist[k, s] = number of k-subsets whose doubled rank sum is s
    dist = np.zeros((na + 1, top + 1))
    dist[0, 0] = 1.0
    for r in r2:
        for k in range(min(na, n), 0, -1):
            dist[k, r:] += dist[k - 1, :top + 1 - r]
    counts = dist[na]
    sums = np.arange(top + 1)
    centre2 = na * (n + 1)  # twice E[rank sum], on the same doubled scale as ``sums``
    extreme = np.abs(sums - centre2) >= abs(observed - centre2)
    return float(min(1.0, counts[extreme].sum() / counts.sum()))


def _normal_p(u: float, ranks: np.ndarray, na: int, nb: int) -> float:
    n = na + nb
    mu = na * nb / 2.0
    _, t = np.unique(ranks, return_counts=True)
    tie = float(np.sum(t ** 3 - t)) / (n * (n - 1))
    var = na * nb / 12.0 * ((n + 1) - tie)
    if var <= 0:
        return 1.0
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return float(min(1.0, math.erfc(z / math.sqrt(2.0))))

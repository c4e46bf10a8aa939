"""Tukey HSD post-hoc comparisons on jointly rank-transformed groups."""

from __future__ import annotations

import math
from itertools import combinations
from typing import Sequence

from marketaudit.errors import DomainError
from marketaudit.stats._qtable import Q_TABLE
from marketaudit.stats.nonparametric import PairwiseComparison, TestResult, as_samples, rank_with_ties

MAX_GROUPS = 10


def critical_value(alpha: float, k: int, df: float) -> float:
    """Studentized range critical value, linear in 1/df between tabulated rows."""
    if alpha not in Q_TABLE:
        raise DomainError(f"no tabulated critical values for alpha={alpha}; use one of {sorted(Q_TABLE)}")
    if not 2 <= k <= MAX_GROUPS:
        raise DomainError(f"studentized range table covers 2..{MAX_GROUPS} groups, got {k}")
    rows = Q_TABLE[alpha]
    dfs = sorted(rows)
    if df < dfs[0]:
        raise DomainError(f"too few error degrees of freedom ({df}) for Tukey HSD")
    col = k - 2
    if df in rows:
        return rows[df][col]
    lo = max(d for d in dfs if d < df)
    hi = min(d for d in dfs if d > df)
    inv = lambda d: 0.0 if math.isinf(d) else 1.0 / d
    t = (inv(lo) - inv(df)) / (inv(lo) - inv(hi))
    return rows[lo][col] + t * (rows[hi][col] - rows[lo][col])


def tukey_hsd(groups: Sequence, alpha: float = 0.05) -> TestResult:
    """Tukey-Kramer pairwise comparisons of mean ranks.

    All observations are ranked together, then each pair's mean-rank gap is
    compared with ``q_crit * sqrt(MSE / 2 * (1/n_i + 1/n_j))`` where MSE is
    the pooled within-group variance of the ranks. The result's ``p_value``
    is a bound read off the table (0.01, 0.05 or 1.0) for the most
    separated pair, not an exact tail probability.
    """
    if not (isinstance(alpha, (int, float)) and 0 < alpha < 1):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    if len(groups) < 2:
        raise DomainError("Tukey HSD needs at least two groups")
    samples = as_samples(groups)
    k = len(samples)
    pooled = [v for s in samples for v in s.values]
    n = len(pooled)
    df = n - k
    ranks = rank_with_ties(pooled)

    rank_groups = []
    start = 0
    for s in samples:
        rank_groups.append(ranks[start : start + len(s)])
        start += len(s)
    means = [math.fsum(r) / len(r) for r in rank_groups]
    sse = math.fsum((x - m) ** 2 for r, m in zip(rank_groups, means) for x in r)
    mse = sse / df if df > 0 else 0.0
    q_crit = critical_value(alpha, k, df)

    def q_stat(i: int, j: int) -> float:
        diff = abs(means[i] - means[j])
        se = math.sqrt(mse / 2.0 * (1.0 / len(samples[i]) + 1.0 / len(samples[j])))
        if se == 0:
            return 0.0 if diff == 0 else math.inf
        return diff / se

    pairwise = {}
    q_max = 0.0
    for i, j in combinations(range(k), 2):
        q = q_stat(i, j)
        q_max = max(q_max, q)
        pairwise[(samples[i].label, samples[j].label)] = PairwiseComparison(
            difference=means[i] - means[j], significant=q > q_crit, statistic=q
        )

    p_bound = 1.0
    for level in sorted(Q_TABLE, reverse=True):
        if q_max > critical_value(level, k, df):
            p_bound = level

    return TestResult(
        test="tukey_hsd",
        statistic=q_max,
        p_value=p_bound,
        df=df,
        group_means={s.label: s.mean for s in samples},
        group_sizes={s.label: len(s) for s in samples},
        pairwise=pairwise,
        metadata={
            "alpha": alpha,
            "transform": "rank",
            "critical_value": q_crit,
            "mean_ranks": {s.label: m for s, m in zip(samples, means)},
            "p_value_kind": "table bound",
        },
    )

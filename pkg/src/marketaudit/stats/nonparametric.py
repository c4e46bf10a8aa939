"""Mann-Whitney U and Kruskal-Wallis H tests with mid-rank tie handling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import groupby
from typing import Optional, Sequence

from marketaudit.errors import DomainError
from marketaudit.stats.special import chi_squared_sf, normal_sf

EXACT_MAX_N = 16


@dataclass(frozen=True)
class Sample:
    label: str
    values: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise DomainError(f"sample {self.label!r} is empty")
        if not all(math.isfinite(v) for v in values):
            raise DomainError(f"sample {self.label!r} has non-finite values")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return math.fsum(self.values) / len(self.values)


def as_sample(x, label: str) -> Sample:
    return x if isinstance(x, Sample) else Sample(label, tuple(x))


def as_samples(groups: Sequence) -> list[Sample]:
    samples = [as_sample(g, f"g{i}") for i, g in enumerate(groups)]
    labels = [s.label for s in samples]
    if len(set(labels)) != len(labels):
        raise DomainError(f"group labels must be unique, got {labels}")
    return samples


@dataclass(frozen=True)
class PairwiseComparison:
    difference: float
    significant: bool
    statistic: Optional[float] = None


@dataclass
class TestResult:
    test: str
    statistic: float
    p_value: float
    df: Optional[int] = None
    group_means: dict[str, float] = field(default_factory=dict)
    group_sizes: dict[str, int] = field(default_factory=dict)
    pairwise: Optional[dict[tuple[str, str], PairwiseComparison]] = None
    metadata: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise DomainError(f"p-value {self.p_value} outside [0, 1]")

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha

    def summary(self) -> str:
        if self.test == "kruskal_wallis":
            return f"H({self.df})≈{self.statistic:.4g}, p≈{self.p_value:.2g}"
        if self.test == "mann_whitney_u":
            return f"U≈{self.statistic:.4g}, p≈{self.p_value:.2g}"
        sig = [f"{a}/{b}" for (a, b), c in (self.pairwise or {}).items() if c.significant]
        return f"q_max≈{self.statistic:.4g}, significant pairs: {', '.join(sig) or 'none'}"

    def to_dict(self) -> dict:
        d = {
            "test": self.test,
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "summary": self.summary(),
            "group_means": dict(self.group_means),
            "group_sizes": dict(self.group_sizes),
            "metadata": dict(self.metadata),
        }
        if self.pairwise is not None:
            d["pairwise"] = [
                {
                    "a": a,
                    "b": b,
                    "difference": c.difference,
                    "statistic": c.statistic,
                    "significant": c.significant,
                }
                for (a, b), c in self.pairwise.items()
            ]
        return d


def rank_with_ties(values: Sequence[float]) -> list[float]:
    """1-based ranks, tied values sharing the mean of their positions."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2.0 + 1.0
        for pos in range(i, j + 1):
            ranks[order[pos]] = mid
        i = j + 1
    return ranks


def tie_term(values: Sequence[float]) -> float:
    """Sum of t^3 - t over groups of tied values."""
    return float(sum(t**3 - t for t in (len(list(g)) for _, g in groupby(sorted(values)))))


@lru_cache(maxsize=None)
def _u_counts(m: int, n: int) -> tuple[int, ...]:
    # Number of orderings of m "a" and n "b" values giving each U_a = 0..m*n.
    # The largest value is either an "a" (beats all n b's) or a "b".
    if m == 0 or n == 0:
        return (1,)
    counts = [0] * (m * n + 1)
    for u, c in enumerate(_u_counts(m - 1, n)):
        counts[u + n] += c
    for u, c in enumerate(_u_counts(m, n - 1)):
        counts[u] += c
    return tuple(counts)


def mann_whitney_exact_p(u: float, n_a: int, n_b: int) -> float:
    """Two-sided exact p = 2 P(U <= u) for tie-free samples, capped at 1."""
    counts = _u_counts(n_a, n_b)
    cum = sum(counts[: int(math.floor(u)) + 1])
    return min(1.0, 2 * cum / math.comb(n_a + n_b, n_a))


def mann_whitney_permutation_p(ranks: Sequence[float], n_a: int, u_a: float) -> float:
    """Two-sided p from the exact permutation law of U_a over (mid-)ranks.

    Counts every way of choosing which ``n_a`` of the pooled ranks belong
    to the first sample. Mid-ranks are multiples of 1/2, so rank sums are
    tracked as integers in half-units. Works with or without ties.
    """
    doubled = [int(round(2 * r)) for r in ranks]
    # ways[j][s]: subsets of size j with doubled rank sum s
    ways: list[dict[int, int]] = [dict() for _ in range(n_a + 1)]
    ways[0][0] = 1
    for r in doubled:
        for j in range(min(n_a, len(doubled)) - 1, -1, -1):
            for s, c in ways[j].items():
                ways[j + 1][s + r] = ways[j + 1].get(s + r, 0) + c
    offset = n_a * (n_a + 1)  # doubled n_a(n_a+1)/2
    target = int(round(2 * u_a)) + offset
    total = math.comb(len(doubled), n_a)
    lower = sum(c for s, c in ways[n_a].items() if s <= target)
    upper = sum(c for s, c in ways[n_a].items() if s >= target)
    return min(1.0, 2 * min(lower, upper) / total)


def mann_whitney_u(a, b, *, method: str = "auto", continuity: bool = True) -> TestResult:
    """Two-sided Mann-Whitney U test; the reported statistic is min(U_a, U_b).

    ``method="auto"`` enumerates the exact null distribution when the pooled
    size is at most 16 and there are no ties, and otherwise uses the normal
    approximation with tie-corrected variance. ``method="exact"`` with ties
    enumerates the permutation law of the mid-rank sum instead.
    """
    a, b = as_sample(a, "a"), as_sample(b, "b")
    if method not in ("auto", "exact", "asymptotic"):
        raise DomainError(f"unknown method {method!r}")
    n_a, n_b = len(a), len(b)
    pooled = a.values + b.values
    ranks = rank_with_ties(pooled)
    u_a = math.fsum(ranks[:n_a]) - n_a * (n_a + 1) / 2.0
    u_b = n_a * n_b - u_a
    u = min(u_a, u_b)
    ties = tie_term(pooled)

    use_exact = method == "exact" or (method == "auto" and n_a + n_b <= EXACT_MAX_N and ties == 0)

    meta: dict = {"u_a": u_a, "u_b": u_b}
    if use_exact and ties:
        p = mann_whitney_permutation_p(ranks, n_a, u_a)
        meta["method"] = "exact-permutation"
    elif use_exact:
        p = mann_whitney_exact_p(u, n_a, n_b)
        meta["method"] = "exact"
    else:
        n = n_a + n_b
        mu = n_a * n_b / 2.0
        var = n_a * n_b / 12.0 * ((n + 1) - ties / (n * (n - 1)))
        if var <= 0:
            z, p = 0.0, 1.0
        else:
            z = max(0.0, abs(u_a - mu) - (0.5 if continuity else 0.0)) / math.sqrt(var)
            p = min(1.0, 2.0 * normal_sf(z))
        meta.update(method="asymptotic", continuity_correction=continuity, z=z)

    return TestResult(
        test="mann_whitney_u",
        statistic=u,
        p_value=p,
        group_means={a.label: a.mean, b.label: b.mean},
        group_sizes={a.label: n_a, b.label: n_b},
        metadata=meta,
    )


def kruskal_wallis(groups: Sequence) -> TestResult:
    """Kruskal-Wallis H with tie correction; p from the chi-squared(k - 1) tail."""
    if len(groups) < 2:
        raise DomainError("Kruskal-Wallis needs at least two groups")
    samples = as_samples(groups)
    pooled = [v for s in samples for v in s.values]
    n = len(pooled)
    ranks = rank_with_ties(pooled)

    grand = (n + 1) / 2.0
    mean_ranks = {}
    spread = []
    start = 0
    for s in samples:
        r = math.fsum(ranks[start : start + len(s)]) / len(s)
        start += len(s)
        mean_ranks[s.label] = r
        spread.append(len(s) * (r - grand) ** 2)

    correction = 1.0 - tie_term(pooled) / (n**3 - n) if n > 1 else 0.0
    if correction <= 0:
        h = 0.0
    else:
        h = 12.0 / (n * (n + 1)) * math.fsum(spread) / correction
    df = len(samples) - 1
    return TestResult(
        test="kruskal_wallis",
        statistic=h,
        p_value=chi_squared_sf(h, df) if h > 0 else 1.0,
        df=df,
        group_means={s.label: s.mean for s in samples},
        group_sizes={s.label: len(s) for s in samples},
        metadata={"mean_ranks": mean_ranks, "tie_correction": correction},
    )

"""Non-parametric tests for comparing groups of misinformation scores."""

from marketaudit.stats.nonparametric import (
    PairwiseComparison,
    Sample,
    TestResult,
    kruskal_wallis,
    mann_whitney_exact_p,
    mann_whitney_permutation_p,
    mann_whitney_u,
    rank_with_ties,
)
from marketaudit.stats.special import chi_squared_sf, gammaincc, normal_sf
from marketaudit.stats.tukey import critical_value, tukey_hsd

__all__ = [
    "PairwiseComparison", "Sample", "TestResult", "kruskal_wallis", "mann_whitney_exact_p",
    "mann_whitney_permutation_p",
    "mann_whitney_u", "rank_with_ties", "chi_squared_sf", "gammaincc", "normal_sf",
    "critical_value", "tukey_hsd",
]

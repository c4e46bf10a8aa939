from __future__ import annotations

import math
import random
from itertools import combinations

import mpmath
import pytest
import scipy.stats as sps
from hypothesis import given, settings, strategies as st

from marketaudit.errors import DomainError
from marketaudit.stats import (
    Sample,
    TestResult,
    chi_squared_sf,
    critical_value,
    gammaincc,
    kruskal_wallis,
    mann_whitney_exact_p,
    mann_whitney_permutation_p,
    mann_whitney_u,
    normal_sf,
    rank_with_ties,
    tukey_hsd,
)
from marketaudit.stats._qtable import Q_TABLE
from oracles import brute_ranks, hand_kruskal_h, permutation_mw_p

finite = st.floats(-1e6, 1e6, allow_nan=False)
small_ints = st.integers(-5, 5)


# -- ranks ----------------------------------------------------------------------


@pytest.mark.parametrize(
    "values, ranks",
    [([3, 1, 2], [3, 1, 2]), ([1, 1, 2], [1.5, 1.5, 3]), ([5, 5, 5, 5], [2.5] * 4)],
)
def test_rank_examples(values, ranks):
    assert rank_with_ties(values) == ranks


@given(st.lists(small_ints, min_size=1, max_size=30))
def test_ranks_match_counting_oracle(values):
    ranks = rank_with_ties(values)
    assert ranks == brute_ranks(values)
    n = len(values)
    assert sum(ranks) == n * (n + 1) / 2


# -- chi-squared tail ------------------------------------------------------------


def test_chi_squared_examples():
    assert chi_squared_sf(0, 3) == 1.0
    assert chi_squared_sf(2 * math.log(2), 2) == pytest.approx(0.5, abs=1e-15)
    assert chi_squared_sf(51.6, 4) == pytest.approx(1.7e-10, rel=0.1)


@pytest.mark.parametrize("df", [1, 2, 3, 4, 5, 7, 10, 25, 60])
@pytest.mark.parametrize("x", [1e-6, 0.1, 0.5, 1, 2, 3.5, 7, 10, 20, 51.6, 100, 400])
def test_chi_squared_against_mpmath(x, df):
    expected = float(mpmath.gammainc(mpmath.mpf(df) / 2, mpmath.mpf(x) / 2, mpmath.inf, regularized=True))
    got = chi_squared_sf(x, df)
    assert abs(got - expected) <= 1e-10
    if expected > 1e-300:
        assert got == pytest.approx(expected, rel=1e-9)


def test_chi_squared_edge_cases():
    assert chi_squared_sf(math.inf, 3) == 0.0
    with pytest.raises(DomainError):
        chi_squared_sf(-1, 2)
    with pytest.raises(DomainError):
        chi_squared_sf(1, 0)
    with pytest.raises(DomainError):
        gammaincc(0, 1)


@given(st.floats(0, 200), st.integers(1, 40))
def test_chi_squared_monotone_in_x(x, df):
    assert chi_squared_sf(x + 1.0, df) <= chi_squared_sf(x, df) <= 1.0


def test_normal_sf():
    assert normal_sf(0) == 0.5
    assert normal_sf(1.959963984540054) == pytest.approx(0.025, rel=1e-12)


# -- Mann-Whitney -----------------------------------------------------------------


def test_mw_complete_separation():
    r = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert r.statistic == 0
    assert r.p_value == pytest.approx(0.1)
    assert r.metadata["method"] == "exact"


def test_mw_identical_multisets_exact_null():
    r = mann_whitney_u([1, 2, 3], [1, 2, 3], method="exact")
    assert r.p_value >= 0.99


def test_mw_overlapping_example_against_enumeration():
    a, b = [1, 2, 3, 4], [3, 4, 5, 6]
    r = mann_whitney_u(a, b, method="exact")
    pooled = a + b
    ranks = brute_ranks(pooled)
    us = [sum(ranks[i] for i in idx) - 10 for idx in combinations(range(8), 4)]
    assert r.metadata["u_a"] == us[0]
    assert r.statistic == min(us[0], 16 - us[0])
    assert r.p_value == pytest.approx(permutation_mw_p(a, b), abs=1e-12)


@pytest.mark.parametrize("n", range(2, 13))
def test_mw_exact_equals_permutation_enumeration(n):
    values = list(range(n))
    worst = 0.0
    for na in range(1, n):
        for idx in combinations(values, na):
            a = list(idx)
            b = [v for v in values if v not in idx]
            p = mann_whitney_u(a, b, method="exact").p_value
            worst = max(worst, abs(p - permutation_mw_p(a, b)))
    assert worst <= 1e-12


@given(st.lists(st.integers(0, 4), min_size=1, max_size=6), st.lists(st.integers(0, 4), min_size=1, max_size=6))
def test_mw_tied_exact_matches_enumeration(a, b):
    r = mann_whitney_u(a, b, method="exact")
    assert r.p_value == pytest.approx(permutation_mw_p(a, b), abs=1e-12)


@given(st.lists(finite, min_size=1, max_size=20), st.lists(finite, min_size=1, max_size=20))
def test_mw_symmetric(a, b):
    ab, ba = mann_whitney_u(a, b), mann_whitney_u(b, a)
    assert ab.statistic == ba.statistic
    assert ab.p_value == pytest.approx(ba.p_value, abs=1e-12)
    assert 0 <= ab.p_value <= 1


@given(st.lists(finite, min_size=1, max_size=15), st.lists(finite, min_size=1, max_size=15))
def test_mw_invariant_under_monotone_transform(a, b):
    f = lambda v: math.atan(v / 1000.0) * 3 + 7
    r1, r2 = mann_whitney_u(a, b), mann_whitney_u([f(v) for v in a], [f(v) for v in b])
    if rank_with_ties(a + b) != rank_with_ties([f(v) for v in a + b]):
        return  # transform collapsed distinct floats into ties
    assert (r1.statistic, r1.p_value) == (r2.statistic, r2.p_value)


@settings(max_examples=60)
@given(st.lists(finite, min_size=8, max_size=40, unique=True), st.integers(1, 39))
def test_mw_asymptotic_against_scipy(values, cut):
    cut = min(cut, len(values) - 1)
    a, b = values[:cut], values[cut:]
    ours = mann_whitney_u(a, b, method="asymptotic")
    ref = sps.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True)
    assert ours.metadata["u_a"] == pytest.approx(ref.statistic)
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-14)


def test_mw_tied_asymptotic_against_scipy():
    rng = random.Random(7)
    for _ in range(50):
        a = [rng.randint(0, 6) for _ in range(rng.randint(3, 25))]
        b = [rng.randint(0, 6) for _ in range(rng.randint(3, 25))]
        ours = mann_whitney_u(a, b)
        ref = sps.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic")
        assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-14)


def test_mw_exact_vs_asymptotic_gap():
    # Tie-free, 8 <= n_a + n_b <= 16, both groups of at least 3. The normal
    # approximation stays within 0.03 of the exact p everywhere except the
    # 4-vs-4 split at U = 4, where the gap is 0.0305.
    offenders = []
    for n in range(8, 17):
        for na in range(3, n - 2):
            nb = n - na
            for u_a in range(na * nb + 1):
                u = min(u_a, na * nb - u_a)
                exact = mann_whitney_exact_p(u, na, nb)
                z = max(0.0, abs(u_a - na * nb / 2) - 0.5) / math.sqrt(na * nb * (n + 1) / 12)
                gap = abs(exact - min(1.0, 2 * normal_sf(z)))
                if gap > 0.03:
                    offenders.append((na, nb, u, round(gap, 4)))
    assert offenders == [(4, 4, 4, 0.0305), (4, 4, 4, 0.0305)]


def test_mw_validation():
    with pytest.raises(DomainError):
        mann_whitney_u([], [1])
    with pytest.raises(DomainError):
        mann_whitney_u([1], [2], method="bootstrap")
    with pytest.raises(DomainError):
        mann_whitney_u([math.nan], [1])


def test_mw_auto_switches_to_asymptotic_with_ties_or_size():
    assert mann_whitney_u([1, 1, 2], [3, 4]).metadata["method"] == "asymptotic"
    assert mann_whitney_u(range(9), range(10, 19)).metadata["method"] == "asymptotic"
    assert mann_whitney_u(range(8), range(10, 18)).metadata["method"] == "exact"


# -- Kruskal-Wallis ---------------------------------------------------------------


def test_kw_identical_groups():
    r = kruskal_wallis([[1, 2, 3], [1, 2, 3], [1, 2, 3]])
    assert r.statistic == 0 and r.p_value == 1.0


def test_kw_all_values_tied():
    r = kruskal_wallis([[0, 0], [0, 0, 0]])
    assert (r.statistic, r.p_value) == (0.0, 1.0)


def test_kw_separated_groups_hand_value():
    r = kruskal_wallis([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
    # mean ranks 2, 5, 8 around 5: 12/90 * 3 * (9 + 0 + 9)
    assert r.statistic == pytest.approx(7.2, abs=1e-12)
    assert r.df == 2
    assert r.group_means == {"g0": 2.0, "g1": 5.0, "g2": 8.0}


def test_kw_matches_hand_formula_on_random_instances():
    rng = random.Random(2024)
    for _ in range(50):
        k = rng.randint(2, 5)
        groups = [[rng.randint(0, 9) for _ in range(rng.randint(1, 6))] for _ in range(k)]
        pooled = [v for g in groups for v in g]
        if len(set(pooled)) == 1:
            continue
        assert kruskal_wallis(groups).statistic == pytest.approx(hand_kruskal_h(groups), abs=1e-9)


@settings(max_examples=60)
@given(st.lists(st.lists(small_ints, min_size=1, max_size=8), min_size=2, max_size=6))
def test_kw_against_scipy(groups):
    if len({v for g in groups for v in g}) == 1:
        return
    ours = kruskal_wallis(groups)
    ref = sps.kruskal(*groups)
    assert ours.statistic == pytest.approx(ref.statistic, rel=1e-9, abs=1e-12)
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-7, abs=1e-14)


@given(st.lists(finite, min_size=1, max_size=20, unique=True), st.lists(finite, min_size=1, max_size=20, unique=True))
def test_kw_two_groups_is_squared_mw_z(a, b):
    if set(a) & set(b):
        return
    h = kruskal_wallis([a, b]).statistic
    z = mann_whitney_u(a, b, method="asymptotic", continuity=False).metadata["z"]
    assert h == pytest.approx(z * z, abs=1e-9)


@given(st.lists(small_ints, min_size=1, max_size=20), st.lists(small_ints, min_size=1, max_size=20))
def test_kw_two_group_p_equals_uncorrected_mw(a, b):
    expected = mann_whitney_u(a, b, method="asymptotic", continuity=False).p_value
    assert kruskal_wallis([a, b]).p_value == pytest.approx(expected, abs=1e-9)


@settings(max_examples=40)
@given(st.lists(finite, min_size=15, max_size=30, unique=True), st.lists(finite, min_size=15, max_size=30, unique=True))
def test_kw_two_group_p_close_to_corrected_mw(a, b):
    # the continuity correction is the only difference; it shrinks with sample size
    assert kruskal_wallis([a, b]).p_value == pytest.approx(mann_whitney_u(a, b).p_value, abs=0.02)


def test_kw_monotone_in_mean_rank_gap():
    base = [0, 1, 2, 3, 4]
    hs = [kruskal_wallis([base, [v + shift for v in base]]).statistic for shift in (0.5, 1.5, 2.5, 3.5, 4.5)]
    assert hs == sorted(hs) and len(set(hs)) == len(hs)


@given(st.lists(st.lists(finite, min_size=1, max_size=6), min_size=2, max_size=4))
def test_kw_invariant_under_monotone_transform(groups):
    f = lambda v: v**3
    pooled = [v for g in groups for v in g]
    if rank_with_ties(pooled) != rank_with_ties([f(v) for v in pooled]):
        return
    r1, r2 = kruskal_wallis(groups), kruskal_wallis([[f(v) for v in g] for g in groups])
    assert r1.statistic == r2.statistic and r1.p_value == r2.p_value


def test_kw_validation():
    with pytest.raises(DomainError):
        kruskal_wallis([[1, 2]])
    with pytest.raises(DomainError):
        kruskal_wallis([[1], []])
    with pytest.raises(DomainError):
        kruskal_wallis([Sample("x", (1,)), Sample("x", (2,))])


# -- Tukey HSD -------------------------------------------------------------------


@pytest.mark.parametrize("alpha", [0.05, 0.01])
@pytest.mark.parametrize("df", [2, 5, 10, 17, 24, 60, math.inf])
def test_q_table_against_scipy(alpha, df):
    row = Q_TABLE[alpha][df]
    for k in (2, 3, 6, 10):
        ref = sps.studentized_range.ppf(1 - alpha, k, df)
        assert row[k - 2] == pytest.approx(ref, abs=2e-3), (alpha, k, df)


def test_q_table_shape():
    for rows in Q_TABLE.values():
        assert {2, 10, 20, 24, 30, 40, 60, 120, math.inf} <= set(rows)
        for df, row in rows.items():
            assert len(row) == 9 and list(row) == sorted(row)


@pytest.mark.parametrize("df", [22, 27, 35, 50, 90, 200])
def test_interpolated_critical_values_close_to_scipy(df):
    for k in (2, 4, 10):
        assert critical_value(0.05, k, df) == pytest.approx(sps.studentized_range.ppf(0.95, k, df), abs=0.01)


def test_critical_value_validation():
    with pytest.raises(DomainError):
        critical_value(0.10, 3, 20)
    with pytest.raises(DomainError):
        critical_value(0.05, 11, 20)
    with pytest.raises(DomainError):
        critical_value(0.05, 3, 1)


def test_tukey_identical_groups():
    r = tukey_hsd([Sample(f"g{i}", (1, 2, 3, 4)) for i in range(3)])
    assert not any(c.significant for c in r.pairwise.values())
    assert r.p_value == 1.0


def test_tukey_one_shifted_group():
    rng = random.Random(1)
    base = [Sample(n, tuple(rng.gauss(0, 1) for _ in range(15))) for n in ("a", "b", "c")]
    far = Sample("far", tuple(rng.gauss(0, 1) + 100 for _ in range(15)))
    r = tukey_hsd(base + [far])
    sig = {pair for pair, c in r.pairwise.items() if c.significant}
    assert sig == {("a", "far"), ("b", "far"), ("c", "far")}
    assert r.p_value == 0.01
    assert r.metadata["transform"] == "rank"


def test_tukey_against_scipy_on_ranks():
    rng = random.Random(3)
    groups = [[rng.gauss(mu, 1) for _ in range(n)] for mu, n in ((0, 12), (0.8, 15), (1.6, 10), (0.2, 14))]
    pooled = [v for g in groups for v in g]
    ranks = rank_with_ties(pooled)
    rank_groups, i = [], 0
    for g in groups:
        rank_groups.append(ranks[i : i + len(g)])
        i += len(g)
    ref = sps.tukey_hsd(*rank_groups)
    ours = tukey_hsd(groups)
    labels = [f"g{j}" for j in range(4)]
    for (a, b), comp in ours.pairwise.items():
        ia, ib = labels.index(a), labels.index(b)
        assert comp.significant == (ref.pvalue[ia, ib] < 0.05)
        assert comp.difference == pytest.approx(ref.statistic[ia, ib])


def test_tukey_validation():
    with pytest.raises(DomainError):
        tukey_hsd([[1, 2], [3, 4]], alpha=1.5)
    with pytest.raises(DomainError):
        tukey_hsd([[1, 2, 3]])


# -- result records ---------------------------------------------------------------


def test_result_summary_format():
    r = kruskal_wallis([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
    assert r.summary().startswith("H(2)≈7.2, p≈")
    assert mann_whitney_u([1, 2], [3, 4]).summary().startswith("U≈0, p≈")
    d = tukey_hsd([[1, 2, 3], [4, 5, 6], [7, 8, 9]]).to_dict()
    assert {"a", "b", "difference", "significant", "statistic"} <= set(d["pairwise"][0])


def test_result_rejects_bad_p():
    with pytest.raises(DomainError):
        TestResult("kruskal_wallis", 1.0, 1.5)


def test_permutation_p_matches_tie_free_formula():
    for na, nb in ((3, 4), (5, 5), (2, 9)):
        ranks = list(range(1, na + nb + 1))
        for u in range(na * nb + 1):
            # first sample takes ranks realizing U_a = u: any subset works, use the distribution
            exact = mann_whitney_exact_p(min(u, na * nb - u), na, nb)
            assert mann_whitney_permutation_p(ranks, na, u) == pytest.approx(exact, abs=1e-12)

"""Rank-weighted misinformation scores for result pages and homepages.

A page of ``n`` results with stances ``x_1..x_n`` (rank 1 first) scores

    sum_r x_r * (n - r + 1) / (n * (n + 1) / 2)

so the top result carries weight ``n`` and the last weight ``1``. A
federated page (ranked shelves of ranked items) applies the same weighting
to the per-shelf scores. Both land in [-1, +1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from marketaudit.corpus import normalize_annotation
from marketaudit.errors import AnnotationGapError, DomainError, UndefinedScoreError

PAGE_SIZE_LIMIT = 20
CAPTURE_LABELS = ("after-action", "before-search", "after-search")


@dataclass(frozen=True)
class RankedResult:
    item_id: str
    rank: int
    stance: int

    def __post_init__(self):
        if self.rank < 1:
            raise DomainError(f"rank must be >= 1, got {self.rank}")
        if self.stance not in (-1, 0, 1):
            raise DomainError(f"stance must be -1, 0 or 1, got {self.stance!r}")


def _check_ranks(ranks: Sequence[int], what: str) -> None:
    if list(ranks) != list(range(1, len(ranks) + 1)):
        raise DomainError(f"{what} ranks must be exactly 1..{len(ranks)}, got {list(ranks)}")


@dataclass(frozen=True)
class SerpPage:
    query: str
    results: tuple[RankedResult, ...]
    algorithm: str = "featured"
    captured_at: int = 0
    page_size_limit: int = PAGE_SIZE_LIMIT

    def __post_init__(self):
        object.__setattr__(self, "results", tuple(self.results))
        _check_ranks([r.rank for r in self.results], "result")
        if len(self.results) > self.page_size_limit:
            raise DomainError(f"{len(self.results)} results exceed page size {self.page_size_limit}")

    @property
    def stances(self) -> list[int]:
        return [r.stance for r in self.results]


@dataclass(frozen=True)
class RecComponent:
    heading: str
    rank: int
    items: tuple[RankedResult, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if self.rank < 1:
            raise DomainError(f"component rank must be >= 1, got {self.rank}")
        _check_ranks([r.rank for r in self.items], f"component {self.heading!r} item")

    @property
    def stances(self) -> list[int]:
        return [r.stance for r in self.items]


@dataclass(frozen=True)
class FederatedPage:
    components: tuple[RecComponent, ...]
    captured_at: int = 0
    capture_label: str = "after-search"

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        _check_ranks([c.rank for c in self.components], "component")
        if self.capture_label not in CAPTURE_LABELS:
            raise DomainError(f"unknown capture label {self.capture_label!r}")


def rank_weighted_mean(values: Sequence[float]) -> float:
    """Linearly rank-weighted mean; the first value weighs ``n``, the last ``1``."""
    n = len(values)
    if n == 0:
        raise UndefinedScoreError("score is undefined for an empty list")
    return math.fsum(v * (n - r) for r, v in enumerate(values)) / (n * (n + 1) / 2)


def serp_ms(page: SerpPage) -> float:
    if not page.results:
        raise UndefinedScoreError(f"SERP for {page.query!r} has no scorable results")
    return rank_weighted_mean(page.stances)


def fserp_ms(page: FederatedPage) -> float:
    if not page.components:
        raise UndefinedScoreError("federated page has no components")
    per_component = []
    for comp in page.components:
        if not comp.items:
            raise UndefinedScoreError(f"component {comp.heading!r} is empty")
        per_component.append(rank_weighted_mean(comp.stances))
    return rank_weighted_mean(per_component)


# -- construction from raw captures ----------------------------------------


def _ranked(item_ids: Iterable[str], annotations: Mapping[str, int]) -> tuple[RankedResult, ...]:
    # Non-English and removed items are dropped and the rest re-ranked 1..n.
    missing = [i for i in item_ids if i not in annotations]
    if missing:
        raise AnnotationGapError(missing)
    kept = []
    for item_id in item_ids:
        stance = normalize_annotation(annotations[item_id])
        if stance is not None:
            kept.append(RankedResult(item_id, len(kept) + 1, stance))
    return tuple(kept)


def build_serp_page(
    query: str,
    item_ids: Sequence[str],
    annotations: Mapping[str, int],
    algorithm: str = "featured",
    captured_at: int = 0,
    page_size_limit: int = PAGE_SIZE_LIMIT,
) -> SerpPage:
    return SerpPage(query, _ranked(item_ids, annotations), algorithm, captured_at, page_size_limit)


def build_federated_page(
    components: Sequence[tuple[str, Sequence[str]]],
    annotations: Mapping[str, int],
    captured_at: int = 0,
    capture_label: str = "after-search",
) -> FederatedPage:
    """Annotate shelves; a shelf left empty by exclusion is dropped and shelf ranks recompacted."""
    missing = [i for _, ids in components for i in ids if i not in annotations]
    if missing:
        raise AnnotationGapError(missing)
    built = []
    for heading, ids in components:
        items = _ranked(ids, annotations)
        if items:
            built.append(RecComponent(heading, len(built) + 1, items))
    return FederatedPage(tuple(built), captured_at, capture_label)


@dataclass(frozen=True)
class ScoreRecord:
    page_id: str
    kind: str
    score: float
    n: int
    m: Optional[int] = None
    capture_label: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "page_id": self.page_id,
            "kind": self.kind,
            "score": self.score,
            "n": self.n,
            "m": self.m,
            "capture_label": self.capture_label,
        }


def score_record(page_id: str, page) -> ScoreRecord:
    if isinstance(page, SerpPage):
        return ScoreRecord(page_id, "serp", serp_ms(page), len(page.results))
    n = sum(len(c.items) for c in page.components)
    return ScoreRecord(page_id, "federated", fserp_ms(page), n, len(page.components), page.capture_label)

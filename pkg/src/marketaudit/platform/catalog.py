"""Catalog items, JSONL fixtures and a seeded synthetic catalog generator."""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from marketaudit.corpus import AnnotationClass, normalize_annotation, s_stem, tokenize
from marketaudit.errors import ConfigurationError, DataError, DomainError, NotFoundError


@dataclass(frozen=True)
class Item:
    item_id: str
    title: str
    stance_class: int
    avg_rating: float
    num_ratings: int
    price: float
    arrival_date: int
    relevance_terms: tuple[str, ...] = field(default=())

    def __post_init__(self):
        normalize_annotation(self.stance_class)  # validates the class
        if self.num_ratings < 0:
            raise DomainError(f"{self.item_id}: num_ratings must be >= 0")
        if self.num_ratings > 0 and not 1.0 <= self.avg_rating <= 5.0:
            raise DomainError(f"{self.item_id}: avg_rating {self.avg_rating} outside [1, 5]")
        if self.price < 0:
            raise DomainError(f"{self.item_id}: negative price")
        object.__setattr__(self, "relevance_terms", tuple(self.relevance_terms))

    @cached_property
    def stems(self) -> frozenset[str]:
        return frozenset(s_stem(tok) for term in self.relevance_terms for tok in tokenize(term))

    @property
    def stance(self):
        """Normalized stance, ``None`` for items that are never scored."""
        return normalize_annotation(self.stance_class)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["relevance_terms"] = list(self.relevance_terms)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Item":
        return cls(
            item_id=str(d["item_id"]),
            title=d.get("title", ""),
            stance_class=int(d["stance_class"]),
            avg_rating=float(d.get("avg_rating", 0.0)),
            num_ratings=int(d.get("num_ratings", 0)),
            price=float(d.get("price", 0.0)),
            arrival_date=int(d.get("arrival_date", 0)),
            relevance_terms=tuple(d.get("relevance_terms", ())),
        )


class Catalog:
    """Immutable id-indexed item collection, iterated in item_id order."""

    def __init__(self, items: Iterable[Item]):
        by_id: dict[str, Item] = {}
        for item in items:
            if item.item_id in by_id:
                raise DataError(f"duplicate item_id {item.item_id!r} in catalog")
            by_id[item.item_id] = item
        if not by_id:
            raise DataError("catalog is empty")
        self._items = dict(sorted(by_id.items()))
        self.popularity_cap = max(math.log1p(i.num_ratings) for i in self._items.values())

    def __getitem__(self, item_id: str) -> Item:
        try:
            return self._items[item_id]
        except KeyError:
            raise NotFoundError(f"item {item_id!r} not in catalog") from None

    def __contains__(self, item_id) -> bool:
        return item_id in self._items

    def __iter__(self) -> Iterator[Item]:
        return iter(self._items.values())

    def __len__(self) -> int:
        return len(self._items)

    def annotations(self) -> dict[str, int]:
        return {i.item_id: i.stance_class for i in self}

    def popularity(self, item: Item) -> float:
        """log(1 + num_ratings) scaled by the catalog maximum, in [0, 1]."""
        if self.popularity_cap == 0:
            return 0.0
        return math.log1p(item.num_ratings) / self.popularity_cap


def load_catalog(path) -> Catalog:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read catalog {path}: {exc.strerror}") from exc
    items = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            items.append(Item.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: bad catalog record: {exc}") from exc
    return Catalog(items)


def save_catalog(catalog: Catalog, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in catalog:
            fh.write(json.dumps(item.to_dict(), sort_keys=True) + "\n")


# -- synthetic catalog ------------------------------------------------------

CORE_TERMS = ("vaccine", "vaccination", "immunization")
FORMATS = ("book", "dvd", "audiobook", "kindle")

STANCE_VOCAB = {
    1: ("injury", "illusions", "autism", "truth", "damage", "dissolving", "dangers",
        "toxic", "exemption", "natural", "immunity", "mercury", "harm"),
    0: ("history", "schedule", "guide", "kids", "policy", "research", "parents",
        "ingredients", "development", "global"),
    -1: ("safety", "work", "science", "myths", "save", "lives", "pro", "deadly",
         "choices", "evidence", "debunked", "protect"),
}
OFF_TOPIC_VOCAB = ("console", "game", "headphones", "kitchen", "novel", "toy", "charger",
                   "blender", "camera", "shoes", "coffee", "yoga", "fitness", "garden")
OFF_TOPIC_SHARED = ("book", "kids", "guide", "health")

# (mean rating, sd rating, log-mean num_ratings): pro items rate higher than
# anti items; neutral items are the most popular, anti the least.
STANCE_PROFILE = {1: (4.6, 0.25, 5.0), 0: (4.4, 0.30, 5.6), -1: (4.2, 0.40, 4.4)}
ON_TOPIC_MAX_RATINGS = 4000
OFF_TOPIC_RATINGS = (5000, 200000)


@dataclass(frozen=True)
class CatalogSpec:
    pro: int = 60
    neutral: int = 60
    anti: int = 60
    off_topic: int = 240
    non_english: int = 6
    removed: int = 4
    cross_term_prob: float = 0.15


def _clip(x, lo, hi):
    return max(lo, min(hi, x))


def generate_catalog(seed: int, spec: CatalogSpec = CatalogSpec()) -> Catalog:
    """Build a seeded vaccine-topic catalog with planted stance correlations.

    On-topic items carry a core vaccine term, stance-specific vocabulary and
    a format term. Off-topic items are strictly more popular than any
    on-topic item, so a history-free homepage only ever shows them.
    """
    rng = random.Random(seed)
    plan = (
        [1] * spec.pro + [0] * spec.neutral + [-1] * spec.anti
        + [2] * spec.off_topic + [3] * spec.non_english + [4] * spec.removed
    )
    ids = [f"B{n:09d}" for n in rng.sample(range(10**6, 10**9), len(plan))]
    items = []
    for item_id, cls in zip(ids, plan):
        if cls == 2:
            terms = rng.sample(OFF_TOPIC_VOCAB, 2)
            if rng.random() < 0.1:
                terms.append(rng.choice(OFF_TOPIC_SHARED))
            lo, hi = OFF_TOPIC_RATINGS
            num = int(math.exp(rng.uniform(math.log(lo), math.log(hi))))
            rating = round(_clip(rng.gauss(4.5, 0.3), 1.0, 5.0), 1)
            price = round(math.exp(rng.uniform(math.log(10), math.log(500))), 2)
        else:
            stance = cls if cls in STANCE_VOCAB else rng.choice((-1, 0, 1))
            terms = ["vaccine"]
            for extra, prob in (("vaccination", 0.3), ("immunization", 0.2)):
                if rng.random() < prob:
                    terms.append(extra)
            terms += rng.sample(STANCE_VOCAB[stance], 3)
            if rng.random() < spec.cross_term_prob:
                other = rng.choice([s for s in STANCE_VOCAB if s != stance])
                terms.append(rng.choice(STANCE_VOCAB[other]))
            terms.append(rng.choice(FORMATS))
            mu_r, sd_r, mu_n = STANCE_PROFILE[stance]
            rating = round(_clip(rng.gauss(mu_r, sd_r), 1.0, 5.0), 1)
            num = int(_clip(round(math.exp(rng.gauss(mu_n, 1.0))), 1, ON_TOPIC_MAX_RATINGS))
            if cls in (3, 4):
                num = rng.randint(1, 30)
            price = round(_clip(math.exp(rng.gauss(math.log(15), 0.5)), 1.0, 120.0), 2)
        title = " ".join(t.capitalize() for t in terms)
        if cls == 3:
            title = "Vaccini: " + title
        items.append(
            Item(
                item_id=item_id,
                title=title,
                stance_class=int(AnnotationClass(cls)),
                avg_rating=rating,
                num_ratings=num,
                price=price,
                arrival_date=rng.randint(1, 3650),
                relevance_terms=tuple(terms),
            )
        )
    return Catalog(items)

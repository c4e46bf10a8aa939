"""Deterministic simulated marketplace used as the reference audit target.

The ranking and recommendation formulas here are explicit stand-ins chosen
so that the audit pipeline has known behaviour to detect:

* featured search mixes query-term overlap, a rating x popularity signal and
  (optionally) similarity to the account's browsing history;
* homepage shelves mix global popularity with similarity to everything the
  account has browsed, wish-listed or carted, scaled by
  ``homepage_bubble_weight``. Search history is never consulted.

They are not claims about how any real marketplace ranks items.
"""

from __future__ import annotations

import json
import math
import random
import threading
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping, Optional, Sequence

from marketaudit.corpus import DEFAULT_STOPWORDS, stem_key
from marketaudit.errors import ConfigurationError, DomainError, NotFoundError
from marketaudit.platform.base import HomepageCapture, SearchAlgorithm, SerpCapture
from marketaudit.platform.catalog import Catalog, Item

DEFAULT_HEADINGS = (
    "Related to items you've viewed",
    "Inspired by your shopping trends",
    "Recommended for you",
)


@dataclass
class PersonalizationConfig:
    search_personalization_weight: float = 0.0
    homepage_bubble_weight: float = 2.0
    rating_weight: float = 0.5
    relevance_weight: float = 1.0
    stance_match_weight: float = 0.5
    component_decay: float = 0.5
    homepage_noise: float = 0.05
    rng_seed: int = 0
    components: int = 3
    component_headings: tuple[str, ...] = DEFAULT_HEADINGS
    items_per_component: int = 20

    def __post_init__(self):
        for name in (
            "search_personalization_weight", "homepage_bubble_weight", "rating_weight",
            "relevance_weight", "homepage_noise",
        ):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigurationError(f"{name} must be finite and >= 0, got {value!r}")
        if not 0 <= self.stance_match_weight <= 1:
            raise ConfigurationError("stance_match_weight must lie in [0, 1]")
        if not 0 <= self.component_decay <= 1:
            raise ConfigurationError("component_decay must lie in [0, 1]")
        if self.components < 1 or self.items_per_component < 1:
            raise ConfigurationError("components and items_per_component must be >= 1")
        self.component_headings = tuple(self.component_headings)

    def heading(self, i: int) -> str:
        if i < len(self.component_headings):
            return self.component_headings[i]
        return f"More items to consider ({i + 1})"

    @classmethod
    def from_dict(cls, d: Mapping) -> "PersonalizationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["component_headings"] = list(self.component_headings)
        return d


def load_config(path) -> PersonalizationConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc.msg}") from exc
    return PersonalizationConfig.from_dict(raw)


@dataclass
class UserState:
    account_id: str
    search_history: list[tuple[str, int]] = field(default_factory=list)
    browsing_history: list[str] = field(default_factory=list)
    wish_list: list[str] = field(default_factory=list)
    cart: list[str] = field(default_factory=list)

    def interaction_ids(self) -> tuple[str, ...]:
        """Distinct browsed/wished/carted item ids, first occurrence order."""
        seen = dict.fromkeys(self.browsing_history)
        seen.update(dict.fromkeys(self.wish_list))
        seen.update(dict.fromkeys(self.cart))
        return tuple(seen)

    def has_history(self) -> bool:
        return bool(self.browsing_history or self.wish_list or self.cart)


# -- user actions -----------------------------------------------------------


def _require(catalog: Catalog, item_id: str) -> None:
    if item_id not in catalog:
        raise NotFoundError(f"item {item_id!r} not in catalog")


def browse(user: UserState, item_id: str, catalog: Catalog) -> UserState:
    _require(catalog, item_id)
    user.browsing_history.append(item_id)
    return user


def add_to_wishlist(user: UserState, item_id: str, catalog: Catalog) -> UserState:
    # adding to a list happens from the item page, so it is also a browse
    _require(catalog, item_id)
    user.browsing_history.append(item_id)
    user.wish_list.append(item_id)
    return user


def add_to_cart(user: UserState, item_id: str, catalog: Catalog) -> UserState:
    _require(catalog, item_id)
    user.browsing_history.append(item_id)
    user.cart.append(item_id)
    return user


# -- similarity and ranking -------------------------------------------------


def jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def history_similarity(item: Item, history: Sequence[Item], stance_match_weight: float = 0.5) -> float:
    """Mean similarity of ``item`` to the history items, in [0, 1].

    Each pair scores a blend of relevance-term Jaccard overlap and an
    exact annotation-class match.
    """
    if not history:
        return 0.0
    w = stance_match_weight
    total = math.fsum(
        (1 - w) * jaccard(item.stems, h.stems) + w * (item.stance_class == h.stance_class)
        for h in history
    )
    return total / len(history)


def term_overlap(query_stems: Sequence[str], item: Item) -> float:
    q = set(query_stems)
    if not q:
        return 0.0
    return len(q & item.stems) / len(q)


def rating_popularity(item: Item, cap: float) -> float:
    """avg_rating x log(1 + num_ratings), scaled to [0, 1] by 5 x cap."""
    if cap <= 0 or item.num_ratings == 0:
        return 0.0
    return (item.avg_rating * min(math.log1p(item.num_ratings), cap)) / (5.0 * cap)


def rank_featured(
    matched: Sequence[Item],
    user: UserState,
    config: PersonalizationConfig,
    *,
    query: str = "",
    catalog: Optional[Catalog] = None,
) -> list[Item]:
    """Order matched items by the featured score, ties by item_id.

    The popularity term is normalized against the catalog's largest
    log(1 + num_ratings) when a catalog is given, else against ``matched``.
    """
    if not matched:
        raise DomainError("rank_featured needs at least one matched item")
    if catalog is not None:
        cap = catalog.popularity_cap
    else:
        cap = max(math.log1p(i.num_ratings) for i in matched)
    q = stem_key(query, DEFAULT_STOPWORDS)

    history: list[Item] = []
    if config.search_personalization_weight > 0:
        lookup = catalog if catalog is not None else {i.item_id: i for i in matched}
        history = [lookup[i] for i in user.interaction_ids() if i in lookup]

    def score(item: Item) -> float:
        s = config.relevance_weight * term_overlap(q, item)
        s += config.rating_weight * rating_popularity(item, cap)
        if history:
            s += config.search_personalization_weight * history_similarity(
                item, history, config.stance_match_weight
            )
        return s

    scored = [(score(i), i) for i in matched]
    scored.sort(key=lambda si: (-si[0], si[1].item_id))
    return [i for _, i in scored]


_SORTS = {
    SearchAlgorithm.AVG_CUSTOMER_REVIEW: lambda i: (-i.avg_rating, -i.num_ratings, i.item_id),
    SearchAlgorithm.PRICE_ASCENDING: lambda i: (i.price, i.item_id),
    SearchAlgorithm.PRICE_DESCENDING: lambda i: (-i.price, i.item_id),
    SearchAlgorithm.NEWEST_ARRIVALS: lambda i: (-i.arrival_date, i.item_id),
}


def match(catalog: Catalog, query: str) -> list[Item]:
    q = stem_key(query, DEFAULT_STOPWORDS)
    return [i for i in catalog if term_overlap(q, i) > 0]


def search(
    catalog: Catalog,
    query: str,
    algorithm,
    user: UserState,
    k: int = 20,
    config: Optional[PersonalizationConfig] = None,
    now: int = 0,
) -> SerpCapture:
    """Return the top-``k`` matched items ordered by ``algorithm``.

    Records the query in the user's search history.
    """
    algorithm = SearchAlgorithm.parse(algorithm)
    if k < 1:
        raise DomainError("k must be >= 1")
    config = config or PersonalizationConfig()
    matched = match(catalog, query)
    if not matched:
        ordered: list[Item] = []
    elif algorithm is SearchAlgorithm.FEATURED:
        ordered = rank_featured(matched, user, config, query=query, catalog=catalog)
    else:
        ordered = sorted(matched, key=_SORTS[algorithm])
    user.search_history.append((query, now))
    return SerpCapture(query, algorithm, now, tuple(i.item_id for i in ordered[:k]))


def homepage(
    catalog: Catalog,
    user: UserState,
    config: Optional[PersonalizationConfig] = None,
    m: Optional[int] = None,
    k: Optional[int] = None,
    now: int = 0,
    *,
    _similarity_cache: Optional[dict] = None,
) -> HomepageCapture:
    """Build ``m`` recommendation shelves of ``k`` items each.

    Shelf ``i`` (0-based) ranks every catalog item by

        popularity + bubble_weight * decay**i * history_similarity + noise

    and takes the best ``k`` not already shown on an earlier shelf. History
    enters only through the similarity term, so with zero bubble weight the
    page ignores the account entirely. The noise term is drawn from a
    generator seeded by (rng_seed, now, i) only, so accounts looking at the
    homepage at the same virtual time see the same noise.
    """
    config = config or PersonalizationConfig()
    m = config.components if m is None else m
    k = config.items_per_component if k is None else k
    if m < 1 or k < 1:
        raise DomainError("m and k must be >= 1")

    history_ids = user.interaction_ids()
    sims: Mapping[str, float] = {}
    if history_ids and config.homepage_bubble_weight > 0:
        key = (history_ids, config.stance_match_weight)
        if _similarity_cache is not None and key in _similarity_cache:
            sims = _similarity_cache[key]
        else:
            history = [catalog[i] for i in history_ids]
            sims = {
                item.item_id: history_similarity(item, history, config.stance_match_weight)
                for item in catalog
            }
            if _similarity_cache is not None:
                _similarity_cache[key] = sims

    used: set[str] = set()
    components = []
    for i in range(m):
        rng = random.Random(f"{config.rng_seed}:{now}:{i}")
        weight = config.homepage_bubble_weight * config.component_decay**i
        scored = []
        for item in catalog:
            noise = config.homepage_noise * rng.random()
            if item.item_id in used:
                continue
            s = catalog.popularity(item) + noise
            if weight and sims:
                s += weight * sims[item.item_id]
            scored.append((-s, item.item_id))
        scored.sort()
        picked = tuple(item_id for _, item_id in scored[:k])
        used.update(picked)
        components.append((config.heading(i), picked))
    return HomepageCapture(now, tuple(components))


class SimulatedMarketplace:
    """Stateful :class:`PlatformAdapter` over a catalog.

    Commands are serialized through a lock; account state lives here.
    With zero search personalization, search pages are memoized per
    (query, algorithm, k) since they cannot depend on the account.
    """

    def __init__(self, catalog: Catalog, config: Optional[PersonalizationConfig] = None):
        self.catalog = catalog
        self.config = config or PersonalizationConfig()
        self.users: dict[str, UserState] = {}
        self.sessions: dict[str, int] = {}
        self._lock = threading.Lock()
        self._serp_cache: dict = {}
        self._sim_cache: dict = {}

    def user(self, account_id: str) -> UserState:
        if account_id not in self.users:
            self.users[account_id] = UserState(account_id)
        return self.users[account_id]

    def search(self, account_id, query, algorithm=SearchAlgorithm.FEATURED, k=20, now=0) -> SerpCapture:
        algorithm = SearchAlgorithm.parse(algorithm)
        with self._lock:
            user = self.user(account_id)
            if self.config.search_personalization_weight == 0:
                key = (query, algorithm, k)
                if key not in self._serp_cache:
                    self._serp_cache[key] = search(self.catalog, query, algorithm, UserState("_"), k, self.config)
                user.search_history.append((query, now))
                cached = self._serp_cache[key]
                return SerpCapture(cached.query, cached.algorithm, now, cached.item_ids)
            return search(self.catalog, query, algorithm, user, k, self.config, now)

    def homepage(self, account_id, now=0) -> HomepageCapture:
        with self._lock:
            return homepage(self.catalog, self.user(account_id), self.config, now=now,
                            _similarity_cache=self._sim_cache)

    def browse(self, account_id, item_id, now=0) -> None:
        with self._lock:
            browse(self.user(account_id), item_id, self.catalog)

    def add_to_wishlist(self, account_id, item_id, now=0) -> None:
        with self._lock:
            add_to_wishlist(self.user(account_id), item_id, self.catalog)

    def add_to_cart(self, account_id, item_id, now=0) -> None:
        with self._lock:
            add_to_cart(self.user(account_id), item_id, self.catalog)

    def reset_session(self, account_id, now=0) -> None:
        # Browser cookies/history are per-session; account histories persist.
        with self._lock:
            self.user(account_id)
            self.sessions[account_id] = self.sessions.get(account_id, 0) + 1

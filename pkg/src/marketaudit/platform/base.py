"""What an audit driver needs from a marketplace, live or simulated."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Protocol

from marketaudit.errors import DomainError


class SearchAlgorithm(str, Enum):
    FEATURED = "featured"
    AVG_CUSTOMER_REVIEW = "avg_customer_review"
    PRICE_ASCENDING = "price_ascending"
    PRICE_DESCENDING = "price_descending"
    NEWEST_ARRIVALS = "newest_arrivals"

    @classmethod
    def parse(cls, value) -> "SearchAlgorithm":
        try:
            return cls(value)
        except ValueError:
            raise DomainError(
                f"unknown search algorithm {value!r}; expected one of {[a.value for a in cls]}"
            ) from None


DEFAULT_ALGORITHM = SearchAlgorithm.FEATURED


@dataclass(frozen=True)
class SerpCapture:
    """Raw search results page as seen by an account, before annotation."""

    query: str
    algorithm: SearchAlgorithm
    captured_at: int
    item_ids: tuple[str, ...]


@dataclass(frozen=True)
class HomepageCapture:
    """Raw homepage: ranked shelves of ranked item ids."""

    captured_at: int
    components: tuple[tuple[str, tuple[str, ...]], ...]


class PlatformAdapter(Protocol):
    """Account-level actions the protocol runner drives.

    ``now`` is the virtual time in minutes since the start of the run.
    """

    def search(self, account_id: str, query: str, algorithm: SearchAlgorithm, k: int, now: int) -> SerpCapture: ...

    def homepage(self, account_id: str, now: int) -> HomepageCapture: ...

    def browse(self, account_id: str, item_id: str, now: int) -> None: ...

    def add_to_wishlist(self, account_id: str, item_id: str, now: int) -> None: ...

    def add_to_cart(self, account_id: str, item_id: str, now: int) -> None: ...

    def reset_session(self, account_id: str, now: int) -> None: ...

"""Stance treatments and the 13-account experiment layout."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping, Optional, Sequence

from marketaudit.corpus import AnnotatedQuery, parse_annotated_queries
from marketaudit.errors import ConfigurationError, InsufficientCorpusError
from marketaudit.platform.base import DEFAULT_ALGORITHM, PlatformAdapter, SearchAlgorithm
from marketaudit.platform.catalog import Catalog

ACTIVITIES = ("browse", "wishlist", "cart")
SEARCH_ONLY = "search_only"
TREATMENT_NAMES = ("pro", "neutral", "anti", "mix")
STANCE_BY_TREATMENT = {"pro": 1, "neutral": 0, "anti": -1}
TREATMENT_SIZE = 12
MIX_PER_STANCE = 4
MINUTES_PER_DAY = 24 * 60


def parse_clock(value) -> int:
    """Minutes past midnight from ``"HH:MM"`` or an int."""
    if isinstance(value, int):
        minutes = value
    else:
        try:
            hh, mm = str(value).split(":")
            minutes = int(hh) * 60 + int(mm)
        except ValueError:
            raise ConfigurationError(f"bad clock time {value!r}, expected HH:MM") from None
    if not 0 <= minutes < MINUTES_PER_DAY:
        raise ConfigurationError(f"clock time {value!r} outside one day")
    return minutes


def format_clock(minutes: int) -> str:
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


@dataclass(frozen=True)
class Treatment:
    name: str
    items: tuple[str, ...]

    def __post_init__(self):
        if self.name not in TREATMENT_NAMES:
            raise ConfigurationError(f"unknown treatment {self.name!r}")
        object.__setattr__(self, "items", tuple(self.items))
        if len(self.items) != TREATMENT_SIZE:
            raise ConfigurationError(
                f"treatment {self.name!r} has {len(self.items)} items, expected {TREATMENT_SIZE}"
            )


@dataclass(frozen=True)
class AccountSpec:
    account_id: str
    activity: str
    treatment: Optional[Treatment] = None

    def __post_init__(self):
        if self.activity not in ACTIVITIES + (SEARCH_ONLY,):
            raise ConfigurationError(f"unknown activity {self.activity!r}")
        if (self.activity == SEARCH_ONLY) != (self.treatment is None):
            raise ConfigurationError(
                f"account {self.account_id!r}: search-only accounts take no treatment, all others need one"
            )

    @property
    def treatment_name(self) -> Optional[str]:
        return self.treatment.name if self.treatment else None


@dataclass(frozen=True)
class ExperimentPlan:
    """Who does what, when. Times are minutes past midnight; durations in minutes."""

    accounts: tuple[AccountSpec, ...]
    queries: tuple[AnnotatedQuery, ...]
    days: int = 14
    activity_time: int = 9 * 60
    search_time: int = 11 * 60
    inter_search_gap: int = 20
    carry_over_threshold: int = 11
    action_gap: int = 1
    algorithms: tuple[SearchAlgorithm, ...] = (DEFAULT_ALGORITHM,)
    page_size: int = 20

    def __post_init__(self):
        object.__setattr__(self, "accounts", tuple(self.accounts))
        object.__setattr__(self, "queries", tuple(self.queries))
        object.__setattr__(
            self, "algorithms", tuple(SearchAlgorithm.parse(a) for a in self.algorithms)
        )
        object.__setattr__(self, "activity_time", parse_clock(self.activity_time))
        object.__setattr__(self, "search_time", parse_clock(self.search_time))
        self.validate()

    def validate(self) -> None:
        if self.days < 1:
            raise ConfigurationError("days must be >= 1")
        if not self.queries:
            raise ConfigurationError("plan has no queries")
        if not self.algorithms:
            raise ConfigurationError("plan has no search algorithms")
        if self.page_size < 1:
            raise ConfigurationError("page_size must be >= 1")
        if self.inter_search_gap < self.carry_over_threshold:
            raise ConfigurationError(
                f"inter_search_gap {self.inter_search_gap} min is below the carry-over "
                f"threshold of {self.carry_over_threshold} min"
            )
        if self.action_gap < 0:
            raise ConfigurationError("action_gap must be >= 0")
        if self.activity_time + TREATMENT_SIZE * self.action_gap > self.search_time:
            raise ConfigurationError("activities would overrun the search start time")
        if self.search_time + len(self.queries) * self.inter_search_gap >= MINUTES_PER_DAY:
            raise ConfigurationError("searches would run past midnight")

        ids = [a.account_id for a in self.accounts]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("account ids must be unique")
        cells = [(a.activity, a.treatment_name) for a in self.accounts if a.activity != SEARCH_ONLY]
        grid = [(act, t) for act in ACTIVITIES for t in TREATMENT_NAMES]
        if sorted(cells) != sorted(grid):
            raise ConfigurationError("accounts must cover each activity x treatment cell exactly once")
        if sum(a.activity == SEARCH_ONLY for a in self.accounts) != 1:
            raise ConfigurationError("plan needs exactly one search-only account")

    def account(self, account_id: str) -> AccountSpec:
        for a in self.accounts:
            if a.account_id == account_id:
                return a
        raise KeyError(account_id)

    @property
    def treatments(self) -> dict[str, Treatment]:
        return {a.treatment.name: a.treatment for a in self.accounts if a.treatment}

    def to_dict(self) -> dict:
        return {
            "days": self.days,
            "activity_time": format_clock(self.activity_time),
            "search_time": format_clock(self.search_time),
            "inter_search_gap_minutes": self.inter_search_gap,
            "carry_over_threshold_minutes": self.carry_over_threshold,
            "action_gap_minutes": self.action_gap,
            "algorithms": [a.value for a in self.algorithms],
            "page_size": self.page_size,
            "treatments": {name: list(t.items) for name, t in sorted(self.treatments.items())},
            "accounts": [
                {"account_id": a.account_id, "activity": a.activity, "treatment": a.treatment_name}
                for a in self.accounts
            ],
            "queries": [q.to_dict() for q in self.queries],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentPlan":
        try:
            treatments = {name: Treatment(name, items) for name, items in d["treatments"].items()}
            accounts = []
            for a in d["accounts"]:
                t = a.get("treatment")
                if t is not None and t not in treatments:
                    raise ConfigurationError(f"account {a['account_id']!r} uses undefined treatment {t!r}")
                accounts.append(AccountSpec(a["account_id"], a["activity"], treatments.get(t) if t else None))
            return cls(
                accounts=tuple(accounts),
                queries=tuple(parse_annotated_queries(d["queries"])),
                days=int(d.get("days", 14)),
                activity_time=d.get("activity_time", "09:00"),
                search_time=d.get("search_time", "11:00"),
                inter_search_gap=int(d.get("inter_search_gap_minutes", 20)),
                carry_over_threshold=int(d.get("carry_over_threshold_minutes", 11)),
                action_gap=int(d.get("action_gap_minutes", 1)),
                algorithms=tuple(d.get("algorithms", [DEFAULT_ALGORITHM.value])),
                page_size=int(d.get("page_size", 20)),
            )
        except KeyError as exc:
            raise ConfigurationError(f"plan is missing field {exc}") from None


def save_plan(plan: ExperimentPlan, path) -> None:
    Path(path).write_text(json.dumps(plan.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_plan(path) -> ExperimentPlan:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read plan {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"plan {path} is not valid JSON: {exc.msg}") from exc
    return ExperimentPlan.from_dict(raw)


def select_treatments(
    catalog: Catalog,
    queries: Sequence[AnnotatedQuery],
    platform: PlatformAdapter,
    k: int = 20,
    seed: int = 0,
    *,
    probe_account: str = "treatment-probe",
) -> dict[str, Treatment]:
    """Pick the 12 most-rated items of each stance among top-``k`` search results.

    Every query is searched once with the default algorithm; the unique
    results are grouped by annotation class (pro 1, neutral 0, anti -1),
    ordered by number of ratings (ties by item_id) and cut to 12. The mix
    treatment takes the first 4 of each group, shuffled with ``seed``.
    """
    if not queries:
        raise ConfigurationError("select_treatments needs at least one query")
    pool: dict[str, None] = {}
    for q in queries:
        page = platform.search(probe_account, q.text, DEFAULT_ALGORITHM, k, 0)
        pool.update(dict.fromkeys(page.item_ids))

    treatments = {}
    for name, stance in STANCE_BY_TREATMENT.items():
        group = [catalog[i] for i in pool if catalog[i].stance_class == stance]
        group.sort(key=lambda item: (-item.num_ratings, item.item_id))
        if len(group) < TREATMENT_SIZE:
            raise InsufficientCorpusError(name, len(group), TREATMENT_SIZE)
        treatments[name] = Treatment(name, tuple(i.item_id for i in group[:TREATMENT_SIZE]))

    mix = [i for name in ("pro", "neutral", "anti") for i in treatments[name].items[:MIX_PER_STANCE]]
    random.Random(seed).shuffle(mix)
    treatments["mix"] = Treatment("mix", tuple(mix))
    return treatments


_OVERRIDABLE = {
    f.name for f in fields(ExperimentPlan) if f.name not in ("accounts", "queries")
}


def build_plan(
    treatments: Mapping[str, Treatment],
    queries: Sequence[AnnotatedQuery],
    overrides: Optional[Mapping] = None,
) -> ExperimentPlan:
    """Lay out 3 activities x 4 treatments plus one search-only account."""
    missing = [t for t in TREATMENT_NAMES if t not in treatments]
    if missing:
        raise ConfigurationError(f"missing treatment(s): {', '.join(missing)}")
    overrides = dict(overrides or {})
    unknown = set(overrides) - _OVERRIDABLE
    if unknown:
        raise ConfigurationError(f"unknown plan override(s): {sorted(unknown)}")

    accounts = [
        AccountSpec(f"{activity}-{name}", activity, treatments[name])
        for activity in ACTIVITIES
        for name in TREATMENT_NAMES
    ]
    accounts.append(AccountSpec("search-only", SEARCH_ONLY, None))
    return ExperimentPlan(accounts=tuple(accounts), queries=tuple(queries), **overrides)

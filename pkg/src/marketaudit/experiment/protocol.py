"""Daily audit protocol executed on a virtual clock.

Each day, per account:

* 00:00  browser session reset (account histories persist);
* 09:00  treatment accounts act on their 12 items, one every ``action_gap``
  minutes, then save the homepage (after-action);
* 11:00  every account saves the homepage (before-search), then runs the
  queries in plan order, ``inter_search_gap`` minutes apart, saving each
  results page; one gap after the last query it saves the homepage again
  (after-search).

Events from all accounts go through one priority queue ordered by
(virtual time, account_id, per-account step), so equal-time steps of
different accounts are "simultaneous" yet replay identically.
"""

from __future__ import annotations

import heapq
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from marketaudit.errors import ConfigurationError, DataError, ProtocolError
from marketaudit.experiment.plan import (
    MINUTES_PER_DAY,
    SEARCH_ONLY,
    TREATMENT_SIZE,
    ExperimentPlan,
)
from marketaudit.platform.base import PlatformAdapter

log = logging.getLogger(__name__)

AFTER_ACTION = "after-action"
BEFORE_SEARCH = "before-search"
AFTER_SEARCH = "after-search"
SERP = "serp"


class VirtualClock:
    """Simulation time in minutes; jumps straight to each scheduled event."""

    def __init__(self, start: int = 0):
        self._now = start

    @property
    def now(self) -> int:
        return self._now

    def advance_to(self, t: int) -> int:
        if t < self._now:
            raise ValueError(f"clock cannot move backwards ({t} < {self._now})")
        self._now = t
        return self._now


@dataclass(frozen=True)
class PageRecord:
    page_id: str
    day: int
    account_id: str
    capture_label: str
    time: int
    query: Optional[str] = None
    query_index: Optional[int] = None
    algorithm: Optional[str] = None
    item_ids: tuple[str, ...] = ()
    components: tuple[tuple[str, tuple[str, ...]], ...] = ()

    @property
    def is_serp(self) -> bool:
        return self.capture_label == SERP

    def to_dict(self) -> dict:
        d = {
            "page_id": self.page_id,
            "day": self.day,
            "account_id": self.account_id,
            "capture_label": self.capture_label,
            "time": self.time,
        }
        if self.is_serp:
            d.update(query=self.query, query_index=self.query_index, algorithm=self.algorithm,
                     item_ids=list(self.item_ids))
        else:
            d["components"] = [{"heading": h, "item_ids": list(ids)} for h, ids in self.components]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PageRecord":
        return cls(
            page_id=d["page_id"],
            day=d["day"],
            account_id=d["account_id"],
            capture_label=d["capture_label"],
            time=d["time"],
            query=d.get("query"),
            query_index=d.get("query_index"),
            algorithm=d.get("algorithm"),
            item_ids=tuple(d.get("item_ids", ())),
            components=tuple((c["heading"], tuple(c["item_ids"])) for c in d.get("components", ())),
        )


@dataclass(frozen=True)
class EventRecord:
    time: int
    day: int
    account_id: str
    kind: str
    item_id: Optional[str] = None
    query: Optional[str] = None
    page_ids: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = {"time": self.time, "day": self.day, "account_id": self.account_id, "kind": self.kind}
        if self.item_id is not None:
            d["item_id"] = self.item_id
        if self.query is not None:
            d["query"] = self.query
        if self.page_ids:
            d["page_ids"] = list(self.page_ids)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EventRecord":
        return cls(d["time"], d["day"], d["account_id"], d["kind"], d.get("item_id"), d.get("query"),
                   tuple(d.get("page_ids", ())))


@dataclass
class RunLog:
    plan: ExperimentPlan
    pages: list[PageRecord] = field(default_factory=list)
    events: list[EventRecord] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def serps(self) -> list[PageRecord]:
        return [p for p in self.pages if p.is_serp]

    def homepages(self) -> list[PageRecord]:
        return [p for p in self.pages if not p.is_serp]

    def actions(self) -> list[EventRecord]:
        return [e for e in self.events if e.kind in ("browse", "wishlist", "cart")]

    def keyed(self) -> dict[tuple, PageRecord]:
        """Pages by (day, account_id, capture_label, query, algorithm)."""
        return {(p.day, p.account_id, p.capture_label, p.query, p.algorithm): p for p in self.pages}

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "plan.json").write_text(json.dumps(self.plan.to_dict(), indent=2) + "\n", encoding="utf-8")
        (out / "meta.json").write_text(json.dumps(self.meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        with open(out / "events.jsonl", "w", encoding="utf-8") as fh:
            for e in self.events:
                fh.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")
        with open(out / "pages.jsonl", "w", encoding="utf-8") as fh:
            for p in self.pages:
                fh.write(json.dumps(p.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, run_dir) -> "RunLog":
        from marketaudit.experiment.plan import load_plan

        run = Path(run_dir)
        if not (run / "pages.jsonl").exists():
            raise ConfigurationError(f"{run} does not look like a run directory (no pages.jsonl)")
        plan = load_plan(run / "plan.json")

        def rows(name):
            path = run / name
            if not path.exists():
                return []
            out = []
            for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
                if line.strip():
                    try:
                        out.append(json.loads(line))
                    except json.JSONDecodeError as exc:
                        raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            return out

        meta_path = run / "meta.json"
        meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
        return cls(
            plan=plan,
            pages=[PageRecord.from_dict(r) for r in rows("pages.jsonl")],
            events=[EventRecord.from_dict(r) for r in rows("events.jsonl")],
            meta=meta,
        )


def expected_counts(plan: ExperimentPlan) -> dict[str, int]:
    n_accounts = len(plan.accounts)
    n_treated = sum(a.activity != SEARCH_ONLY for a in plan.accounts)
    return {
        SERP: n_accounts * len(plan.queries) * len(plan.algorithms) * plan.days,
        BEFORE_SEARCH: n_accounts * plan.days,
        AFTER_SEARCH: n_accounts * plan.days,
        AFTER_ACTION: n_treated * plan.days,
        "actions": n_treated * TREATMENT_SIZE * plan.days,
    }


def check_complete(runlog: RunLog) -> None:
    """Raise :class:`DataError` unless every scheduled capture is present."""
    plan = runlog.plan
    counts = Counter((p.day, p.account_id, p.capture_label) for p in runlog.pages)
    per_serp = len(plan.queries) * len(plan.algorithms)
    problems = []
    for day in range(1, plan.days + 1):
        for acct in plan.accounts:
            want = {BEFORE_SEARCH: 1, AFTER_SEARCH: 1, SERP: per_serp}
            if acct.activity != SEARCH_ONLY:
                want[AFTER_ACTION] = 1
            for label, n in want.items():
                got = counts.get((day, acct.account_id, label), 0)
                if got != n:
                    problems.append(f"day {day} {acct.account_id} {label}: {got} != {n}")
    if problems:
        raise DataError("incomplete run log: " + "; ".join(problems[:5]) + (" ..." if len(problems) > 5 else ""))


def _schedule(plan: ExperimentPlan):
    """Yield (time, account_id, step, day, kind, payload) for the whole run."""
    for acct in plan.accounts:
        step = 0
        for day in range(1, plan.days + 1):
            base = (day - 1) * MINUTES_PER_DAY
            yield base, acct.account_id, step, day, "reset", None
            step += 1
            if acct.activity != SEARCH_ONLY:
                t = base + plan.activity_time
                for item_id in acct.treatment.items:
                    yield t, acct.account_id, step, day, acct.activity, item_id
                    step += 1
                    t += plan.action_gap
                yield t, acct.account_id, step, day, AFTER_ACTION, None
                step += 1
            t = base + plan.search_time
            yield t, acct.account_id, step, day, BEFORE_SEARCH, None
            step += 1
            for qi, query in enumerate(plan.queries):
                yield t, acct.account_id, step, day, "search", (qi, query.text)
                step += 1
                t += plan.inter_search_gap
            yield t, acct.account_id, step, day, AFTER_SEARCH, None
            step += 1


def run_protocol(
    plan: ExperimentPlan,
    platform: PlatformAdapter,
    clock: Optional[VirtualClock] = None,
    meta: Optional[dict] = None,
) -> RunLog:
    clock = clock or VirtualClock()
    queue = list(_schedule(plan))
    heapq.heapify(queue)
    runlog = RunLog(plan=plan, meta=dict(meta or {}))
    actions = {
        "browse": platform.browse,
        "wishlist": platform.add_to_wishlist,
        "cart": platform.add_to_cart,
    }

    while queue:
        t, account_id, _step, day, kind, payload = heapq.heappop(queue)
        clock.advance_to(t)
        tag = f"d{day:02d}/{account_id}"
        try:
            if kind == "reset":
                platform.reset_session(account_id, t)
                runlog.events.append(EventRecord(t, day, account_id, kind))
            elif kind in actions:
                actions[kind](account_id, payload, t)
                runlog.events.append(EventRecord(t, day, account_id, kind, item_id=payload))
            elif kind == "search":
                qi, query = payload
                ids = []
                for algorithm in plan.algorithms:
                    page = platform.search(account_id, query, algorithm, plan.page_size, t)
                    rec = PageRecord(
                        page_id=f"{tag}/serp/{qi:02d}/{algorithm.value}",
                        day=day,
                        account_id=account_id,
                        capture_label=SERP,
                        time=t,
                        query=query,
                        query_index=qi,
                        algorithm=algorithm.value,
                        item_ids=tuple(page.item_ids),
                    )
                    runlog.pages.append(rec)
                    ids.append(rec.page_id)
                runlog.events.append(EventRecord(t, day, account_id, kind, query=query, page_ids=tuple(ids)))
            else:
                page = platform.homepage(account_id, t)
                rec = PageRecord(
                    page_id=f"{tag}/{kind}",
                    day=day,
                    account_id=account_id,
                    capture_label=kind,
                    time=t,
                    components=tuple((h, tuple(ids)) for h, ids in page.components),
                )
                runlog.pages.append(rec)
                runlog.events.append(EventRecord(t, day, account_id, "capture", page_ids=(rec.page_id,)))
        except Exception as exc:
            raise ProtocolError(day, account_id, _describe(kind, payload), exc) from exc
    log.info("protocol finished: %d pages, %d events", len(runlog.pages), len(runlog.events))
    return runlog


def _describe(kind: str, payload) -> str:
    if kind == "search":
        return f"search {payload[1]!r}"
    if payload is not None:
        return f"{kind} {payload}"
    return kind

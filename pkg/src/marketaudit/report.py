"""Score a run log and run the per-question test battery.

Search pages get a SERP score, homepages a federated score; scores are then
grouped by search algorithm, query stance, account activity and item-stance
treatment and compared with Kruskal-Wallis + Tukey HSD (Mann-Whitney U for
two-group comparisons).
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from marketaudit.corpus import normalize_annotation
from marketaudit.errors import AnnotationGapError, DomainError, UndefinedScoreError
from marketaudit.experiment.plan import SEARCH_ONLY, TREATMENT_NAMES
from marketaudit.experiment.protocol import AFTER_SEARCH, RunLog, check_complete
from marketaudit.platform.base import DEFAULT_ALGORITHM, SearchAlgorithm
from marketaudit.scoring import build_federated_page, build_serp_page, fserp_ms, serp_ms
from marketaudit.stats import Sample, kruskal_wallis, mann_whitney_u, tukey_hsd
from marketaudit.stats.tukey import MAX_GROUPS

STANCE_LABELS = {1: "pro", 0: "neutral", -1: "anti"}
ACTIVITY_LABELS = {SEARCH_ONLY: "search", "browse": "browse", "wishlist": "wishlist", "cart": "cart"}
DEFAULT_BINS = 20


@dataclass(frozen=True)
class ScoreRow:
    page_id: str
    kind: str
    day: int
    account_id: str
    activity: str
    treatment: Optional[str]
    capture_label: str
    query: Optional[str]
    query_stance: Optional[int]
    algorithm: Optional[str]
    score: float
    n: int
    m: Optional[int]


CSV_FIELDS = [
    "page_id", "kind", "day", "account_id", "activity", "treatment", "capture_label",
    "query", "query_stance", "algorithm", "score", "n", "m",
]


def frequency_table(scores: Sequence[float], bins: int = DEFAULT_BINS, lo: float = -1.0, hi: float = 1.0) -> dict:
    """Equal-width histogram over [lo, hi]; ``hi`` itself falls in the last bin."""
    if bins < 1:
        raise DomainError("bins must be >= 1")
    width = (hi - lo) / bins
    edges = [lo + j * width for j in range(bins)] + [hi]
    counts = [0] * bins
    for x in scores:
        idx = min(bins - 1, max(0, int((x - lo) / width)))
        # nudge across an edge the division rounded the wrong way
        while idx > 0 and x < edges[idx]:
            idx -= 1
        while idx < bins - 1 and x >= edges[idx + 1]:
            idx += 1
        counts[idx] += 1
    return {"edges": edges, "counts": counts, "total": len(scores)}


def describe(values: Sequence[float]) -> dict:
    if not values:
        return {"n": 0}
    return {
        "n": len(values),
        "mean": statistics.fmean(values),
        "median": statistics.median(values),
        "sd": statistics.pstdev(values),
        "min": min(values),
        "max": max(values),
    }


def compare_groups(groups: Mapping[str, Sequence[float]], alpha: float = 0.05, bins: Optional[int] = None) -> dict:
    """Summaries plus the designated tests for a labelled set of samples.

    Two non-empty groups get a Mann-Whitney U test; three or more get
    Kruskal-Wallis followed by Tukey HSD. Empty groups are reported and
    left out of the tests.
    """
    present = {k: list(v) for k, v in groups.items() if v}
    out: dict = {
        "groups": {k: describe(v) for k, v in groups.items()},
        "empty_groups": sorted(k for k, v in groups.items() if not v),
    }
    if bins:
        out["frequency"] = {k: frequency_table(v, bins) for k, v in groups.items()}
    samples = [Sample(k, tuple(v)) for k, v in present.items()]
    if len(samples) == 2:
        out["mann_whitney_u"] = mann_whitney_u(samples[0], samples[1]).to_dict()
    if len(samples) >= 2:
        out["kruskal_wallis"] = kruskal_wallis(samples).to_dict()
    if 3 <= len(samples) <= MAX_GROUPS and sum(map(len, samples)) - len(samples) >= 2:
        out["tukey_hsd"] = tukey_hsd(samples, alpha).to_dict()
    return out


@dataclass
class AnalysisReport:
    rq1a: dict
    rq1b: dict
    rq1c: Optional[dict]
    rq2: dict
    rq3: dict
    scores: list[ScoreRow] = field(default_factory=list)
    undefined: list[dict] = field(default_factory=list)
    counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "counts": self.counts,
            "undefined_scores": self.undefined,
            "rq1a_ranking_algorithms": self.rq1a,
            "rq1b_query_stance": self.rq1b,
            "rq1c_ratings": self.rq1c,
            "rq2_activity": self.rq2,
            "rq3_treatment": self.rq3,
        }

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), sort_keys=True, indent=2) + "\n"


def _clean(obj):
    """Round floats to 6 significant digits and make everything JSON-safe."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return str(obj)
        return float(f"{obj:.6g}")
    if isinstance(obj, Mapping):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _labels(runlog: RunLog):
    plan = runlog.plan
    activity = {a.account_id: ACTIVITY_LABELS[a.activity] for a in plan.accounts}
    treatment = {a.account_id: a.treatment_name for a in plan.accounts}
    stance = {q.text: q.stance for q in plan.queries}
    return activity, treatment, stance


def score_runlog(runlog: RunLog, annotations: Mapping[str, int]):
    """Score every captured page; returns (rows, undefined, scored_serps).

    ``scored_serps`` maps page_id to the annotated SerpPage for rank analyses.
    """
    missing = {i for p in runlog.pages for i in p.item_ids if i not in annotations}
    missing |= {i for p in runlog.pages for _, ids in p.components for i in ids if i not in annotations}
    if missing:
        raise AnnotationGapError(missing)

    activity, treatment, q_stance = _labels(runlog)
    rows, undefined, serps = [], [], {}
    for p in runlog.pages:
        try:
            if p.is_serp:
                page = build_serp_page(p.query, p.item_ids, annotations, p.algorithm, p.time,
                                       max(runlog.plan.page_size, len(p.item_ids)))
                serps[p.page_id] = page
                score, n, m, kind = serp_ms(page), len(page.results), None, "serp"
            else:
                page = build_federated_page(p.components, annotations, p.time, p.capture_label)
                score = fserp_ms(page)
                n, m, kind = sum(len(c.items) for c in page.components), len(page.components), "federated"
        except UndefinedScoreError as exc:
            undefined.append({"page_id": p.page_id, "reason": str(exc)})
            continue
        rows.append(
            ScoreRow(
                page_id=p.page_id,
                kind=kind,
                day=p.day,
                account_id=p.account_id,
                activity=activity[p.account_id],
                treatment=treatment[p.account_id],
                capture_label=p.capture_label,
                query=p.query,
                query_stance=q_stance.get(p.query) if p.query else None,
                algorithm=p.algorithm,
                score=score,
                n=n,
                m=m,
            )
        )
    return rows, undefined, serps


def _rank_distributions(runlog, serps, annotations, alpha):
    algorithms = [a.value for a in SearchAlgorithm if a.value in {p.algorithm for p in serps.values()}]
    ranks = {s: {a: [] for a in algorithms} for s in STANCE_LABELS.values()}
    page_size = runlog.plan.page_size
    for page in serps.values():
        for r in page.results:
            raw = annotations[r.item_id]
            if raw in STANCE_LABELS:
                ranks[STANCE_LABELS[raw]][page.algorithm].append(r.rank)
    out = {"algorithms": algorithms, "by_stance": {}}
    for stance, per_alg in ranks.items():
        dist = {}
        for alg, values in per_alg.items():
            pct = [0.0] * page_size
            for v in values:
                if v <= page_size:
                    pct[v - 1] += 100.0 / len(values)
            dist[alg] = {"n": len(values), "mean_rank": statistics.fmean(values) if values else None,
                         "rank_percentages": pct}
        entry = {"distribution": dist}
        if sum(1 for v in per_alg.values() if v) >= 2:
            entry["tests"] = compare_groups(per_alg, alpha)
        out["by_stance"][stance] = entry
    return out


def _ratings(runlog, annotations, item_stats, alpha):
    def section(ids):
        by = {s: [i for i in sorted(ids) if annotations[i] == raw] for raw, s in STANCE_LABELS.items()}
        out = {}
        for metric, idx in (("avg_rating", 0), ("num_ratings", 1)):
            groups = {s: [float(item_stats[i][idx]) for i in v if i in item_stats] for s, v in by.items()}
            res = compare_groups(groups, alpha)
            if groups["pro"] and groups["anti"]:
                res["pro_vs_anti"] = mann_whitney_u(Sample("pro", groups["pro"]), Sample("anti", groups["anti"])).to_dict()
            out[metric] = res
        return out

    serp_ids = {i for p in runlog.serps() for i in p.item_ids}
    rec_ids = {i for p in runlog.homepages() for _, ids in p.components for i in ids}
    return {
        "search_results": {"unique_items": len(serp_ids), **section(serp_ids)},
        "recommendations": {"unique_items": len(rec_ids), **section(rec_ids)},
    }


def analyze(
    runlog: RunLog,
    annotations: Mapping[str, int],
    item_stats: Optional[Mapping[str, tuple[float, int]]] = None,
    *,
    alpha: float = 0.05,
    bins: int = DEFAULT_BINS,
) -> AnalysisReport:
    """Score ``runlog`` and run the research-question test battery.

    SERP comparisons by query stance, activity and treatment use the
    default (featured) algorithm's pages when present. Activity effects on
    homepages use after-search captures; treatment effects use every
    homepage capture of the treatment accounts. ``item_stats`` maps item_id
    to (avg_rating, num_ratings) and enables the ratings section.
    """
    check_complete(runlog)
    for raw in annotations.values():
        normalize_annotation(raw)
    rows, undefined, serps = score_runlog(runlog, annotations)

    serp_rows = [r for r in rows if r.kind == "serp"]
    default = [r for r in serp_rows if r.algorithm == DEFAULT_ALGORITHM.value] or serp_rows
    homes = [r for r in rows if r.kind == "federated"]

    rq1b = compare_groups(
        {s: [r.score for r in default if r.query_stance == raw] for raw, s in STANCE_LABELS.items()},
        alpha, bins,
    )

    activities = list(ACTIVITY_LABELS.values())
    rq2 = {
        "serp_ms": compare_groups({a: [r.score for r in default if r.activity == a] for a in activities}, alpha, bins),
        "fserp_ms": compare_groups(
            {a: [r.score for r in homes if r.activity == a and r.capture_label == AFTER_SEARCH] for a in activities},
            alpha, bins,
        ),
    }
    rq3 = {
        "serp_ms": compare_groups({t: [r.score for r in default if r.treatment == t] for t in TREATMENT_NAMES}, alpha, bins),
        "fserp_ms": compare_groups({t: [r.score for r in homes if r.treatment == t] for t in TREATMENT_NAMES}, alpha, bins),
    }

    counts = {
        "serp_pages": len(runlog.serps()),
        "homepages": len(runlog.homepages()),
        "scored_serps": len(serp_rows),
        "scored_homepages": len(homes),
        "undefined": len(undefined),
    }
    return AnalysisReport(
        rq1a=_rank_distributions(runlog, serps, annotations, alpha),
        rq1b=rq1b,
        rq1c=_ratings(runlog, annotations, item_stats, alpha) if item_stats is not None else None,
        rq2=rq2,
        rq3=rq3,
        scores=rows,
        undefined=undefined,
        counts=counts,
    )


def write_scores(rows: Sequence[ScoreRow], path, fmt: str = "csv") -> None:
    path = Path(path)
    if fmt == "json":
        data = [_clean({**asdict(r), "score": round(r.score, 4)}) for r in rows]
        path.write_text(json.dumps(data, sort_keys=True, indent=1) + "\n", encoding="utf-8")
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for r in rows:
            d = asdict(r)
            d["score"] = f"{r.score:.4f}"
            writer.writerow({k: "" if d[k] is None else d[k] for k in CSV_FIELDS})


def read_scores(path) -> list[dict]:
    path = Path(path)
    if path.suffix == ".json":
        return json.loads(path.read_text(encoding="utf-8"))
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["score"] = float(r["score"])
        r["day"] = int(r["day"])
    return rows

"""``audit`` command line: curate, gen-catalog, plan, run, analyze, report.

Every subcommand reads and writes files only, so stages compose into a
pipeline. Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from marketaudit import __version__
from marketaudit.corpus import (
    DEFAULT_STOPWORDS,
    FileSuggestionProvider,
    Source,
    curate_queries,
    default_queries,
    load_annotated_queries,
    shortlist,
    write_jsonl,
)
from marketaudit.errors import AuditError, ConfigurationError, DataError
from marketaudit.experiment import RunLog, plan_for_catalog, run_protocol
from marketaudit.experiment.plan import load_plan, save_plan
from marketaudit.platform import (
    CatalogSpec,
    PersonalizationConfig,
    SearchAlgorithm,
    SimulatedMarketplace,
    generate_catalog,
    load_catalog,
    load_config,
    save_catalog,
)
from marketaudit.report import analyze, write_scores

log = logging.getLogger("marketaudit")


def _provider(spec: str) -> FileSuggestionProvider:
    # SOURCE=PATH, e.g. autocomplete=suggestions.jsonl
    source, sep, path = spec.partition("=")
    if not sep:
        raise ConfigurationError(f"provider {spec!r} must look like SOURCE=PATH")
    try:
        return FileSuggestionProvider(path, Source(source))
    except ValueError:
        choices = ", ".join(s.value for s in Source)
        raise ConfigurationError(f"unknown provider source {source!r} (choose from {choices})") from None


def _config(path: Optional[str], seed: Optional[int]) -> PersonalizationConfig:
    cfg = load_config(path) if path else PersonalizationConfig()
    if seed is not None:
        cfg = PersonalizationConfig.from_dict({**cfg.to_dict(), "rng_seed": seed})
    return cfg


def load_annotations(path) -> dict[str, int]:
    """Item annotations from a JSON object or JSONL rows of ``{item_id, annotation}``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read annotations {path}: {exc.strerror}") from exc
    try:
        if path.suffix == ".json":
            raw = json.loads(text)
            if not isinstance(raw, dict):
                raise DataError(f"{path}: expected a JSON object of item_id -> annotation")
            return {str(k): v for k, v in raw.items()}
        out = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if line.strip():
                row = json.loads(line)
                try:
                    out[row["item_id"]] = row["annotation"]
                except (KeyError, TypeError):
                    raise DataError(f"{path}:{lineno}: need item_id and annotation") from None
        return out
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc.msg})") from exc


def _annotations_and_stats(args):
    if args.catalog:
        catalog = load_catalog(args.catalog)
        annotations = catalog.annotations()
        stats = {i.item_id: (i.avg_rating, i.num_ratings) for i in catalog}
    else:
        annotations, stats = {}, None
    if args.annotations:
        annotations.update(load_annotations(args.annotations))
    if not annotations:
        raise ConfigurationError("need --catalog or --annotations")
    return annotations, stats


def cmd_curate(args) -> int:
    providers = [_provider(p) for p in args.provider]
    candidates = curate_queries(providers, args.topic, args.seed_query)
    stop = DEFAULT_STOPWORDS
    if args.stopwords:
        stop = Path(args.stopwords).read_text(encoding="utf-8").split()
    kept = shortlist(candidates, stop, max_words=args.max_words)
    write_jsonl(args.out, (c.to_dict() for c in kept))
    print(f"{len(candidates)} candidates, {len(kept)} shortlisted -> {args.out}")
    return 0


def cmd_gen_catalog(args) -> int:
    spec = CatalogSpec(**{k: v for k, v in (("pro", args.pro), ("neutral", args.neutral),
                                            ("anti", args.anti), ("off_topic", args.off_topic))
                          if v is not None})
    catalog = generate_catalog(args.seed, spec)
    save_catalog(catalog, args.out)
    print(f"{len(catalog)} items -> {args.out}")
    return 0


def cmd_plan(args) -> int:
    catalog = load_catalog(args.catalog)
    queries = load_annotated_queries(args.queries) if args.queries else default_queries()
    overrides = {"days": args.days}
    if args.algorithms:
        overrides["algorithms"] = tuple(SearchAlgorithm.parse(a) for a in args.algorithms)
    plan = plan_for_catalog(catalog, queries, _config(args.config, args.seed), args.seed, overrides)
    save_plan(plan, args.out)
    print(f"{len(plan.accounts)} accounts, {len(plan.queries)} queries, {plan.days} days -> {args.out}")
    return 0


def cmd_run(args) -> int:
    catalog = load_catalog(args.catalog)
    config = _config(args.config, args.seed)
    if args.plan:
        plan = load_plan(args.plan)
    else:
        plan = plan_for_catalog(catalog, None, config, args.seed or 0)
    meta = {"seed": args.seed, "config": config.to_dict(), "catalog_size": len(catalog)}
    runlog = run_protocol(plan, SimulatedMarketplace(catalog, config), meta=meta)
    runlog.save(args.out)
    print(f"{len(runlog.serps())} search pages, {len(runlog.homepages())} homepages -> {args.out}")
    return 0


def cmd_analyze(args) -> int:
    annotations, stats = _annotations_and_stats(args)
    report = analyze(RunLog.load(args.run), annotations, stats)
    write_scores(report.scores, args.out, args.format)
    print(f"{len(report.scores)} scored pages ({len(report.undefined)} undefined) -> {args.out}")
    return 0


def _write_frequencies(report, path) -> None:
    sections = {
        "rq1b/serp_ms": report.rq1b,
        "rq2/serp_ms": report.rq2["serp_ms"],
        "rq2/fserp_ms": report.rq2["fserp_ms"],
        "rq3/serp_ms": report.rq3["serp_ms"],
        "rq3/fserp_ms": report.rq3["fserp_ms"],
    }
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["section", "group", "bin_low", "bin_high", "count"])
        for name, sec in sections.items():
            for group, table in sec.get("frequency", {}).items():
                edges = table["edges"]
                for j, count in enumerate(table["counts"]):
                    w.writerow([name, group, f"{edges[j]:.4f}", f"{edges[j + 1]:.4f}", count])


def cmd_report(args) -> int:
    annotations, stats = _annotations_and_stats(args)
    report = analyze(RunLog.load(args.run), annotations, stats, alpha=args.alpha, bins=args.bins)
    if args.format == "json":
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
    else:
        _write_frequencies(report, args.out)
    if not args.quiet:
        for title, sec in (("query stance SERP", report.rq1b),
                           ("activity SERP", report.rq2["serp_ms"]),
                           ("activity homepage", report.rq2["fserp_ms"]),
                           ("treatment SERP", report.rq3["serp_ms"]),
                           ("treatment homepage", report.rq3["fserp_ms"])):
            kw = sec.get("kruskal_wallis")
            print(f"{title:<20} {kw['summary'] if kw else 'no test'}")
    print(f"report -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="audit", description="Misinformation audit of a marketplace's search and recommendations.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("curate", help="collect and shortlist search queries")
    c.add_argument("--topic", required=True)
    c.add_argument("--seed-query", action="append", required=True, help="seed for autocomplete (repeatable)")
    c.add_argument("--provider", action="append", required=True, metavar="SOURCE=PATH",
                   help="suggestion fixture; SOURCE is trend-topic, autocomplete or manual")
    c.add_argument("--stopwords", help="whitespace-separated stopword file")
    c.add_argument("--max-words", type=int, default=4)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_curate)

    g = sub.add_parser("gen-catalog", help="generate a seeded synthetic catalog")
    g.add_argument("--seed", type=int, default=0)
    for name in ("pro", "neutral", "anti", "off-topic"):
        g.add_argument(f"--{name}", type=int, dest=name.replace("-", "_"), help=f"number of {name} items")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_catalog)

    pl = sub.add_parser("plan", help="select treatments and lay out the accounts")
    pl.add_argument("--catalog", required=True)
    pl.add_argument("--queries", help="annotated queries JSONL (default: bundled set)")
    pl.add_argument("--config")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--days", type=int, default=14)
    pl.add_argument("--algorithms", nargs="+", choices=[a.value for a in SearchAlgorithm])
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plan)

    r = sub.add_parser("run", help="run the protocol against the simulated marketplace")
    r.add_argument("--catalog", required=True)
    r.add_argument("--plan", help="plan JSON (default: build one from the catalog)")
    r.add_argument("--config")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", required=True, help="run directory")
    r.set_defaults(func=cmd_run)

    for name, func, helptext in (("analyze", cmd_analyze, "score every captured page"),
                                 ("report", cmd_report, "run the statistical test battery")):
        a = sub.add_parser(name, help=helptext)
        a.add_argument("--run", required=True, help="run directory")
        a.add_argument("--catalog", help="catalog supplying annotations and ratings")
        a.add_argument("--annotations", help="item annotations (.json object or .jsonl rows)")
        a.add_argument("--format", choices=("csv", "json"), default="csv" if name == "analyze" else "json")
        a.add_argument("--out", required=True)
        if name == "report":
            a.add_argument("--alpha", type=float, default=0.05, choices=(0.05, 0.01))
            a.add_argument("--bins", type=int, default=20)
            a.add_argument("-q", "--quiet", action="store_true")
        a.set_defaults(func=func)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except AuditError as exc:
        print(f"audit {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"audit {args.command}: {exc}", file=sys.stderr)
        return ConfigurationError.exit_code


if __name__ == "__main__":
    sys.exit(main())

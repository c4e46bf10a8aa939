"""Query curation, shortlisting and the item annotation scale.

Suggestion sources (trending topics, search-box autocomplete, hand-added
queries) are read from line-delimited JSON fixtures so a curation run is
reproducible offline.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum, IntEnum
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Optional, Protocol, Sequence

from marketaudit.errors import ConfigurationError, DataError, DomainError

MAX_QUERY_WORDS = 4
MAX_CANDIDATE_WORDS = 12

DEFAULT_STOPWORDS = frozenset(
    {
        "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "how",
        "in", "is", "it", "of", "on", "or", "the", "to", "what", "why", "with",
    }
)

_PUNCT = re.compile(r"[^\w\s-]")


class Source(str, Enum):
    TREND_TOPIC = "trend-topic"
    AUTOCOMPLETE = "autocomplete"
    MANUAL = "manual"


class AnnotationClass(IntEnum):
    """Six-point item annotation scale used by the annotators."""

    ANTI = -1
    NEUTRAL = 0
    PRO = 1
    OFF_TOPIC = 2
    NON_ENGLISH = 3
    REMOVED = 4


_NORMALIZED = {-1: -1, 0: 0, 1: 1, 2: 0, 3: None, 4: None}


def normalize_annotation(raw: int) -> Optional[int]:
    """Map a six-point annotation onto the {-1, 0, +1} stance scale.

    Off-topic items count as neutral. Non-English and removed items return
    ``None`` and must be dropped before scoring.
    """
    if isinstance(raw, bool) or not isinstance(raw, int) or raw not in _NORMALIZED:
        raise DomainError(f"annotation class must be one of -1..4, got {raw!r}")
    return _NORMALIZED[int(raw)]


def parse_stance(value) -> int:
    """Parse a query/item stance given as int or text ("-1", "0", "+1")."""
    if isinstance(value, bool):
        raise DomainError(f"stance must be -1, 0 or 1, got {value!r}")
    if isinstance(value, str):
        try:
            value = int(value.strip())
        except ValueError:
            raise DomainError(f"stance must be -1, 0 or 1, got {value!r}") from None
    if value not in (-1, 0, 1):
        raise DomainError(f"stance must be -1, 0 or 1, got {value!r}")
    return int(value)


# -- text normalisation -----------------------------------------------------


def tokenize(text: str) -> list[str]:
    """Lowercase, drop punctuation (apostrophes included) and split on whitespace."""
    cleaned = _PUNCT.sub("", text.casefold().replace("-", " "))
    return cleaned.split()


def s_stem(word: str) -> str:
    """Plural-only suffix stripping (the classic "S" stemmer).

    Deliberately weak: "vaccines" and "vaccine" collide, "vaccination" does not.
    """
    if len(word) > 3 and word.endswith("ies") and not word.endswith(("eies", "aies")):
        return word[:-3] + "y"
    if len(word) > 3 and word.endswith("es") and not word.endswith(("aes", "ees", "oes")):
        return word[:-1]
    if len(word) > 2 and word.endswith("s") and not word.endswith(("us", "ss")):
        return word[:-1]
    return word


def stem_key(
    text: str,
    stopwords: Iterable[str] = DEFAULT_STOPWORDS,
    stemmer: Callable[[str], str] = s_stem,
) -> tuple[str, ...]:
    stop = set(stopwords)
    return tuple(stemmer(tok) for tok in tokenize(text) if tok not in stop)


def word_count(text: str) -> int:
    return len(text.split())


# -- domain types -----------------------------------------------------------


@dataclass(frozen=True)
class QueryCandidate:
    text: str
    source: Source
    seed: Optional[str] = None

    def __post_init__(self):
        text = " ".join(self.text.split())
        if not text:
            raise DomainError("query text is empty")
        if word_count(text) > MAX_CANDIDATE_WORDS:
            raise DomainError(f"query candidate longer than {MAX_CANDIDATE_WORDS} words: {text!r}")
        object.__setattr__(self, "text", text)
        try:
            object.__setattr__(self, "source", Source(self.source))
        except ValueError:
            raise DomainError(f"unknown suggestion source {self.source!r}") from None

    def to_dict(self) -> dict:
        return {"text": self.text, "source": self.source.value, "seed": self.seed}


@dataclass(frozen=True)
class AnnotatedQuery:
    text: str
    stance: int

    def __post_init__(self):
        if not self.text.strip():
            raise DomainError("query text is empty")
        object.__setattr__(self, "stance", parse_stance(self.stance))

    def to_dict(self) -> dict:
        return {"text": self.text, "stance": self.stance}


# -- suggestion providers ---------------------------------------------------


class SuggestionProvider(Protocol):
    name: str
    source: Source

    def suggest(self, key: str) -> list[QueryCandidate]: ...


class FileSuggestionProvider:
    """Suggestion provider backed by a JSONL fixture of ``{text, source, seed}``.

    ``suggest(key)`` returns records whose seed equals ``key``
    (case-insensitively) plus records that carry no seed at all.
    """

    def __init__(self, path, source: Source | str, name: Optional[str] = None):
        self.path = Path(path)
        self.source = Source(source)
        self.name = name or self.path.stem
        self._records: Optional[list[QueryCandidate]] = None

    def _load(self) -> list[QueryCandidate]:
        if self._records is None:
            try:
                lines = self.path.read_text(encoding="utf-8").splitlines()
            except OSError as exc:
                raise ConfigurationError(
                    f"suggestion provider {self.name!r}: cannot read {self.path}: {exc.strerror}"
                ) from exc
            records = []
            for lineno, line in enumerate(lines, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    records.append(
                        QueryCandidate(rec["text"], rec.get("source", self.source), rec.get("seed"))
                    )
                except (json.JSONDecodeError, KeyError, TypeError, DomainError) as exc:
                    raise ConfigurationError(
                        f"suggestion provider {self.name!r}: bad record at {self.path}:{lineno}: {exc}"
                    ) from exc
            self._records = records
        return self._records

    def suggest(self, key: str) -> list[QueryCandidate]:
        key = key.casefold()
        return [r for r in self._load() if r.seed is None or r.seed.casefold() == key]


class StaticSuggestionProvider:
    """In-memory provider, mostly for tests and manual additions."""

    def __init__(self, texts: Sequence[str], source: Source | str = Source.MANUAL, name: str = "static", seed=None):
        self.name = name
        self.source = Source(source)
        self._candidates = [QueryCandidate(t, self.source, seed) for t in texts]

    def suggest(self, key: str) -> list[QueryCandidate]:
        return list(self._candidates)


# -- curation ---------------------------------------------------------------


def curate_queries(
    providers: Sequence[SuggestionProvider], topic: str, seeds: Sequence[str]
) -> list[QueryCandidate]:
    """Union of all provider suggestions in provider order, first occurrence wins.

    Trend providers are asked about ``topic``; autocomplete providers are fed
    each seed in turn; manual providers are asked once.
    """
    if not providers:
        raise ConfigurationError("curate_queries needs at least one suggestion provider")
    if not seeds:
        raise ConfigurationError("curate_queries needs at least one seed query")

    out: list[QueryCandidate] = []
    seen: set[str] = set()
    for provider in providers:
        if provider.source is Source.AUTOCOMPLETE:
            batches = [provider.suggest(seed) for seed in seeds]
        else:
            batches = [provider.suggest(topic)]
        for batch in batches:
            for cand in batch:
                key = cand.text.casefold()
                if key not in seen:
                    seen.add(key)
                    out.append(cand)
    return out


def stem_equal_predicate(
    stopwords: Iterable[str] = DEFAULT_STOPWORDS, stemmer: Callable[[str], str] = s_stem
) -> Callable[[str, str], bool]:
    stop = frozenset(stopwords)
    return lambda a, b: stem_key(a, stop, stemmer) == stem_key(b, stop, stemmer)


def shortlist(
    candidates: Sequence[QueryCandidate],
    stopwords: Iterable[str] = DEFAULT_STOPWORDS,
    *,
    max_words: int = MAX_QUERY_WORDS,
    similar: Optional[Callable[[str, str], bool]] = None,
) -> list[QueryCandidate]:
    """Drop over-long queries, duplicates and near-duplicate variants.

    A query survives when it has at most ``max_words`` whitespace tokens and
    is not ``similar`` to an earlier survivor. The default similarity is
    token-wise stem equality after stopword removal, which folds
    singular/plural pairs together. Survivors keep their input order.
    """
    stop = frozenset(stopwords)
    kept: list[QueryCandidate] = []
    texts: set[str] = set()
    keys: set[tuple[str, ...]] = set()
    for cand in candidates:
        if word_count(cand.text) > max_words:
            continue
        folded = cand.text.casefold()
        if folded in texts:
            continue
        if similar is None:
            key = stem_key(cand.text, stop)
            if key in keys:
                continue
            keys.add(key)
        elif any(similar(cand.text, k.text) for k in kept):
            continue
        texts.add(folded)
        kept.append(cand)
    return kept


# -- files ------------------------------------------------------------------


def _read_jsonl(path: Path) -> list[dict]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from exc
    rows = []
    for lineno, line in enumerate(lines, 1):
        if line.strip():
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
    return rows


def parse_annotated_queries(rows: Iterable[dict]) -> list[AnnotatedQuery]:
    queries, seen = [], set()
    for row in rows:
        try:
            q = AnnotatedQuery(row["text"], row["stance"])
        except KeyError as exc:
            raise DataError(f"annotated query record missing field {exc}") from None
        if q.text.casefold() in seen:
            raise DataError(f"duplicate annotated query {q.text!r}")
        seen.add(q.text.casefold())
        queries.append(q)
    return queries


def load_annotated_queries(path) -> list[AnnotatedQuery]:
    return parse_annotated_queries(_read_jsonl(Path(path)))


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def default_queries() -> list[AnnotatedQuery]:
    """The bundled 29-query vaccine-controversy set used by the simulator."""
    text = resources.files("marketaudit.data").joinpath("queries.jsonl").read_text(encoding="utf-8")
    return parse_annotated_queries(json.loads(line) for line in text.splitlines() if line.strip())

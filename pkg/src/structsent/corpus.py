"""Sentence corpus handling: ingestion, exclusion filters, and splits.

Records carry provenance (domain, repository, article) and are filtered
by the corpus construction rules: sentences with equation markers,
excessive symbol density, or citation markers are excluded, then at
most a fixed number of sentences per article is kept. Splitting is
seeded and domain-stratified so a corpus maps to the same
train/validation/test manifest on every run.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

DOMAINS = ("physics", "cs", "math", "econ", "biology", "chemistry", "medicine")
REPOSITORIES = ("arxiv", "biorxiv", "chemrxiv", "pubmed")

# The (domain, repository) combinations present in the corpus.
VALID_PAIRS = frozenset(
    {
        ("physics", "arxiv"),
        ("cs", "arxiv"),
        ("math", "arxiv"),
        ("econ", "arxiv"),
        ("biology", "biorxiv"),
        ("chemistry", "chemrxiv"),
        ("medicine", "pubmed"),
    }
)

# Split fractions derived from the corpus-scale counts 958/138/274.
DEFAULT_RATIOS = (958 / 1370, 138 / 1370, 274 / 1370)
DEFAULT_SEED = 1370

EXCLUSION_REASONS = ("equation", "symbol", "citation_marker", "article_cap", "incomplete")


class MalformedRecordError(ValueError):
    """A corpus line could not be read as a sentence record."""


class TooFewRecordsError(ValueError):
    """The requested split would leave some partition empty."""


@dataclass
class SentenceRecord:
    """One scientific sentence with provenance."""

    id: str
    text: str
    domain: str
    repository: str
    article_id: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("record id must be non-empty")
        if not self.text.strip():
            raise ValueError(f"record {self.id}: text must be non-empty")
        if "\n" in self.text:
            raise ValueError(f"record {self.id}: text must be a single line")
        if (self.domain, self.repository) not in VALID_PAIRS:
            raise ValueError(
                f"record {self.id}: ({self.domain!r}, {self.repository!r}) "
                "is not a known domain/repository combination"
            )

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "domain": self.domain,
            "repository": self.repository,
            "article_id": self.article_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SentenceRecord":
        return cls(
            id=d["id"],
            text=d["text"],
            domain=d["domain"],
            repository=d["repository"],
            article_id=d["article_id"],
        )


@dataclass(frozen=True)
class FilterConfig:
    """Reproducible proxies for the corpus exclusion criteria.

    The symbol rule is a configurable stand-in for a manual judgment:
    a sentence is excluded when it contains LaTeX escapes, math
    operators, an inline dollar-math span, or a symbol character ratio
    above the threshold. ``incomplete_ids`` carries manually curated
    exclusions; incompleteness is not automatable.
    """

    equation_markers: tuple[str, ...] = (
        "=", "≠", "≤", "≥", "∑", "∏", "∫", "√", "±", "≈", "∝", "→", "^",
    )
    latex_escape_pattern: str = r"\\[A-Za-z]+"
    dollar_span_pattern: str = r"\$[^$]*\$"
    symbol_ratio_threshold: float = 0.15
    citation_patterns: tuple[str, ...] = (
        r"\[\d+(?:\s*[,;–-]\s*\d+)*\]",
        r"\bet al\b\.?",
    )
    article_cap: int = 6
    incomplete_ids: frozenset = frozenset()


_WORD_CHARS = re.compile(r"[0-9A-Za-z\s.,;:!?'\"()\-–—%]")


def _symbol_ratio(text: str) -> float:
    if not text:
        return 0.0
    symbols = sum(1 for c in text if not _WORD_CHARS.match(c))
    return symbols / len(text)


def exclusion_reason(text: str, rules: FilterConfig = FilterConfig()) -> str | None:
    """First matching exclusion rule for a sentence, or None if clean."""
    if any(marker in text for marker in rules.equation_markers):
        return "equation"
    if re.search(rules.latex_escape_pattern, text) or re.search(rules.dollar_span_pattern, text):
        return "equation"
    if _symbol_ratio(text) > rules.symbol_ratio_threshold:
        return "symbol"
    for pattern in rules.citation_patterns:
        if re.search(pattern, text):
            return "citation_marker"
    return None


@dataclass
class FilterReport:
    """Which records were excluded, and why."""

    excluded: list[tuple[str, str]]
    retained_count: int


def enforce_article_cap(records: list[SentenceRecord], cap: int = 6) -> list[SentenceRecord]:
    """Keep at most ``cap`` sentences per article, first in input order."""
    if cap < 1:
        raise ValueError(f"article cap must be >= 1, got {cap}")
    taken: dict[str, int] = {}
    kept = []
    for record in records:
        count = taken.get(record.article_id, 0)
        if count < cap:
            taken[record.article_id] = count + 1
            kept.append(record)
    return kept


def filter_sentences(
    records: list[SentenceRecord], rules: FilterConfig = FilterConfig()
) -> tuple[list[SentenceRecord], FilterReport]:
    """Apply exclusion rules, then the per-article cap.

    Always returns a report; an empty retained list is legal. The
    operation is idempotent: survivors pass every rule, so a second
    pass excludes nothing.
    """
    excluded: list[tuple[str, str]] = []
    survivors: list[SentenceRecord] = []
    for record in records:
        reason = exclusion_reason(record.text, rules)
        if reason is None and record.id in rules.incomplete_ids:
            reason = "incomplete"
        if reason is None:
            survivors.append(record)
        else:
            excluded.append((record.id, reason))
    capped = enforce_article_cap(survivors, rules.article_cap)
    capped_ids = {r.id for r in capped}
    excluded.extend((r.id, "article_cap") for r in survivors if r.id not in capped_ids)
    return capped, FilterReport(excluded=excluded, retained_count=len(capped))


@dataclass
class SplitManifest:
    """Persisted, seeded assignment of record ids to partitions."""

    seed: int
    train_ids: list[str]
    val_ids: list[str]
    test_ids: list[str]

    @property
    def counts(self) -> tuple[int, int, int]:
        return (len(self.train_ids), len(self.val_ids), len(self.test_ids))

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "counts": {"train": len(self.train_ids), "val": len(self.val_ids), "test": len(self.test_ids)},
            "train_ids": self.train_ids,
            "val_ids": self.val_ids,
            "test_ids": self.test_ids,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitManifest":
        return cls(
            seed=d["seed"],
            train_ids=list(d["train_ids"]),
            val_ids=list(d["val_ids"]),
            test_ids=list(d["test_ids"]),
        )


def _largest_remainder(quotas: list[float], total: int) -> list[int]:
    floors = [int(q) for q in quotas]
    leftover = total - sum(floors)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[:leftover]:
        floors[i] += 1
    return floors


def _allocate_stratified(
    group_sizes: dict[str, int], ratios: tuple[float, float, float], targets: list[int]
) -> dict[str, list[int]]:
    """Per-group split allocation hitting the global targets exactly.

    Every cell stays within +-1 of its proportional quota (floor or
    floor+1), group rows sum to the group size, and columns sum to the
    global targets. The bump assignment is found by a small exhaustive
    search over per-group bump subsets, preferring high remainders;
    a consistent rounding always exists.
    """
    groups = sorted(group_sizes)
    floors: dict[str, list[int]] = {}
    rems: dict[str, list[float]] = {}
    bumps_needed: dict[str, int] = {}
    for g in groups:
        quotas = [group_sizes[g] * r for r in ratios]
        floors[g] = [int(q) for q in quotas]
        rems[g] = [q - f for q, f in zip(quotas, floors[g])]
        bumps_needed[g] = group_sizes[g] - sum(floors[g])
    column_need = [targets[s] - sum(floors[g][s] for g in groups) for s in range(3)]

    options: dict[str, list[tuple[int, ...]]] = {}
    for g in groups:
        opts = list(combinations(range(3), bumps_needed[g]))
        opts.sort(key=lambda opt: (-sum(rems[g][s] for s in opt), opt))
        options[g] = opts

    assignment: dict[str, tuple[int, ...]] = {}

    def search(idx: int, need: list[int]) -> bool:
        if idx == len(groups):
            return all(v == 0 for v in need)
        g = groups[idx]
        remaining_bumps = sum(bumps_needed[h] for h in groups[idx:])
        if sum(need) != remaining_bumps:
            return False
        for opt in options[g]:
            if all(need[s] > 0 for s in opt):
                assignment[g] = opt
                if search(idx + 1, [need[s] - (1 if s in opt else 0) for s in range(3)]):
                    return True
                del assignment[g]
        return False

    if not search(0, list(column_need)):
        raise RuntimeError("no consistent stratified rounding found")  # unreachable
    return {
        g: [floors[g][s] + (1 if s in assignment[g] else 0) for s in range(3)] for g in groups
    }


def split_corpus(
    records: list[SentenceRecord],
    seed: int = DEFAULT_SEED,
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
    stratify: bool = True,
) -> SplitManifest:
    """Seeded train/validation/test split, stratified by domain.

    Deterministic given (records, seed): the same inputs produce the
    same manifest on every run. Partition sizes follow largest-remainder
    rounding of the ratios; with stratification each domain's share of
    every partition stays within one sentence of its global proportion.
    """
    if not records:
        raise TooFewRecordsError("cannot split an empty corpus")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    if any(r < 0 for r in ratios):
        raise ValueError("ratios must be non-negative")
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError("record ids must be unique for splitting")
    n = len(records)
    targets = _largest_remainder([n * r for r in ratios], n)
    if min(targets) == 0:
        raise TooFewRecordsError(f"split of {n} records at ratios {ratios} leaves a partition empty")

    rng = random.Random(seed)
    parts: list[list[str]] = [[], [], []]
    if stratify:
        groups: dict[str, list[str]] = {}
        for record in records:
            groups.setdefault(record.domain, []).append(record.id)
        allocation = _allocate_stratified(
            {g: len(members) for g, members in groups.items()}, ratios, targets
        )
        for g in sorted(groups):
            members = list(groups[g])
            rng.shuffle(members)
            a, b, _ = allocation[g]
            parts[0].extend(members[:a])
            parts[1].extend(members[a : a + b])
            parts[2].extend(members[a + b :])
    else:
        shuffled = list(ids)
        rng.shuffle(shuffled)
        a, b, _ = targets
        parts = [shuffled[:a], shuffled[a : a + b], shuffled[a + b :]]
    return SplitManifest(seed=seed, train_ids=parts[0], val_ids=parts[1], test_ids=parts[2])


def load_corpus(path: str | Path) -> list[SentenceRecord]:
    """Read a JSONL corpus; malformed lines are reported by number."""
    records = []
    seen_ids = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                record = SentenceRecord.from_dict(data)
            except (ValueError, KeyError, TypeError) as exc:
                raise MalformedRecordError(f"{path}:{lineno}: {exc}") from exc
            if record.id in seen_ids:
                raise MalformedRecordError(f"{path}:{lineno}: duplicate id {record.id!r}")
            seen_ids.add(record.id)
            records.append(record)
    return records


def save_corpus(records: list[SentenceRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.as_dict(), ensure_ascii=False) + "\n")


def save_manifest(manifest: SplitManifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest.as_dict(), indent=2) + "\n", encoding="utf-8")


def load_manifest(path: str | Path) -> SplitManifest:
    return SplitManifest.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def corpus_stats(records: list[SentenceRecord]) -> list[dict]:
    """Per (domain, repository) article and sentence counts, corpus order."""
    rows: dict[tuple[str, str], dict] = {}
    for record in records:
        key = (record.domain, record.repository)
        row = rows.setdefault(
            key, {"domain": key[0], "repository": key[1], "articles": set(), "sentences": 0}
        )
        row["articles"].add(record.article_id)
        row["sentences"] += 1
    ordered = []
    for domain in DOMAINS:
        for repository in REPOSITORIES:
            row = rows.get((domain, repository))
            if row:
                ordered.append(
                    {
                        "domain": domain,
                        "repository": repository,
                        "articles": len(row["articles"]),
                        "sentences": row["sentences"],
                    }
                )
    return ordered


def format_stats_table(records: list[SentenceRecord]) -> str:
    """Plain-text count table in the shape of the dataset summary."""
    rows = corpus_stats(records)
    lines = [f"{'Domain':<12}{'Repository':<12}{'Articles':>10}{'Sentences':>11}"]
    for row in rows:
        lines.append(
            f"{row['domain']:<12}{row['repository']:<12}{row['articles']:>10}{row['sentences']:>11}"
        )
    total_articles = sum(row["articles"] for row in rows)
    total_sentences = sum(row["sentences"] for row in rows)
    unique_repos = len({row["repository"] for row in rows})
    lines.append(
        f"{'Total':<12}{f'{unique_repos} (unique)':<12}{total_articles:>10}{total_sentences:>11}"
    )
    return "\n".join(lines)

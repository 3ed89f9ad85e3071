"""Reconstruction-quality metrics: BLEU, ROUGE-1 F1, METEOR, cosine.

All lexical metrics operate on token sequences from :func:`tokenize`
(NFC-normalized, lowercased, whitespace split, punctuation detached as
separate tokens). Candidate is the reconstructed sentence, reference
the original.

Conventions, pinned for reproducibility:

* BLEU is sentence-level BLEU-4 with uniform weights over the n-gram
  orders present in the candidate; a zero match count at any order is
  smoothed by placing epsilon = 0.1 in the numerator; brevity penalty
  exp(1 - r/c) applies when the candidate is shorter.
* ROUGE-1 F1 counts clipped unigram overlap over word tokens only;
  punctuation-only tokens are excluded on both sides (matching the
  common ROUGE toolkit behavior, and required to reproduce the
  reference per-pair scores).
* METEOR aligns unigrams in two stages (exact, then Porter-stemmed),
  taking the fewest-chunks alignment among maximal matchings;
  Fmean = 10PR / (R + 9P), fragmentation penalty 0.5 * (chunks/m)^3.
  No synonym stage (it would require an external lexical database).
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingVector
from .stemming import porter_stem

TokenSequence = list[str]


class EmptyReferenceError(ValueError):
    """BLEU is undefined against an empty reference."""


class EmptyInputError(ValueError):
    """Metric is undefined for an empty candidate or reference."""


class EmptyListError(ValueError):
    """Summary statistics need at least one scored pair."""


class DimensionMismatchError(ValueError):
    """Cosine needs vectors from the same provider and dimension."""


class ZeroVectorError(ValueError):
    """Cosine is undefined for a zero-norm vector."""


def _is_punct_char(c: str) -> bool:
    return unicodedata.category(c).startswith("P")


def is_punct_token(token: str) -> bool:
    """True when a token consists solely of punctuation characters."""
    return all(_is_punct_char(c) for c in token)


def tokenize(text: str) -> TokenSequence:
    """Deterministic shared tokenizer for every lexical metric.

    NFC-normalize, lowercase, split on whitespace, then detach leading
    and trailing punctuation of each chunk as separate tokens. Internal
    punctuation (hyphens, apostrophes, decimal points) stays attached.
    """
    text = unicodedata.normalize("NFC", text).lower()
    tokens: list[str] = []
    for chunk in text.split():
        leading: list[str] = []
        trailing: list[str] = []
        while chunk and _is_punct_char(chunk[0]):
            leading.append(chunk[0])
            chunk = chunk[1:]
        while chunk and _is_punct_char(chunk[-1]):
            trailing.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(leading)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(trailing))
    return tokens


def _ngram_counts(tokens: TokenSequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    candidate: TokenSequence,
    reference: TokenSequence,
    max_order: int = 4,
    epsilon: float = 0.1,
) -> float:
    """Sentence-level BLEU with add-epsilon smoothing of zero counts."""
    if not reference:
        raise EmptyReferenceError("BLEU reference must be non-empty")
    if not candidate:
        return 0.0
    log_sum = 0.0
    orders = 0
    for n in range(1, max_order + 1):
        cand_ngrams = _ngram_counts(candidate, n)
        total = sum(cand_ngrams.values())
        if total == 0:
            continue
        ref_ngrams = _ngram_counts(reference, n)
        matches = sum(min(count, ref_ngrams[gram]) for gram, count in cand_ngrams.items())
        numerator = matches if matches > 0 else epsilon
        log_sum += math.log(numerator / total)
        orders += 1
    geo_mean = math.exp(log_sum / orders)
    c, r = len(candidate), len(reference)
    brevity = 1.0 if c > r else math.exp(1.0 - r / c)
    return brevity * geo_mean


def rouge1_f1(candidate: TokenSequence, reference: TokenSequence) -> float:
    """Clipped unigram F1 over word tokens (punctuation excluded)."""
    if not candidate or not reference:
        raise EmptyInputError("ROUGE-1 needs non-empty candidate and reference")
    cand = [t for t in candidate if not is_punct_token(t)]
    ref = [t for t in reference if not is_punct_token(t)]
    if not cand or not ref:
        return 0.0
    cand_counts = Counter(cand)
    ref_counts = Counter(ref)
    matches = sum(min(count, ref_counts[t]) for t, count in cand_counts.items())
    if matches == 0:
        return 0.0
    precision = matches / len(cand)
    recall = matches / len(ref)
    return 2 * precision * recall / (precision + recall)


# Search budget for the fewest-chunks alignment; the first DFS descent
# always yields a complete alignment, so exhausting the budget degrades
# to a deterministic greedy result rather than failing.
_ALIGN_NODE_BUDGET = 200_000


def _align(candidate: TokenSequence, reference: TokenSequence) -> tuple[int, int]:
    """Two-stage unigram alignment; returns (match count, chunk count).

    Stage 1 matches equal tokens, stage 2 matches Porter-stem-equal
    leftovers; both stages are maximal, so the match count is fixed.
    Among those maximal matchings, a bounded branch-and-bound search
    picks the fewest-chunks assignment of occurrences.
    """
    cand_counts = Counter(candidate)
    ref_counts = Counter(reference)
    exact_quota = {
        t: min(c, ref_counts[t]) for t, c in cand_counts.items() if ref_counts.get(t, 0) > 0
    }
    cand_stems = [porter_stem(t) for t in candidate]
    ref_stems = [porter_stem(t) for t in reference]
    cand_left: Counter = Counter()
    for t, c in cand_counts.items():
        cand_left[porter_stem(t)] += c - exact_quota.get(t, 0)
    ref_left: Counter = Counter()
    for t, c in ref_counts.items():
        ref_left[porter_stem(t)] += c - exact_quota.get(t, 0)
    stem_quota = {
        g: min(c, ref_left[g]) for g, c in cand_left.items() if min(c, ref_left[g]) > 0
    }
    total_matches = sum(exact_quota.values()) + sum(stem_quota.values())
    if total_matches == 0:
        return 0, 0

    n = len(candidate)
    exact_rem = dict(exact_quota)
    stem_rem = dict(stem_quota)
    cand_rem = Counter(cand_counts)
    free_rem = Counter(cand_left)
    ref_avail_by_type: dict[str, list[int]] = {}
    for j, t in enumerate(reference):
        ref_avail_by_type.setdefault(t, []).append(j)
    ref_by_stem: dict[str, list[int]] = {}
    for j, g in enumerate(ref_stems):
        ref_by_stem.setdefault(g, []).append(j)
    ref_used = [False] * len(reference)
    ref_rem = Counter(ref_counts)

    best = {"chunks": total_matches + 1, "nodes": 0}

    def dfs(ci: int, chunks: int, last_ci: int, last_rj: int) -> None:
        if chunks >= best["chunks"]:
            return
        if best["nodes"] > _ALIGN_NODE_BUDGET:
            return
        best["nodes"] += 1
        if ci == n:
            best["chunks"] = chunks
            return
        t = candidate[ci]
        g = cand_stems[ci]

        def try_match(rj: int, kind: str) -> None:
            u = reference[rj]
            ref_used[rj] = True
            ref_rem[u] -= 1
            if kind == "exact":
                exact_rem[t] -= 1
            else:
                stem_rem[g] -= 1
                free_rem[g] -= 1
            cand_rem[t] -= 1
            new_chunks = chunks if (ci == last_ci + 1 and rj == last_rj + 1) else chunks + 1
            dfs(ci + 1, new_chunks, ci, rj)
            cand_rem[t] += 1
            if kind == "exact":
                exact_rem[t] += 1
            else:
                stem_rem[g] += 1
                free_rem[g] += 1
            ref_rem[u] += 1
            ref_used[rj] = False

        candidates_here: list[tuple[int, int, str]] = []
        if exact_rem.get(t, 0) > 0:
            for rj in ref_avail_by_type.get(t, ()):
                if not ref_used[rj]:
                    run = 0 if (ci == last_ci + 1 and rj == last_rj + 1) else 1
                    candidates_here.append((run, rj, "exact"))
        if stem_rem.get(g, 0) > 0 and cand_rem[t] - 1 >= exact_rem.get(t, 0):
            for rj in ref_by_stem.get(g, ()):
                u = reference[rj]
                if not ref_used[rj] and u != t and ref_rem[u] - 1 >= exact_rem.get(u, 0):
                    run = 0 if (ci == last_ci + 1 and rj == last_rj + 1) else 1
                    candidates_here.append((run, rj, "stem"))
        candidates_here.sort()
        for _, rj, kind in candidates_here:
            try_match(rj, kind)
        # Leave this occurrence unmatched, if quotas remain satisfiable.
        if cand_rem[t] - 1 >= exact_rem.get(t, 0) and free_rem[g] - 1 >= stem_rem.get(g, 0):
            cand_rem[t] -= 1
            free_rem[g] -= 1
            dfs(ci + 1, chunks, last_ci, last_rj)
            free_rem[g] += 1
            cand_rem[t] += 1

    dfs(0, 0, -2, -2)
    return total_matches, best["chunks"]


def meteor(candidate: TokenSequence, reference: TokenSequence) -> float:
    """Alignment-based score with fragmentation penalty."""
    if not candidate or not reference:
        raise EmptyInputError("METEOR needs non-empty candidate and reference")
    matches, chunks = _align(candidate, reference)
    if matches == 0:
        return 0.0
    precision = matches / len(candidate)
    recall = matches / len(reference)
    fmean = 10 * precision * recall / (recall + 9 * precision)
    penalty = 0.5 * (chunks / matches) ** 3
    return fmean * (1 - penalty)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Normalized dot product, clamped to [-1, 1] against rounding."""
    if a.provider_id != b.provider_id:
        raise DimensionMismatchError(
            f"provider mismatch: {a.provider_id!r} vs {b.provider_id!r}"
        )
    if a.values.shape != b.values.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.values.shape} vs {b.values.shape}")
    norm_a = float(np.linalg.norm(a.values))
    norm_b = float(np.linalg.norm(b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVectorError("cosine is undefined for zero vectors")
    value = float(np.dot(a.values, b.values)) / (norm_a * norm_b)
    return max(-1.0, min(1.0, value))


@dataclass(frozen=True)
class EvalScores:
    """Per-pair scores for one original/reconstruction pair."""

    cosine: float
    bleu: float
    rouge1_f1: float
    meteor: float

    def as_dict(self) -> dict[str, float]:
        return {
            "cosine": self.cosine,
            "bleu": self.bleu,
            "rouge1_f1": self.rouge1_f1,
            "meteor": self.meteor,
        }


METRIC_NAMES = ("cosine", "bleu", "rouge1_f1", "meteor")


@dataclass(frozen=True)
class MetricStat:
    mean: float
    std_dev: float


@dataclass(frozen=True)
class SummaryStats:
    """Mean and standard deviation per metric over the scored pairs."""

    n: int
    cosine: MetricStat
    bleu: MetricStat
    rouge1_f1: MetricStat
    meteor: MetricStat

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            **{
                name: {"mean": getattr(self, name).mean, "std_dev": getattr(self, name).std_dev}
                for name in METRIC_NAMES
            },
        }


def summarize(scores: list[EvalScores], sample_std: bool = False) -> SummaryStats:
    """Aggregate per-pair scores; population std-dev unless sample_std."""
    if not scores:
        raise EmptyListError("cannot summarize an empty score list")
    ddof = 1 if sample_std else 0
    stats = {}
    for name in METRIC_NAMES:
        values = np.array([getattr(s, name) for s in scores], dtype=float)
        std = float(np.std(values, ddof=ddof)) if len(values) > ddof else 0.0
        stats[name] = MetricStat(mean=float(np.mean(values)), std_dev=std)
    return SummaryStats(n=len(scores), **stats)


def score_pair(original: str, reconstruction: str, embedder) -> EvalScores:
    """Score one pair; the original is the reference for every metric."""
    reference = tokenize(original)
    candidate = tokenize(reconstruction)
    return EvalScores(
        cosine=cosine(embedder.embed(reconstruction), embedder.embed(original)),
        bleu=bleu(candidate, reference),
        rouge1_f1=rouge1_f1(candidate, reference),
        meteor=meteor(candidate, reference),
    )

"""Run orchestration: corpus -> structured JSON -> reconstruction -> report.

Each stage reads the previous stage's JSONL artifact and writes its
own, keyed by sentence id. Rows carrying an ``error`` key are per-id
failures; they never abort a run (whatever the model produced gets
evaluated), and every stage reconciles as inputs = outputs + failures.
Artifacts live under one run directory, so a run can be inspected,
resumed, or re-reported after the fact.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import DEFAULT_SEED, filter_sentences, load_corpus, load_manifest
from .embeddings import OfflineHashEmbedder, RemoteEmbedder
from .llmgateway import (
    ChatGateway,
    LlmRequest,
    ProviderConfig,
    ReconstructionRecord,
    harvest_structured,
    load_template,
    render_prompt,
)
from .metrics import EvalScores, SummaryStats, score_pair, summarize
from .penalty import ValidityMode, is_valid_json
from .schema import parse_structured, serialize_structured

STAGES = ("ingest", "generate", "validate", "reconstruct", "evaluate", "report")

SPLIT_NAMES = ("train", "val", "test")


class MissingPrerequisiteError(RuntimeError):
    """A selected stage's input artifact does not exist yet."""


class StageFailureError(RuntimeError):
    """A stage could not run at all (as opposed to per-id failures)."""


class IdMismatchError(ValueError):
    """Reconstruction ids that do not pair with any original."""


@dataclass
class RunConfig:
    """Everything one pipeline run needs, loadable from a JSON file."""

    corpus_path: str
    out_dir: str
    manifest_path: str | None = None
    split: str = "test"
    apply_filters: bool = True
    stages: tuple[str, ...] = STAGES
    provider: ProviderConfig | None = None
    embedding: dict = field(default_factory=lambda: {"provider": "offline"})
    seed: int = DEFAULT_SEED
    sample_std: bool = False
    max_depth: int = 8
    cache_dir: str | None = None

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        provider = ProviderConfig.from_dict(raw["provider"]) if raw.get("provider") else None
        return cls(
            corpus_path=raw["corpus"],
            out_dir=raw["out_dir"],
            manifest_path=raw.get("manifest"),
            split=raw.get("split", "test"),
            apply_filters=raw.get("apply_filters", True),
            stages=tuple(raw.get("stages", STAGES)),
            provider=provider,
            embedding=raw.get("embedding", {"provider": "offline"}),
            seed=raw.get("seed", DEFAULT_SEED),
            sample_std=raw.get("sample_std", False),
            max_depth=raw.get("max_depth", 8),
            cache_dir=raw.get("cache_dir"),
        )

    def as_dict(self) -> dict:
        return {
            "corpus": self.corpus_path,
            "out_dir": self.out_dir,
            "manifest": self.manifest_path,
            "split": self.split,
            "apply_filters": self.apply_filters,
            "stages": list(self.stages),
            "provider": (
                {k: v for k, v in self.provider.__dict__.items() if k != "credential_env"}
                | {"credential_env": self.provider.credential_env}
                if self.provider
                else None
            ),
            "embedding": self.embedding,
            "seed": self.seed,
            "sample_std": self.sample_std,
            "max_depth": self.max_depth,
        }


def read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def write_jsonl(path: str | Path, rows: list[dict]) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    os.replace(tmp, path)


def _artifact(config: RunConfig, stage: str) -> Path:
    suffix = "jsonl" if stage != "report" else "json"
    return Path(config.out_dir) / f"{stage}.{suffix}"


def _counts_path(config: RunConfig) -> Path:
    return Path(config.out_dir) / "stage_counts.json"


def _record_counts(config: RunConfig, stage: str, inputs: int, outputs: int, failures: int) -> None:
    path = _counts_path(config)
    counts = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
    counts[stage] = {"inputs": inputs, "outputs": outputs, "failures": failures}
    path.write_text(json.dumps(counts, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _ok_rows(rows: list[dict]) -> list[dict]:
    return [r for r in rows if "error" not in r or r["error"] is None]


def _stage_ingest(config: RunConfig) -> list[dict]:
    records = load_corpus(config.corpus_path)
    if config.manifest_path:
        if config.split not in SPLIT_NAMES:
            raise StageFailureError(f"unknown split {config.split!r}; expected one of {SPLIT_NAMES}")
        manifest = load_manifest(config.manifest_path)
        wanted = {
            "train": manifest.train_ids, "val": manifest.val_ids, "test": manifest.test_ids,
        }[config.split]
        by_id = {r.id: r for r in records}
        missing = [i for i in wanted if i not in by_id]
        if missing:
            raise StageFailureError(
                f"manifest {config.split} ids missing from corpus: {missing[:5]}"
                + ("..." if len(missing) > 5 else "")
            )
        records = [by_id[i] for i in wanted]
    rows: list[dict] = []
    if config.apply_filters:
        retained, report = filter_sentences(records)
        rows.extend(r.as_dict() for r in retained)
        rows.extend({"id": rid, "error": f"excluded: {reason}"} for rid, reason in report.excluded)
    else:
        rows.extend(r.as_dict() for r in records)
    return rows


def _complete_all(gateway: ChatGateway, requests: list[LlmRequest]) -> list[tuple[LlmRequest, object]]:
    """Run requests with per-id error capture, preserving input order."""
    from concurrent.futures import ThreadPoolExecutor

    def attempt(request: LlmRequest):
        try:
            return gateway.complete(request)
        except Exception as exc:  # recorded per id; the run continues
            return exc

    with ThreadPoolExecutor(max_workers=gateway.config.max_concurrency) as pool:
        results = list(pool.map(attempt, requests))
    return list(zip(requests, results))


def _stage_generate(config: RunConfig, gateway: ChatGateway) -> list[dict]:
    ingest_rows = _ok_rows(read_jsonl(_artifact(config, "ingest")))
    template = load_template("generate_json")
    requests = [
        LlmRequest(
            model=gateway.config.model,
            prompt=render_prompt(template, row["text"]),
            temperature=gateway.config.temperature,
            max_output_tokens=gateway.config.max_output_tokens,
            request_id=row["id"],
        )
        for row in ingest_rows
    ]
    rows = []
    for request, result in _complete_all(gateway, requests):
        if isinstance(result, Exception):
            rows.append({"id": request.request_id, "error": str(result)})
        else:
            rows.append(
                {
                    "id": request.request_id,
                    "response_text": result.text,
                    "cached": result.cached,
                    "attempts": result.attempts,
                }
            )
    return rows


def _stage_validate(config: RunConfig) -> list[dict]:
    generate_rows = _ok_rows(read_jsonl(_artifact(config, "generate")))
    originals = {
        row["id"]: row["text"] for row in _ok_rows(read_jsonl(_artifact(config, "ingest")))
    }
    rows = []
    for row in generate_rows:
        text = row["response_text"]
        strict_valid = is_valid_json(text, ValidityMode.STRICT)
        try:
            harvest = harvest_structured(
                text, original=originals.get(row["id"]), max_depth=config.max_depth
            )
        except ValueError as exc:
            rows.append({"id": row["id"], "strict_valid": strict_valid, "error": str(exc)})
            continue
        compliance = harvest.compliance
        rows.append(
            {
                "id": row["id"],
                "strict_valid": strict_valid,
                "structured": json.loads(serialize_structured(harvest.rep)),
                "compliance": (
                    {
                        "field_ratio_violations": compliance.field_ratio_violations,
                        "unknown_relations": compliance.unknown_relations,
                        "max_depth": compliance.max_depth,
                    }
                    if compliance
                    else None
                ),
            }
        )
    return rows


def _stage_reconstruct(config: RunConfig, gateway: ChatGateway) -> list[dict]:
    validate_rows = _ok_rows(read_jsonl(_artifact(config, "validate")))
    originals = {
        row["id"]: row["text"] for row in _ok_rows(read_jsonl(_artifact(config, "ingest")))
    }
    template = load_template("reconstruct")
    reps = [
        (row["id"], parse_structured(json.dumps(row["structured"]), max_depth=config.max_depth))
        for row in validate_rows
    ]
    requests = [
        LlmRequest(
            model=gateway.config.model,
            prompt=render_prompt(template, rep),
            temperature=gateway.config.temperature,
            max_output_tokens=gateway.config.max_output_tokens,
            request_id=rid,
        )
        for rid, rep in reps
    ]
    rows = []
    for (rid, rep), (request, result) in zip(reps, _complete_all(gateway, requests)):
        if isinstance(result, Exception):
            rows.append({"id": rid, "error": str(result)})
        else:
            # Normalize to one line; the contract is one sentence per input.
            text = " ".join(result.text.split())
            rows.append(
                ReconstructionRecord(
                    id=rid,
                    original_text=originals.get(rid, ""),
                    structured=rep,
                    reconstructed_text=text,
                ).as_dict()
            )
    return rows


def compare_pairs(
    originals: dict[str, str], reconstructions: list[dict], embedder
) -> tuple[list[dict], list[dict]]:
    """Score id-aligned pairs; missing reconstructions become failures.

    Reconstruction ids that pair with no original raise IdMismatchError.
    Returns (score rows, failure rows).
    """
    unpaired = [row["id"] for row in reconstructions if row["id"] not in originals]
    if unpaired:
        raise IdMismatchError(f"reconstruction ids with no original: {unpaired}")
    recon_by_id = {row["id"]: row for row in reconstructions}
    score_rows = []
    failure_rows = []
    for rid, original in originals.items():
        row = recon_by_id.get(rid)
        if row is None:
            failure_rows.append({"id": rid, "error": "missing reconstruction"})
            continue
        scores = score_pair(original, row["reconstructed_text"], embedder)
        score_rows.append({"id": rid, **scores.as_dict()})
    return score_rows, failure_rows


def _stage_evaluate(config: RunConfig, embedder) -> list[dict]:
    originals = {
        row["id"]: row["text"] for row in _ok_rows(read_jsonl(_artifact(config, "ingest")))
    }
    recon_rows = _ok_rows(read_jsonl(_artifact(config, "reconstruct")))
    score_rows, failure_rows = compare_pairs(originals, recon_rows, embedder)
    return score_rows + failure_rows


@dataclass
class RunReport:
    """Aggregate outcome of a run, in the summary-table shape."""

    validity_rate: float | None
    stats: SummaryStats | None
    n_scored: int
    stage_counts: dict
    config_echo: dict

    def as_dict(self) -> dict:
        return {
            "validity_rate": self.validity_rate,
            "n_scored": self.n_scored,
            "metrics": self.stats.as_dict() if self.stats else None,
            "stage_counts": self.stage_counts,
            "config": self.config_echo,
        }


_REPORT_LABELS = (
    ("Cosine Similarity", "cosine"),
    ("BLEU", "bleu"),
    ("ROUGE-1 F1", "rouge1_f1"),
    ("METEOR", "meteor"),
)


def render_report_text(report: RunReport) -> str:
    """Plain-text table: one row per metric, mean and std columns."""
    lines = [f"{'Metric':<20}{'Mean':>10}{'Std Dev':>10}"]
    for label, name in _REPORT_LABELS:
        if report.stats is None:
            lines.append(f"{label:<20}{'n/a':>10}{'n/a':>10}")
        else:
            stat = getattr(report.stats, name)
            lines.append(f"{label:<20}{stat.mean:>10.4f}{stat.std_dev:>10.4f}")
    validity = "n/a" if report.validity_rate is None else f"{report.validity_rate:.4f}"
    lines.append(f"JSON validity rate: {validity}")
    lines.append(f"Scored pairs: n = {report.n_scored}")
    return "\n".join(lines) + "\n"


def build_report(config: RunConfig) -> RunReport:
    scores_path = _artifact(config, "evaluate").with_name("scores.jsonl")
    score_rows = _ok_rows(read_jsonl(scores_path)) if scores_path.exists() else []
    stats = None
    if score_rows:
        stats = summarize(
            [
                EvalScores(
                    cosine=row["cosine"],
                    bleu=row["bleu"],
                    rouge1_f1=row["rouge1_f1"],
                    meteor=row["meteor"],
                )
                for row in score_rows
            ],
            sample_std=config.sample_std,
        )
    validate_path = _artifact(config, "validate")
    validity_rate = None
    if validate_path.exists():
        validate_rows = read_jsonl(validate_path)
        flags = [row["strict_valid"] for row in validate_rows if "strict_valid" in row]
        if flags:
            validity_rate = sum(flags) / len(flags)
    counts_path = _counts_path(config)
    stage_counts = json.loads(counts_path.read_text(encoding="utf-8")) if counts_path.exists() else {}
    return RunReport(
        validity_rate=validity_rate,
        stats=stats,
        n_scored=len(score_rows),
        stage_counts=stage_counts,
        config_echo=config.as_dict(),
    )


def make_embedder(config: RunConfig):
    spec_dict = config.embedding or {"provider": "offline"}
    kind = spec_dict.get("provider", "offline")
    if kind == "offline":
        return OfflineHashEmbedder()
    if kind == "remote":
        return RemoteEmbedder(
            endpoint=spec_dict["endpoint"],
            credential_env=spec_dict.get("credential_env"),
            timeout_s=spec_dict.get("timeout_s", 60.0),
            max_concurrency=spec_dict.get("max_concurrency", 4),
        )
    raise ValueError(f"unknown embedding provider {kind!r}")


def make_gateway(config: RunConfig) -> ChatGateway:
    if config.provider is None:
        raise StageFailureError("generate/reconstruct stages need a provider config")
    cache_dir = config.cache_dir or str(Path(config.out_dir) / "cache")
    return ChatGateway(config.provider, cache_dir)


def run_stage(
    stage: str,
    config: RunConfig,
    gateway: ChatGateway | None = None,
    embedder=None,
    resume: bool = False,
) -> Path:
    """Run one stage to its artifact; idempotent under ``resume``.

    A stage whose artifact already exists is reused when resuming.
    Prior-stage artifacts must exist (except for ingest).
    """
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prerequisites = {
        "ingest": (),
        "generate": ("ingest",),
        "validate": ("ingest", "generate"),
        "reconstruct": ("ingest", "validate"),
        "evaluate": ("ingest", "reconstruct"),
        "report": (),
    }[stage]
    for prior in prerequisites:
        if not _artifact(config, prior).exists():
            raise MissingPrerequisiteError(f"stage {stage!r} needs the {prior!r} artifact first")

    if stage == "report":
        report = build_report(config)
        path = out_dir / "report.json"
        path.write_text(
            json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        (out_dir / "report.txt").write_text(render_report_text(report), encoding="utf-8")
        return path

    if stage == "evaluate":
        path = out_dir / "scores.jsonl"
    else:
        path = _artifact(config, stage)
    if resume and path.exists():
        return path

    if stage == "ingest":
        rows = _stage_ingest(config)
        inputs = len(rows)
    elif stage == "generate":
        rows = _stage_generate(config, gateway or make_gateway(config))
        inputs = len(rows)
    elif stage == "validate":
        rows = _stage_validate(config)
        inputs = len(rows)
    elif stage == "reconstruct":
        rows = _stage_reconstruct(config, gateway or make_gateway(config))
        inputs = len(rows)
    else:
        rows = _stage_evaluate(config, embedder or make_embedder(config))
        inputs = len(rows)
    write_jsonl(path, rows)
    failures = sum(1 for r in rows if r.get("error"))
    _record_counts(config, stage, inputs=inputs, outputs=inputs - failures, failures=failures)
    return path


def run_pipeline(
    config: RunConfig,
    gateway: ChatGateway | None = None,
    embedder=None,
    resume: bool = False,
    stages: tuple[str, ...] | None = None,
) -> RunReport | None:
    """Run the selected stages in order; returns the report if built."""
    selected = stages or config.stages
    unknown = [s for s in selected if s not in STAGES]
    if unknown:
        raise ValueError(f"unknown stages: {unknown}")
    needs_gateway = {"generate", "reconstruct"} & set(selected)
    if needs_gateway and gateway is None:
        gateway = make_gateway(config)
    for stage in STAGES:
        if stage in selected:
            run_stage(stage, config, gateway=gateway, embedder=embedder, resume=resume)
    if "report" in selected:
        return build_report(config)
    return None

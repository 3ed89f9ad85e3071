"""Provider-agnostic chat-completion gateway.

Two jobs: render the structured-output and reconstruction prompts (with
few-shot examples shipped as editable assets), and call whatever
chat-completion endpoint is configured, with an on-disk response cache,
exponential-backoff retries, and credential hygiene (the credential is
read from the environment at call time and never logged or cached).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .penalty import extract_json_object
from .providers import AuthError, PostFn, ProviderUnavailableError, requests_post, resolve_credential
from .schema import (
    ComplianceReport,
    RelationCatalog,
    SchemaViolationError,
    StructuredRep,
    check_compliance,
    loads_strict,
    parse_structured,
    serialize_structured,
)

logger = logging.getLogger(__name__)

TEMPLATE_NAMES = ("generate_json", "reconstruct")


class SlotMismatchError(ValueError):
    """Payload type does not fit the template's user slot."""


class NoJsonFoundError(ValueError):
    """No parseable JSON object anywhere in a model response."""


class CacheCorruptError(RuntimeError):
    """A cache entry could not be read; it is reported and ignored."""


@dataclass(frozen=True)
class PromptTemplate:
    """A named prompt with few-shot examples and one user slot."""

    name: str
    system_text: str
    few_shot_examples: tuple[tuple[str, str], ...]
    user_slot: str


def load_template(name: str, catalog: RelationCatalog | None = None) -> PromptTemplate:
    """Load a packaged prompt template by name.

    The generate_json template embeds the relation catalog as reference;
    few-shot pairs come from the shared asset, flipped for the
    reconstruction direction. The shipped examples are curated
    stand-ins and are plain editable files.
    """
    if name not in TEMPLATE_NAMES:
        raise ValueError(f"unknown template {name!r}; expected one of {TEMPLATE_NAMES}")
    prompts = resources.files("structsent").joinpath("data/prompts")
    system_text = prompts.joinpath(f"{name}.txt").read_text("utf-8").strip()
    if name == "generate_json":
        if catalog is None:
            catalog = RelationCatalog.load()
        system_text = system_text.replace("{relations}", ", ".join(catalog.relations))
    raw_pairs = json.loads(prompts.joinpath("few_shot.json").read_text("utf-8"))
    pairs = []
    for pair in raw_pairs:
        rep = parse_structured(json.dumps(pair["json"]))
        serialized = serialize_structured(rep)
        if name == "generate_json":
            pairs.append((pair["sentence"], serialized))
        else:
            pairs.append((serialized, pair["sentence"]))
    slot = "{sentence}" if name == "generate_json" else "{structured}"
    return PromptTemplate(
        name=name, system_text=system_text, few_shot_examples=tuple(pairs), user_slot=slot
    )


def render_prompt(template: PromptTemplate, payload: Any) -> str:
    """Fill the template's user slot; deterministic for equal inputs."""
    if template.name == "generate_json":
        if isinstance(payload, StructuredRep) or not isinstance(payload, str) or not payload.strip():
            raise SlotMismatchError("generate_json expects a non-empty sentence string")
        input_label, output_label = "Sentence", "JSON"
        filled = payload
    else:
        if isinstance(payload, StructuredRep):
            filled = serialize_structured(payload)
        elif isinstance(payload, str):
            try:
                filled = serialize_structured(parse_structured(payload))
            except ValueError as exc:
                raise SlotMismatchError(
                    f"reconstruct expects a structured representation: {exc}"
                ) from exc
        else:
            raise SlotMismatchError("reconstruct expects a StructuredRep or its serialization")
        input_label, output_label = "JSON", "Sentence"
    blocks = [template.system_text]
    for i, (example_in, example_out) in enumerate(template.few_shot_examples, start=1):
        blocks.append(
            f"Example {i}:\n{input_label}: {example_in}\n{output_label}: {example_out}"
        )
    blocks.append(f"{input_label}: {filled}\n{output_label}:")
    return "\n\n".join(blocks)


@dataclass(frozen=True)
class ProviderConfig:
    """Connection settings for one chat-completion endpoint."""

    endpoint: str
    model: str
    credential_env: str | None = None
    timeout_s: float = 60.0
    max_concurrency: int = 4
    temperature: float = 0.0
    max_output_tokens: int = 1024
    retry_attempts: int = 3
    retry_base_s: float = 1.0

    @classmethod
    def from_dict(cls, d: dict) -> "ProviderConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass(frozen=True)
class LlmRequest:
    model: str
    prompt: str
    temperature: float = 0.0
    max_output_tokens: int = 1024
    request_id: str = ""


@dataclass
class LlmResponse:
    text: str
    latency_s: float
    token_usage: dict | None
    cached: bool
    attempts: int
    request_id: str = ""


def _cache_key(request: LlmRequest) -> str:
    material = "\x00".join([request.model, repr(request.temperature), request.prompt])
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


class ChatGateway:
    """Cached, retrying client for a single configured provider."""

    def __init__(
        self,
        config: ProviderConfig,
        cache_dir: str | Path,
        post_fn: PostFn = requests_post,
        sleep_fn=time.sleep,
        rng: random.Random | None = None,
    ):
        self.config = config
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.post_fn = post_fn
        self.sleep_fn = sleep_fn
        self.rng = rng or random.Random()

    def _cache_path(self, key: str) -> Path:
        return self.cache_dir / f"{key}.json"

    def _cache_read(self, key: str) -> dict | None:
        path = self._cache_path(key)
        if not path.exists():
            return None
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
            if not isinstance(entry, dict) or "response_text" not in entry:
                raise CacheCorruptError(f"cache entry {path.name} has no response_text")
            return entry
        except (ValueError, CacheCorruptError) as exc:
            logger.warning("ignoring corrupt cache entry %s: %s", path.name, exc)
            return None

    def _cache_write(self, key: str, request: LlmRequest, text: str, usage: dict | None) -> None:
        entry = {
            "model": request.model,
            "temperature": request.temperature,
            "prompt": request.prompt,
            "response_text": text,
            "token_usage": usage,
        }
        path = self._cache_path(key)
        # Unique temp name per writer: concurrent completions may share a
        # cache key, and each rename must stay atomic and conflict-free.
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False))
        os.replace(tmp, path)

    @staticmethod
    def _extract_text(body: Any) -> str:
        if isinstance(body, dict):
            if isinstance(body.get("text"), str):
                return body["text"]
            choices = body.get("choices")
            if isinstance(choices, list) and choices:
                first = choices[0]
                message = first.get("message") if isinstance(first, dict) else None
                if isinstance(message, dict) and isinstance(message.get("content"), str):
                    return message["content"]
                if isinstance(first, dict) and isinstance(first.get("text"), str):
                    return first["text"]
        raise ProviderUnavailableError("unrecognized completion response shape")

    def complete(self, request: LlmRequest) -> LlmResponse:
        """Return provider text, consulting the cache before the network.

        Transient failures (connection errors, HTTP 5xx) retry with
        exponential backoff and jitter; auth failures never retry.
        """
        key = _cache_key(request)
        entry = self._cache_read(key)
        if entry is not None:
            return LlmResponse(
                text=entry["response_text"],
                latency_s=0.0,
                token_usage=entry.get("token_usage"),
                cached=True,
                attempts=0,
                request_id=request.request_id,
            )
        headers = {"Content-Type": "application/json"}
        credential = resolve_credential(self.config.credential_env)
        if credential:
            headers["Authorization"] = f"Bearer {credential}"
        payload = {
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(1, self.config.retry_attempts + 1):
            start = time.monotonic()
            try:
                status, body = self.post_fn(
                    self.config.endpoint, payload, headers, self.config.timeout_s
                )
            except ProviderUnavailableError as exc:
                last_error = exc
                status, body = None, None
            if status is not None:
                if status in (401, 403):
                    raise AuthError(f"provider rejected credentials (HTTP {status})")
                if status == 200:
                    text = self._extract_text(body)
                    usage = body.get("usage") if isinstance(body, dict) else None
                    self._cache_write(key, request, text, usage)
                    return LlmResponse(
                        text=text,
                        latency_s=time.monotonic() - start,
                        token_usage=usage,
                        cached=False,
                        attempts=attempt,
                        request_id=request.request_id,
                    )
                if status < 500:
                    raise ProviderUnavailableError(f"provider returned HTTP {status}")
                last_error = ProviderUnavailableError(f"provider returned HTTP {status}")
            if attempt < self.config.retry_attempts:
                delay = self.config.retry_base_s * (2 ** (attempt - 1))
                delay += self.rng.uniform(0, self.config.retry_base_s)
                logger.warning(
                    "attempt %d/%d for request %s failed (%s); retrying in %.2fs",
                    attempt, self.config.retry_attempts, request.request_id, last_error, delay,
                )
                self.sleep_fn(delay)
        raise ProviderUnavailableError(
            f"provider unavailable after {self.config.retry_attempts} attempts: {last_error}"
        )

    def complete_many(self, requests: list[LlmRequest]) -> list[LlmResponse]:
        """Complete requests with bounded concurrency, preserving order."""
        if not requests:
            return []
        with ThreadPoolExecutor(max_workers=self.config.max_concurrency) as pool:
            return list(pool.map(self.complete, requests))


@dataclass
class HarvestResult:
    rep: StructuredRep
    compliance: ComplianceReport | None


@dataclass
class ReconstructionRecord:
    """Joins a sentence, its structured form, and the regenerated text."""

    id: str
    original_text: str
    structured: StructuredRep
    reconstructed_text: str

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "original_text": self.original_text,
            "structured": json.loads(serialize_structured(self.structured)),
            "reconstructed_text": self.reconstructed_text,
        }


def harvest_structured(
    response_text: str,
    original: str | None = None,
    catalog: RelationCatalog | None = None,
    max_depth: int = 8,
) -> HarvestResult:
    """Recover a structured representation from a raw model response.

    Runs extract-mode JSON recovery, then schema validation. When the
    original sentence is supplied the result carries a compliance
    report. Raises NoJsonFoundError when no JSON object exists and
    SchemaViolationError when the recovered object has the wrong shape;
    callers record these per id and continue.
    """
    candidate = extract_json_object(response_text)
    if candidate is None:
        try:
            loads_strict(response_text.strip())
        except ValueError:
            raise NoJsonFoundError("no JSON object found in response") from None
        # Parseable JSON, but not an object (e.g. a bare array).
        raise SchemaViolationError("top level must be a JSON object")
    rep = parse_structured(candidate, max_depth=max_depth)
    compliance = None
    if original is not None:
        compliance = check_compliance(rep, original, catalog=catalog)
    return HarvestResult(rep=rep, compliance=compliance)

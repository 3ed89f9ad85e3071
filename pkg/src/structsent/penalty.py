"""Structural loss: JSON-validity penalty over a batch of decoded strings.

The training objective adds, to the trainer-supplied cross-entropy
value, the fraction of decoded batch outputs that fail to parse as a
JSON object. The penalty is a scalar (it carries no gradient); the
arithmetic is total = ce + weight * failures / batch_size with weight
defaulting to 1.0, i.e. a plain unweighted sum.

Two validity modes exist. ``strict`` requires the whole trimmed string
to parse as one JSON object and is the training-loss default;
``extract`` scans for an embedded balanced ``{...}`` candidate and is
meant for inference-time harvesting of model responses.

A line-delimited request/response protocol (one JSON object per line)
exposes the same computation to external trainers; see
:func:`handle_request_line` and the ``penalty`` CLI subcommand.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Any, IO, Iterable, Sequence

from .schema import loads_strict


class EmptyBatchError(ValueError):
    """A penalty over zero candidates is undefined (0/0 is never 0)."""


class NonFiniteLossError(ValueError):
    """The base cross-entropy value must be finite."""


class ValidityMode(str, enum.Enum):
    STRICT = "strict"
    EXTRACT = "extract"


@dataclass(frozen=True)
class PenaltyFragment:
    """Failure count and penalty fraction for one batch."""

    failures: int
    batch_size: int
    struct_penalty: float


@dataclass(frozen=True)
class LossBreakdown:
    """All quantities of one combined-loss evaluation."""

    ce_loss: float
    batch_size: int
    failures: int
    struct_penalty: float
    penalty_weight: float
    total_loss: float


def _find_balanced_group(s: str, start: int) -> int | None:
    """Index of the brace closing the group opened at ``start``, or None.

    Tracks JSON string context so braces inside quoted strings do not
    affect balance.
    """
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(s)):
        c = s[i]
        if in_string:
            if escaped:
                escaped = False
            elif c == "\\":
                escaped = True
            elif c == '"':
                in_string = False
            continue
        if c == '"':
            in_string = True
        elif c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return i
    return None


def extract_json_object(s: str) -> str | None:
    """First embedded substring that parses as a JSON object, or None.

    Scans left to right; each ``{`` starts a balanced-group candidate.
    A candidate that fails to parse does not end the search: scanning
    resumes just past its opening brace, so an object nested in stray
    prose braces is still found.
    """
    i = 0
    while True:
        start = s.find("{", i)
        if start == -1:
            return None
        end = _find_balanced_group(s, start)
        if end is not None:
            candidate = s[start : end + 1]
            try:
                if isinstance(loads_strict(candidate), dict):
                    return candidate
            except ValueError:
                pass
        i = start + 1


def is_valid_json(s: str, mode: ValidityMode = ValidityMode.STRICT) -> bool:
    """Whether a decoded string counts as a valid JSON object.

    Only objects qualify; bare arrays and scalars are failures in both
    modes, since the target format is always an object.
    """
    mode = ValidityMode(mode)
    if mode is ValidityMode.STRICT:
        try:
            return isinstance(loads_strict(s.strip()), dict)
        except ValueError:
            return False
    return extract_json_object(s) is not None


def structure_penalty(
    batch: Sequence[str], mode: ValidityMode = ValidityMode.STRICT
) -> PenaltyFragment:
    """Count parse failures over a decoded batch and form f / |batch|."""
    if len(batch) == 0:
        raise EmptyBatchError("cannot compute a penalty over an empty batch")
    failures = sum(1 for s in batch if not is_valid_json(s, mode))
    return PenaltyFragment(
        failures=failures,
        batch_size=len(batch),
        struct_penalty=failures / len(batch),
    )


def combined_loss(
    ce_loss: float, fragment: PenaltyFragment, penalty_weight: float = 1.0
) -> LossBreakdown:
    """Add the structure penalty to the base cross-entropy value."""
    if math.isnan(ce_loss) or math.isinf(ce_loss):
        raise NonFiniteLossError(f"ce_loss must be finite, got {ce_loss!r}")
    if ce_loss < 0:
        raise ValueError(f"ce_loss must be non-negative, got {ce_loss!r}")
    if penalty_weight < 0:
        raise ValueError(f"penalty_weight must be non-negative, got {penalty_weight!r}")
    return LossBreakdown(
        ce_loss=ce_loss,
        batch_size=fragment.batch_size,
        failures=fragment.failures,
        struct_penalty=fragment.struct_penalty,
        penalty_weight=penalty_weight,
        total_loss=ce_loss + penalty_weight * fragment.struct_penalty,
    )


def _dumps_line(obj: dict[str, Any]) -> str:
    # Full-precision floats (repr round-trip) and stable key order by
    # construction; compact separators keep the line protocol canonical.
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def penalty_response(request_id: Any, fragment: PenaltyFragment) -> str:
    """Serialize one protocol response line for a computed fragment."""
    return _dumps_line(
        {
            "id": request_id,
            "failures": fragment.failures,
            "batch_size": fragment.batch_size,
            "penalty": fragment.struct_penalty,
        }
    )


def handle_request_line(line: str, default_mode: ValidityMode = ValidityMode.STRICT) -> str:
    """Process one protocol request line; always returns a response line.

    Request: {"id": ..., "mode": "strict"|"extract", "candidates": [...]}
    ("mode" may be omitted; the stream default applies). Malformed
    requests yield {"id": ..., "error": ...} so the stream continues.
    """
    request_id: Any = None
    try:
        request = loads_strict(line)
        if not isinstance(request, dict):
            raise ValueError("request must be a JSON object")
        request_id = request.get("id")
        mode = ValidityMode(request.get("mode", default_mode))
        if "candidates" not in request:
            raise ValueError("request missing 'candidates'")
        candidates = request["candidates"]
        if not isinstance(candidates, list) or not all(isinstance(c, str) for c in candidates):
            raise ValueError("'candidates' must be a list of strings")
        fragment = structure_penalty(candidates, mode)
    except (ValueError, EmptyBatchError) as exc:
        return _dumps_line({"id": request_id, "error": str(exc)})
    return penalty_response(request_id, fragment)


def penalty_service(
    lines: Iterable[str],
    out: IO[str],
    default_mode: ValidityMode = ValidityMode.STRICT,
) -> int:
    """Run the line protocol over a stream; returns the response count.

    Requests are processed strictly in order, one response per request
    line; blank lines are skipped. Output is flushed per line so a
    parent process can interleave requests and responses.
    """
    count = 0
    for line in lines:
        if not line.strip():
            continue
        out.write(handle_request_line(line, default_mode) + "\n")
        out.flush()
        count += 1
    return count

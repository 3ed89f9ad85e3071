"""Hierarchical JSON representation of a scientific sentence.

A structured representation has exactly two top-level parts: a core
statement (generic label plus the central claim) and a hierarchy of
relation-typed nodes whose components are either text fragments or
nested node lists. This module parses, validates, and deterministically
serializes such representations, and audits them against the field
compression rule and the reference relation catalog.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Union

DEFAULT_MAX_DEPTH = 8
DEFAULT_COMPRESSION_THRESHOLD = 0.30


class MalformedJsonError(ValueError):
    """Input is not parseable JSON at all."""


class SchemaViolationError(ValueError):
    """Input is valid JSON but does not have the required shape."""


def _reject_constant(name: str) -> None:
    # NaN/Infinity are not valid JSON per RFC 8259; keep parsing strict so
    # validity decisions agree with non-Python JSON parsers.
    raise ValueError(f"non-standard JSON constant: {name}")


def loads_strict(text: str) -> Any:
    """json.loads that rejects NaN/Infinity constants."""
    return json.loads(text, parse_constant=_reject_constant)


@dataclass
class CoreStatement:
    """Generic label plus the central claim of the sentence."""

    label: str
    claim: str
    extras: dict[str, Any] = field(default_factory=dict)


Component = Union[str, list["HierarchyNode"]]


@dataclass
class HierarchyNode:
    """One hierarchy level: a relation type and the components it connects.

    Components are ordered; each is either a text fragment or a nested
    list of further nodes. Unknown keys found next to relation/components
    are preserved opaquely in ``extras`` but never validated.
    """

    relation: str
    components: list[Component]
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass
class StructuredRep:
    """Top-level representation: core statement plus hierarchy node list."""

    core: CoreStatement
    hierarchy: list[HierarchyNode]

    def depth(self) -> int:
        """Deepest node nesting level; 0 for an empty hierarchy."""
        return max((_node_depth(n) for n in self.hierarchy), default=0)


@dataclass
class RelationCatalog:
    """Reference list of relation types; advisory unless closed."""

    relations: list[str]
    open_vocabulary: bool = True

    def __post_init__(self) -> None:
        normalized = [r.strip().lower() for r in self.relations]
        if any(not r for r in normalized):
            raise ValueError("relation catalog entries must be non-empty")
        if len(set(normalized)) != len(normalized):
            raise ValueError("relation catalog entries must be unique (case-insensitive)")
        self._normalized = frozenset(normalized)

    def __contains__(self, relation: str) -> bool:
        return relation.strip().lower() in self._normalized

    @classmethod
    def load(cls, path: str | Path | None = None, open_vocabulary: bool = True) -> "RelationCatalog":
        """Load a catalog from a JSON array file; defaults to the packaged list of 17."""
        if path is None:
            text = resources.files("structsent").joinpath("data/relations.json").read_text("utf-8")
        else:
            text = Path(path).read_text("utf-8")
        data = loads_strict(text)
        if not isinstance(data, list) or not all(isinstance(r, str) for r in data):
            raise ValueError("relation catalog file must be a JSON array of strings")
        return cls(relations=data, open_vocabulary=open_vocabulary)


@dataclass
class ComplianceReport:
    """Advisory audit of a representation against prompt constraints.

    ``field_ratio_violations`` lists (path, ratio) for every leaf text
    field longer than threshold * original sentence length. Violations
    warn rather than reject: generated output is judged by JSON validity
    only, so an over-long field is reported, never raised.
    """

    field_ratio_violations: list[tuple[str, float]]
    unknown_relations: list[str]
    max_depth: int


def _node_depth(node: HierarchyNode) -> int:
    child_depths = [
        _node_depth(child)
        for comp in node.components
        if isinstance(comp, list)
        for child in comp
    ]
    return 1 + max(child_depths, default=0)


def _require_nonempty_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise SchemaViolationError(f"{path}: expected a string, got {type(value).__name__}")
    if not value.strip():
        raise SchemaViolationError(f"{path}: must be non-empty")
    return value


def _parse_node(obj: Any, path: str, depth: int, max_depth: int) -> HierarchyNode:
    if not isinstance(obj, dict):
        raise SchemaViolationError(f"{path}: hierarchy node must be a JSON object")
    if depth > max_depth:
        raise SchemaViolationError(f"{path}: nesting depth exceeds {max_depth}")
    if "relation" not in obj:
        raise SchemaViolationError(f"{path}: missing 'relation'")
    if "components" not in obj:
        raise SchemaViolationError(f"{path}: missing 'components'")
    relation = _require_nonempty_str(obj["relation"], f"{path}.relation")
    raw_components = obj["components"]
    if not isinstance(raw_components, list) or not raw_components:
        raise SchemaViolationError(f"{path}.components: must be a non-empty list")
    components: list[Component] = []
    for i, comp in enumerate(raw_components):
        comp_path = f"{path}.components[{i}]"
        if isinstance(comp, str):
            components.append(comp)
        elif isinstance(comp, dict):
            # A bare node object is accepted as shorthand for a one-node list.
            components.append([_parse_node(comp, f"{comp_path}[0]", depth + 1, max_depth)])
        elif isinstance(comp, list):
            if not comp:
                raise SchemaViolationError(f"{comp_path}: nested node list must be non-empty")
            components.append(
                [
                    _parse_node(child, f"{comp_path}[{j}]", depth + 1, max_depth)
                    for j, child in enumerate(comp)
                ]
            )
        else:
            raise SchemaViolationError(
                f"{comp_path}: component must be a string or a list of nodes"
            )
    extras = {k: v for k, v in obj.items() if k not in ("relation", "components")}
    return HierarchyNode(relation=relation, components=components, extras=extras)


def parse_structured(text: str, max_depth: int = DEFAULT_MAX_DEPTH) -> StructuredRep:
    """Parse and validate one serialized representation.

    Accepts only a complete JSON object with exactly the two top-level
    keys ``core`` and ``hierarchy``. Raises MalformedJsonError for
    unparseable input and SchemaViolationError for shape problems.
    """
    try:
        data = loads_strict(text)
    except ValueError as exc:
        raise MalformedJsonError(f"not parseable JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaViolationError("top level must be a JSON object")
    if set(data.keys()) != {"core", "hierarchy"}:
        raise SchemaViolationError(
            f"top level must have exactly the keys 'core' and 'hierarchy', got {sorted(data.keys())}"
        )
    raw_core = data["core"]
    if not isinstance(raw_core, dict):
        raise SchemaViolationError("core: must be a JSON object")
    for key in ("label", "claim"):
        if key not in raw_core:
            raise SchemaViolationError(f"core: missing '{key}'")
    core = CoreStatement(
        label=_require_nonempty_str(raw_core["label"], "core.label"),
        claim=_require_nonempty_str(raw_core["claim"], "core.claim"),
        extras={k: v for k, v in raw_core.items() if k not in ("label", "claim")},
    )
    raw_hierarchy = data["hierarchy"]
    if not isinstance(raw_hierarchy, list):
        raise SchemaViolationError("hierarchy: must be a list")
    hierarchy = [
        _parse_node(node, f"hierarchy[{i}]", 1, max_depth) for i, node in enumerate(raw_hierarchy)
    ]
    return StructuredRep(core=core, hierarchy=hierarchy)


def _node_to_obj(node: HierarchyNode) -> dict[str, Any]:
    obj: dict[str, Any] = {"relation": node.relation}
    components: list[Any] = []
    for comp in node.components:
        if isinstance(comp, str):
            components.append(comp)
        else:
            components.append([_node_to_obj(child) for child in comp])
    obj["components"] = components
    for key in sorted(node.extras):
        obj[key] = node.extras[key]
    return obj


def serialize_structured(rep: StructuredRep) -> str:
    """Serialize deterministically: fixed key order, compact, UTF-8 safe.

    Key order is core before hierarchy, label before claim, relation
    before components; preserved extra keys follow in sorted order. The
    output round-trips: ``parse_structured(serialize_structured(rep))``
    equals ``rep``.
    """
    core_obj: dict[str, Any] = {"label": rep.core.label, "claim": rep.core.claim}
    for key in sorted(rep.core.extras):
        core_obj[key] = rep.core.extras[key]
    obj = {"core": core_obj, "hierarchy": [_node_to_obj(n) for n in rep.hierarchy]}
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _field_length(text: str, unit: str) -> int:
    normalized = unicodedata.normalize("NFC", text)
    if unit == "chars":
        return len(normalized)
    if unit == "tokens":
        return len(normalized.split())
    raise ValueError(f"unknown length unit: {unit!r}")


def _walk_text_fields(rep: StructuredRep):
    yield "core.label", rep.core.label
    yield "core.claim", rep.core.claim

    def walk_node(node: HierarchyNode, path: str):
        for i, comp in enumerate(node.components):
            comp_path = f"{path}.components[{i}]"
            if isinstance(comp, str):
                yield comp_path, comp
            else:
                for j, child in enumerate(comp):
                    yield from walk_node(child, f"{comp_path}[{j}]")

    for i, node in enumerate(rep.hierarchy):
        yield from walk_node(node, f"hierarchy[{i}]")


def _walk_relations(rep: StructuredRep):
    def walk_node(node: HierarchyNode):
        yield node.relation
        for comp in node.components:
            if isinstance(comp, list):
                for child in comp:
                    yield from walk_node(child)

    for node in rep.hierarchy:
        yield from walk_node(node)


def check_compliance(
    rep: StructuredRep,
    original: str,
    threshold: float = DEFAULT_COMPRESSION_THRESHOLD,
    catalog: RelationCatalog | None = None,
    unit: str = "chars",
) -> ComplianceReport:
    """Audit a representation against the original sentence.

    Flags every leaf text field (label, claim, string component) whose
    length exceeds ``threshold`` times the original sentence length, and
    every relation type missing from the catalog. Always returns a
    report; nothing here rejects.
    """
    if not original.strip():
        raise ValueError("original sentence must be non-empty")
    original_len = _field_length(original, unit)
    violations: list[tuple[str, float]] = []
    for path, text in _walk_text_fields(rep):
        ratio = _field_length(text, unit) / original_len
        if ratio > threshold:
            violations.append((path, ratio))
    if catalog is None:
        catalog = RelationCatalog.load()
    unknown: list[str] = []
    seen: set[str] = set()
    for relation in _walk_relations(rep):
        key = relation.strip().lower()
        if relation not in catalog and key not in seen:
            seen.add(key)
            unknown.append(relation)
    return ComplianceReport(
        field_ratio_violations=violations,
        unknown_relations=unknown,
        max_depth=rep.depth(),
    )

"""Parse, audit, and serialize one hierarchical sentence representation."""

from structsent import check_compliance, parse_structured, serialize_structured

sentence = (
    "Increasing the annealing temperature above 600 kelvin reduces the defect "
    "density in the crystal, although the grain size remains unchanged."
)

raw = """
{
  "core": {"label": "finding", "claim": "defect density falls on annealing"},
  "hierarchy": [
    {"relation": "condition", "components": ["annealing above 600 kelvin"]},
    {"relation": "concession", "components": ["grain size unchanged"]}
  ]
}
"""

rep = parse_structured(raw)
print("label:  ", rep.core.label)
print("claim:  ", rep.core.claim)
print("levels: ", [node.relation for node in rep.hierarchy])
print("depth:  ", rep.depth())

# Deterministic canonical form: fixed key order, compact, round-trips.
canonical = serialize_structured(rep)
print("\ncanonical serialization:")
print(canonical)
assert parse_structured(canonical) == rep

# The compression audit warns, never rejects: every leaf field is compared
# against 30% of the original sentence length.
report = check_compliance(rep, sentence)
print("\ncompression violations:", report.field_ratio_violations)
print("unknown relations:     ", report.unknown_relations)

# An over-long claim gets flagged with its path and ratio.
bloated = parse_structured(canonical.replace(
    "defect density falls on annealing",
    "the defect density of the annealed crystal decreases substantially when heated",
))
report = check_compliance(bloated, sentence)
for path, ratio in report.field_ratio_violations:
    print(f"violation at {path}: {ratio:.2f} of original length")

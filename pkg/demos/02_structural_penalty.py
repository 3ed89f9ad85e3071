"""The batch structural loss: JSON failure fraction added to a base loss."""

import json

from structsent import ValidityMode, combined_loss, is_valid_json, structure_penalty
from structsent.penalty import handle_request_line

decoded_batch = [
    '{"core":{"label":"finding","claim":"x rises"},"hierarchy":[]}',  # valid
    'Sure! Here is the JSON: {"core":{"label":"l","claim":"c"},"hierarchy":[]}',
    '{"core": {"label": "oops"',  # truncated decode
    "[1, 2, 3]",  # parses, but the target is always an object
]

for text in decoded_batch:
    strict = is_valid_json(text, ValidityMode.STRICT)
    extract = is_valid_json(text, ValidityMode.EXTRACT)
    print(f"strict={strict!s:<5} extract={extract!s:<5} {text[:50]!r}")

# Training uses strict mode: the decoded string itself must be one object.
fragment = structure_penalty(decoded_batch, ValidityMode.STRICT)
print(f"\nfailures f = {fragment.failures} of {fragment.batch_size}",
      f"-> penalty f/|batch| = {fragment.struct_penalty}")

breakdown = combined_loss(ce_loss=2.0, fragment=fragment)
print(f"total = {breakdown.ce_loss} + {breakdown.struct_penalty} = {breakdown.total_loss}")

# The same computation over the line protocol an external trainer speaks.
request = json.dumps({"id": "step-1", "mode": "strict", "candidates": decoded_batch})
print("\nprotocol request: ", request[:80], "...")
print("protocol response:", handle_request_line(request))

"""Prompt rendering and the caching gateway, driven by a scripted transport."""

import tempfile

from structsent import ChatGateway, LlmRequest, ProviderConfig, harvest_structured
from structsent.llmgateway import load_template, render_prompt

generate = load_template("generate_json")
prompt = render_prompt(generate, "Higher pressure shortens the reaction time unless a catalyst is present.")
print("--- generation prompt (head) ---")
print("\n".join(prompt.splitlines()[:8]))
print(f"... ({len(prompt)} chars, {len(generate.few_shot_examples)} few-shot examples)\n")


def scripted_transport(url, payload, headers, timeout_s):
    # Stands in for a real chat-completion endpoint.
    reply = ('Here is the representation: {"core":{"label":"finding",'
             '"claim":"catalyst-free runs take longer"},"hierarchy":'
             '[{"relation":"condition","components":["higher pressure"]},'
             '{"relation":"exception","components":["catalyst present"]}]}')
    return 200, {"choices": [{"message": {"content": reply}}]}


gateway = ChatGateway(
    ProviderConfig(endpoint="https://llm.example/v1/chat", model="demo-model"),
    cache_dir=tempfile.mkdtemp(prefix="structsent-cache-"),
    post_fn=scripted_transport,
)

request = LlmRequest(model="demo-model", prompt=prompt, request_id="demo-1")
first = gateway.complete(request)
second = gateway.complete(request)
print(f"first call:  cached={first.cached} attempts={first.attempts}")
print(f"second call: cached={second.cached} (byte-identical text: {first.text == second.text})")

# Responses rarely come back as bare JSON; harvest runs extract-mode
# recovery and then schema validation.
result = harvest_structured(first.text)
print("\nharvested claim:", result.rep.core.claim)
print("relations:      ", [n.relation for n in result.rep.hierarchy])

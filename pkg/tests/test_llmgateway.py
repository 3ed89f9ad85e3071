import json
import logging

import pytest

from structsent.embeddings import RemoteEmbedder
from structsent.llmgateway import (
    AuthError,
    ChatGateway,
    LlmRequest,
    NoJsonFoundError,
    ProviderConfig,
    ProviderUnavailableError,
    ReconstructionRecord,
    harvest_structured,
    load_template,
    render_prompt,
    SlotMismatchError,
)
from structsent.schema import (
    RelationCatalog,
    SchemaViolationError,
    check_compliance,
    parse_structured,
    serialize_structured,
)

REP_TEXT = '{"core":{"label":"finding","claim":"X increases Y"},"hierarchy":[]}'


class FakeTransport:
    """Scripted post_fn; records calls, plays back queued responses."""

    def __init__(self, script=None):
        self.calls = []
        self.script = list(script or [])

    def __call__(self, url, payload, headers, timeout_s):
        self.calls.append({"url": url, "payload": payload, "headers": dict(headers)})
        if not self.script:
            return 200, {"choices": [{"message": {"content": "ok"}}]}
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def make_gateway(tmp_path, transport, **overrides):
    config = ProviderConfig(
        endpoint="https://llm.example/v1/chat",
        model="test-model",
        retry_base_s=0.0,
        **overrides,
    )
    return ChatGateway(config, tmp_path / "cache", post_fn=transport, sleep_fn=lambda s: None)


class TestTemplates:
    def test_generate_template_carries_instructions_and_catalog(self):
        template = load_template("generate_json")
        text = template.system_text
        assert "copying" in text
        assert "30%" in text
        assert "hierarch" in text.lower()
        for relation in RelationCatalog.load().relations:
            assert relation in text
        assert len(template.few_shot_examples) == 3

    def test_reconstruct_template_interprets_all_parts(self):
        template = load_template("reconstruct")
        for needle in ("core claim", "components", "relation types", "one coherent sentence"):
            assert needle in template.system_text

    def test_few_shot_assets_are_valid_and_compliant(self):
        template = load_template("generate_json")
        for sentence, serialized in template.few_shot_examples:
            rep = parse_structured(serialized)
            report = check_compliance(rep, sentence)
            assert report.field_ratio_violations == []
            assert report.unknown_relations == []

    def test_render_contains_payload_once_and_is_deterministic(self):
        template = load_template("generate_json")
        sentence = "A perfectly ordinary sentence about measurement."
        first = render_prompt(template, sentence)
        second = render_prompt(template, sentence)
        assert first == second
        assert first.count(sentence) == 1

    def test_render_includes_few_shot_verbatim_in_order(self):
        template = load_template("generate_json")
        prompt = render_prompt(template, "Another sentence.")
        positions = [prompt.index(example_in) for example_in, _ in template.few_shot_examples]
        assert positions == sorted(positions)

    def test_reconstruct_accepts_rep_and_serialized_string(self):
        template = load_template("reconstruct")
        rep = parse_structured(REP_TEXT)
        assert render_prompt(template, rep) == render_prompt(template, REP_TEXT)

    def test_slot_mismatch(self):
        generate = load_template("generate_json")
        reconstruct = load_template("reconstruct")
        with pytest.raises(SlotMismatchError):
            render_prompt(generate, parse_structured(REP_TEXT))
        with pytest.raises(SlotMismatchError):
            render_prompt(generate, "   ")
        with pytest.raises(SlotMismatchError):
            render_prompt(reconstruct, "not a structured representation")
        with pytest.raises(SlotMismatchError):
            render_prompt(reconstruct, 42)


class TestGateway:
    def _request(self):
        return LlmRequest(model="test-model", prompt="say ok", request_id="r1")

    def test_success_and_cache_round_trip(self, tmp_path):
        transport = FakeTransport()
        gateway = make_gateway(tmp_path, transport)
        first = gateway.complete(self._request())
        assert first.text == "ok"
        assert not first.cached and first.attempts == 1
        second = gateway.complete(self._request())
        assert second.cached and second.text == first.text
        assert len(transport.calls) == 1, "second call must be served from cache"

    def test_retries_then_success_records_attempts(self, tmp_path):
        transport = FakeTransport(
            script=[
                (500, "oops"),
                (503, "oops"),
                (200, {"choices": [{"message": {"content": "fine"}}]}),
            ]
        )
        gateway = make_gateway(tmp_path, transport)
        response = gateway.complete(self._request())
        assert response.text == "fine"
        assert response.attempts == 3

    def test_provider_unavailable_after_exhausted_retries(self, tmp_path):
        transport = FakeTransport(script=[(500, "x")] * 3)
        gateway = make_gateway(tmp_path, transport)
        with pytest.raises(ProviderUnavailableError):
            gateway.complete(self._request())
        assert len(transport.calls) == 3

    def test_connection_errors_retry(self, tmp_path):
        transport = FakeTransport(
            script=[
                ProviderUnavailableError("boom"),
                (200, {"text": "recovered"}),
            ]
        )
        gateway = make_gateway(tmp_path, transport)
        assert gateway.complete(self._request()).text == "recovered"

    def test_auth_error_before_any_network_call(self, tmp_path, monkeypatch):
        monkeypatch.delenv("MISSING_KEY", raising=False)
        transport = FakeTransport()
        gateway = make_gateway(tmp_path, transport, credential_env="MISSING_KEY")
        with pytest.raises(AuthError):
            gateway.complete(self._request())
        assert transport.calls == []

    def test_http_401_is_auth_error_without_retry(self, tmp_path):
        transport = FakeTransport(script=[(401, "denied")])
        gateway = make_gateway(tmp_path, transport)
        with pytest.raises(AuthError):
            gateway.complete(self._request())
        assert len(transport.calls) == 1

    def test_other_4xx_fails_fast(self, tmp_path):
        transport = FakeTransport(script=[(404, "nope")])
        gateway = make_gateway(tmp_path, transport)
        with pytest.raises(ProviderUnavailableError):
            gateway.complete(self._request())
        assert len(transport.calls) == 1

    def test_corrupt_cache_entry_ignored_and_recomputed(self, tmp_path, caplog):
        transport = FakeTransport()
        gateway = make_gateway(tmp_path, transport)
        gateway.complete(self._request())
        entry = next((tmp_path / "cache").glob("*.json"))
        entry.write_text("{ not json", encoding="utf-8")
        with caplog.at_level(logging.WARNING):
            response = gateway.complete(self._request())
        assert not response.cached
        assert "corrupt" in caplog.text.lower()
        assert len(transport.calls) == 2

    def test_credential_never_in_cache_or_logs(self, tmp_path, monkeypatch, caplog):
        secret = "super-secret-token-4711"
        monkeypatch.setenv("LLM_KEY", secret)
        transport = FakeTransport(script=[(500, "x"), (200, {"text": "done"})])
        gateway = make_gateway(tmp_path, transport, credential_env="LLM_KEY")
        with caplog.at_level(logging.DEBUG):
            gateway.complete(self._request())
        assert transport.calls[0]["headers"]["Authorization"] == f"Bearer {secret}"
        for cache_file in (tmp_path / "cache").glob("*"):
            assert secret not in cache_file.read_text(encoding="utf-8")
        assert secret not in caplog.text

    def test_complete_many_preserves_order(self, tmp_path):
        transport = FakeTransport(
            script=[(200, {"text": f"answer-{i}"}) for i in range(4)]
        )
        gateway = make_gateway(tmp_path, transport, max_concurrency=1)
        requests = [
            LlmRequest(model="test-model", prompt=f"q{i}", request_id=str(i)) for i in range(4)
        ]
        responses = gateway.complete_many(requests)
        assert [r.request_id for r in responses] == ["0", "1", "2", "3"]


class TestHarvest:
    def test_prose_wrapped_object(self):
        result = harvest_structured("Sure, here you go: " + REP_TEXT + " Enjoy!")
        assert result.rep.core.claim == "X increases Y"

    def test_no_braces(self):
        with pytest.raises(NoJsonFoundError):
            harvest_structured("there is nothing structured here")

    def test_bare_array_is_schema_violation(self):
        with pytest.raises(SchemaViolationError):
            harvest_structured("[1, 2]")

    def test_wrong_shape_object(self):
        with pytest.raises(SchemaViolationError):
            harvest_structured('{"foo": 1}')

    def test_round_trip_through_prose(self):
        rep = parse_structured(REP_TEXT)
        embedded = "Leading words. " + serialize_structured(rep) + " Trailing words."
        assert harvest_structured(embedded).rep == rep

    def test_compliance_attached_when_original_given(self):
        result = harvest_structured(REP_TEXT, original="o" * 200)
        assert result.compliance is not None
        assert result.compliance.field_ratio_violations == []

    def test_reconstruction_record_serializes(self):
        rep = parse_structured(REP_TEXT)
        record = ReconstructionRecord(
            id="1", original_text="orig", structured=rep, reconstructed_text="recon"
        )
        data = record.as_dict()
        assert data["structured"]["core"]["label"] == "finding"
        assert json.dumps(data)


class TestRemoteEmbedder:
    def test_happy_path(self):
        def post_fn(url, payload, headers, timeout_s):
            return 200, {"vectors": [[1.0, 0.0], [0.0, 1.0]]}

        embedder = RemoteEmbedder("https://embed.example", post_fn=post_fn)
        vectors = embedder.embed_batch(["a", "b"])
        assert vectors[0].values.tolist() == [1.0, 0.0]
        assert vectors[0].provider_id == "remote:https://embed.example"

    def test_http_error(self):
        embedder = RemoteEmbedder(
            "https://embed.example", post_fn=lambda *a: (500, "down")
        )
        with pytest.raises(ProviderUnavailableError):
            embedder.embed("x")

    def test_missing_vectors_key(self):
        embedder = RemoteEmbedder("https://embed.example", post_fn=lambda *a: (200, {}))
        with pytest.raises(ProviderUnavailableError):
            embedder.embed("x")

    def test_count_mismatch(self):
        embedder = RemoteEmbedder(
            "https://embed.example", post_fn=lambda *a: (200, {"vectors": []})
        )
        with pytest.raises(ProviderUnavailableError):
            embedder.embed("x")

    def test_credential_required_when_named(self, monkeypatch):
        monkeypatch.delenv("EMBED_KEY", raising=False)
        embedder = RemoteEmbedder(
            "https://embed.example",
            credential_env="EMBED_KEY",
            post_fn=lambda *a: (200, {"vectors": [[1.0]]}),
        )
        with pytest.raises(AuthError):
            embedder.embed("x")

import io
import json
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from structsent.penalty import (
    EmptyBatchError,
    LossBreakdown,
    NonFiniteLossError,
    ValidityMode,
    combined_loss,
    extract_json_object,
    handle_request_line,
    is_valid_json,
    penalty_response,
    penalty_service,
    structure_penalty,
)

VALID_OBJECT = '{"core":{"label":"l","claim":"c"},"hierarchy":[]}'
MALFORMED = '{"a":}'
PROSE_WRAPPED = 'The JSON is: {"a": 1} as requested'

STRICT = ValidityMode.STRICT
EXTRACT = ValidityMode.EXTRACT


class TestValidity:
    def test_object_is_valid_in_strict(self):
        assert is_valid_json('{"a":1}', STRICT)

    def test_prose_wrapped_fails_strict_passes_extract(self):
        assert not is_valid_json(PROSE_WRAPPED, STRICT)
        assert is_valid_json(PROSE_WRAPPED, EXTRACT)

    def test_malformed_fails_both(self):
        assert not is_valid_json(MALFORMED, STRICT)
        assert not is_valid_json(MALFORMED, EXTRACT)

    @pytest.mark.parametrize("s", ["[1,2]", '"text"', "3.5", "true", "null"])
    def test_non_object_json_fails_both_modes(self, s):
        assert not is_valid_json(s, STRICT)
        assert not is_valid_json(s, EXTRACT)

    def test_whitespace_padding_ok_in_strict(self):
        assert is_valid_json('   {"a": 1}\n', STRICT)

    def test_trailing_garbage_fails_strict(self):
        assert not is_valid_json('{"a":1} {"b":2}', STRICT)

    @pytest.mark.parametrize("s", ['{"a": NaN}', '{"a": Infinity}', "NaN"])
    def test_nonstandard_constants_rejected(self, s):
        assert not is_valid_json(s, STRICT)
        assert not is_valid_json(s, EXTRACT)


class TestExtraction:
    def test_braces_inside_strings_do_not_break_balance(self):
        assert extract_json_object('x {"a": "}"} y') == '{"a": "}"}'

    def test_object_inside_stray_braces_found(self):
        assert extract_json_object('{ junk {"a": 1} }') == '{"a": 1}'

    def test_second_candidate_tried_after_first_fails(self):
        assert extract_json_object('{not json} then {"a":1}') == '{"a":1}'

    def test_unbalanced_returns_none(self):
        assert extract_json_object('{"a": 1') is None

    def test_no_braces_returns_none(self):
        assert extract_json_object("nothing here") is None

    def test_escaped_quotes_handled(self):
        s = '{"a": "say \\"hi\\" {now}"}'
        assert extract_json_object("prefix " + s) == s


class TestPenalty:
    def test_half_failures(self):
        fragment = structure_penalty(['{"a":1}', "not json"], STRICT)
        assert fragment.failures == 1
        assert fragment.batch_size == 2
        assert fragment.struct_penalty == 0.5

    def test_all_valid_batch(self):
        fragment = structure_penalty(['{"a":%d}' % i for i in range(4)], STRICT)
        assert fragment.struct_penalty == 0.0

    def test_full_scale_all_valid_batch(self):
        # 274 valid outputs: validity rate 100%, penalty 0.
        batch = ['{"core":{"label":"l","claim":"c%d"},"hierarchy":[]}' % i for i in range(274)]
        fragment = structure_penalty(batch, STRICT)
        assert fragment.failures == 0
        assert fragment.batch_size == 274
        assert fragment.struct_penalty == 0.0

    def test_empty_batch_is_an_error(self):
        with pytest.raises(EmptyBatchError):
            structure_penalty([], STRICT)


class TestCombinedLoss:
    def test_example_sum(self):
        fragment = structure_penalty(['{"a":1}', "nope"], STRICT)
        assert combined_loss(2.0, fragment).total_loss == 2.5

    def test_additive_identity(self):
        fragment = structure_penalty(['{"a":1}'], STRICT)
        assert combined_loss(0.0, fragment).total_loss == 0.0

    def test_hand_arithmetic(self):
        # 1.25 + 3/4 = 2.0
        fragment = structure_penalty(["x", "y", "z", '{"a":1}'], STRICT)
        breakdown = combined_loss(1.25, fragment)
        assert breakdown.failures == 3
        assert breakdown.total_loss == 2.0

    def test_weight_scales_penalty_only(self):
        fragment = structure_penalty(["bad", '{"a":1}'], STRICT)
        assert combined_loss(1.0, fragment, penalty_weight=0.0).total_loss == 1.0
        assert combined_loss(1.0, fragment, penalty_weight=2.0).total_loss == 2.0

    @pytest.mark.parametrize("ce", [float("nan"), float("inf"), float("-inf")])
    def test_non_finite_rejected(self, ce):
        fragment = structure_penalty(['{"a":1}'], STRICT)
        with pytest.raises(NonFiniteLossError):
            combined_loss(ce, fragment)

    def test_negative_ce_rejected(self):
        fragment = structure_penalty(['{"a":1}'], STRICT)
        with pytest.raises(ValueError):
            combined_loss(-0.1, fragment)

    def test_breakdown_fields_consistent(self):
        fragment = structure_penalty(["bad", '{"a":1}', "worse"], STRICT)
        breakdown = combined_loss(0.75, fragment)
        assert isinstance(breakdown, LossBreakdown)
        # Additivity is definitional: total is exactly the sum as computed.
        assert breakdown.total_loss == breakdown.ce_loss + breakdown.struct_penalty
        assert breakdown.struct_penalty == breakdown.failures / breakdown.batch_size


ELEMENTS = [VALID_OBJECT, MALFORMED, PROSE_WRAPPED]


def all_batches(max_size=3):
    for size in range(1, max_size + 1):
        yield from product(ELEMENTS, repeat=size)


class TestExhaustiveLaws:
    def test_counts_and_bounds_exact(self):
        for mode in (STRICT, EXTRACT):
            for batch in all_batches():
                expected_failures = sum(1 for s in batch if not is_valid_json(s, mode))
                fragment = structure_penalty(list(batch), mode)
                assert fragment.failures == expected_failures
                assert fragment.struct_penalty == expected_failures / len(batch)
                assert 0.0 <= fragment.struct_penalty <= 1.0
                assert (fragment.struct_penalty == 0.0) == (expected_failures == 0)
                assert (fragment.struct_penalty == 1.0) == (expected_failures == len(batch))

    def test_mode_dominance(self):
        for batch in all_batches():
            for s in batch:
                if is_valid_json(s, STRICT):
                    assert is_valid_json(s, EXTRACT)

    def test_permutation_invariance(self):
        for mode in (STRICT, EXTRACT):
            for batch in all_batches():
                fragment = structure_penalty(list(batch), mode)
                fragment_rev = structure_penalty(list(reversed(batch)), mode)
                assert fragment.failures == fragment_rev.failures
                assert fragment.struct_penalty == fragment_rev.struct_penalty

    def test_concatenation_law(self):
        for mode in (STRICT, EXTRACT):
            for a in all_batches(2):
                for b in all_batches(2):
                    fa = structure_penalty(list(a), mode)
                    fb = structure_penalty(list(b), mode)
                    fab = structure_penalty(list(a) + list(b), mode)
                    assert fab.failures == fa.failures + fb.failures
                    assert fab.struct_penalty == (fa.failures + fb.failures) / (
                        fa.batch_size + fb.batch_size
                    )

    def test_protocol_bit_identical_to_library(self):
        for mode in (STRICT, EXTRACT):
            for i, batch in enumerate(all_batches()):
                request = json.dumps(
                    {"id": str(i), "mode": mode.value, "candidates": list(batch)}
                )
                response = handle_request_line(request)
                assert response == penalty_response(str(i), structure_penalty(list(batch), mode))


class TestProtocol:
    def test_single_valid_candidate(self):
        response = handle_request_line('{"id":"1","mode":"strict","candidates":["{}"]}')
        assert json.loads(response) == {"id": "1", "failures": 0, "batch_size": 1, "penalty": 0.0}

    def test_all_fail(self):
        response = handle_request_line('{"id":"2","mode":"strict","candidates":["x","y"]}')
        assert json.loads(response) == {"id": "2", "failures": 2, "batch_size": 2, "penalty": 1.0}

    def test_missing_candidates_yields_error_and_stream_continues(self):
        lines = [
            '{"id":"a","mode":"strict"}',
            '{"id":"b","mode":"strict","candidates":["{}"]}',
        ]
        out = io.StringIO()
        count = penalty_service(lines, out)
        assert count == 2
        first, second = out.getvalue().splitlines()
        assert json.loads(first) == {"id": "a", "error": "request missing 'candidates'"}
        assert json.loads(second)["failures"] == 0

    def test_unparseable_request_line(self):
        response = json.loads(handle_request_line("this is not json"))
        assert response["id"] is None
        assert "error" in response

    def test_empty_candidates_is_error_response(self):
        response = json.loads(handle_request_line('{"id":"e","candidates":[]}'))
        assert "error" in response and response["id"] == "e"

    def test_default_mode_applies_when_omitted(self):
        line = json.dumps({"id": "m", "candidates": [PROSE_WRAPPED]})
        strict = json.loads(handle_request_line(line, STRICT))
        extract = json.loads(handle_request_line(line, EXTRACT))
        assert strict["failures"] == 1
        assert extract["failures"] == 0

    def test_full_precision_floats(self):
        response = handle_request_line('{"id":"p","candidates":["x","{}","{}"]}')
        assert json.loads(response)["penalty"] == 1 / 3
        assert repr(1 / 3) in response

    def test_blank_lines_skipped(self):
        out = io.StringIO()
        count = penalty_service(["", "  \n", '{"id":"1","candidates":["{}"]}'], out)
        assert count == 1


_candidates = st.lists(
    st.one_of(st.sampled_from(ELEMENTS), st.text(max_size=20)), min_size=1, max_size=6
)


class TestHypothesisLaws:
    @settings(max_examples=60, deadline=None)
    @given(_candidates, st.randoms(use_true_random=False))
    def test_permutation_invariance_random(self, batch, rnd):
        shuffled = list(batch)
        rnd.shuffle(shuffled)
        for mode in (STRICT, EXTRACT):
            assert (
                structure_penalty(batch, mode).failures
                == structure_penalty(shuffled, mode).failures
            )

    @settings(max_examples=60, deadline=None)
    @given(_candidates, _candidates)
    def test_concatenation_random(self, a, b):
        for mode in (STRICT, EXTRACT):
            fa, fb = structure_penalty(a, mode), structure_penalty(b, mode)
            fab = structure_penalty(a + b, mode)
            assert fab.failures == fa.failures + fb.failures

    @settings(max_examples=60, deadline=None)
    @given(st.text(max_size=40))
    def test_mode_dominance_random(self, s):
        if is_valid_json(s, STRICT):
            assert is_valid_json(s, EXTRACT)

    @settings(max_examples=60, deadline=None)
    @given(_candidates, st.floats(min_value=0.0, max_value=100.0))
    def test_additivity_random(self, batch, ce):
        fragment = structure_penalty(batch, STRICT)
        breakdown = combined_loss(ce, fragment)
        assert breakdown.total_loss == breakdown.ce_loss + breakdown.struct_penalty

import json

import pytest
from hypothesis import given, settings, strategies as st

from structsent.schema import (
    CoreStatement,
    HierarchyNode,
    MalformedJsonError,
    RelationCatalog,
    SchemaViolationError,
    StructuredRep,
    check_compliance,
    parse_structured,
    serialize_structured,
)

MINIMAL = '{"core":{"label":"finding","claim":"X increases Y"},"hierarchy":[]}'


def trees_equal(a, b) -> bool:
    """Field-by-field structural equality, independent of dataclass __eq__."""
    if a.core.label != b.core.label or a.core.claim != b.core.claim:
        return False
    if a.core.extras != b.core.extras:
        return False

    def nodes_equal(x, y) -> bool:
        if x.relation != y.relation or x.extras != y.extras:
            return False
        if len(x.components) != len(y.components):
            return False
        for cx, cy in zip(x.components, y.components):
            if isinstance(cx, str) != isinstance(cy, str):
                return False
            if isinstance(cx, str):
                if cx != cy:
                    return False
            else:
                if len(cx) != len(cy) or not all(nodes_equal(nx, ny) for nx, ny in zip(cx, cy)):
                    return False
        return True

    return len(a.hierarchy) == len(b.hierarchy) and all(
        nodes_equal(x, y) for x, y in zip(a.hierarchy, b.hierarchy)
    )


class TestParse:
    def test_minimal_instance(self):
        rep = parse_structured(MINIMAL)
        assert rep.core.label == "finding"
        assert rep.core.claim == "X increases Y"
        assert rep.hierarchy == []

    def test_empty_label_rejected(self):
        with pytest.raises(SchemaViolationError):
            parse_structured('{"core":{"label":"","claim":"c"},"hierarchy":[]}')

    def test_missing_core_rejected(self):
        with pytest.raises(SchemaViolationError):
            parse_structured('{"hierarchy":[]}')

    def test_not_json_rejected(self):
        with pytest.raises(MalformedJsonError):
            parse_structured("not json at all {")

    def test_extra_top_level_key_rejected(self):
        with pytest.raises(SchemaViolationError):
            parse_structured('{"core":{"label":"l","claim":"c"},"hierarchy":[],"meta":1}')

    def test_non_object_rejected(self):
        with pytest.raises(SchemaViolationError):
            parse_structured("[1, 2]")

    def test_nan_rejected(self):
        with pytest.raises(MalformedJsonError):
            parse_structured('{"core":{"label":"l","claim":NaN},"hierarchy":[]}')

    def test_empty_relation_rejected(self):
        with pytest.raises(SchemaViolationError):
            parse_structured(
                '{"core":{"label":"l","claim":"c"},'
                '"hierarchy":[{"relation":" ","components":["x"]}]}'
            )

    def test_empty_components_rejected(self):
        with pytest.raises(SchemaViolationError):
            parse_structured(
                '{"core":{"label":"l","claim":"c"},'
                '"hierarchy":[{"relation":"cause","components":[]}]}'
            )

    def test_numeric_component_rejected(self):
        with pytest.raises(SchemaViolationError):
            parse_structured(
                '{"core":{"label":"l","claim":"c"},'
                '"hierarchy":[{"relation":"cause","components":[3]}]}'
            )

    def test_hierarchy_must_be_list(self):
        with pytest.raises(SchemaViolationError):
            parse_structured('{"core":{"label":"l","claim":"c"},"hierarchy":{}}')

    def test_node_object_component_normalized_to_list(self):
        rep = parse_structured(
            '{"core":{"label":"l","claim":"c"},"hierarchy":[{"relation":"cause",'
            '"components":["x",{"relation":"temporal","components":["y"]}]}]}'
        )
        nested = rep.hierarchy[0].components[1]
        assert isinstance(nested, list) and nested[0].relation == "temporal"

    def test_extra_node_keys_preserved_opaquely(self):
        text = (
            '{"core":{"label":"l","claim":"c"},"hierarchy":[{"relation":"cause",'
            '"components":["x"],"confidence":0.9}]}'
        )
        rep = parse_structured(text)
        assert rep.hierarchy[0].extras == {"confidence": 0.9}
        again = parse_structured(serialize_structured(rep))
        assert again.hierarchy[0].extras == {"confidence": 0.9}

    def test_depth_limit(self):
        def nested(depth):
            inner = '"leaf"'
            for _ in range(depth):
                inner = f'[{{"relation":"cause","components":[{inner}]}}]'
            return (
                '{"core":{"label":"l","claim":"c"},"hierarchy":'
                f'[{{"relation":"root","components":[{inner}]}}]}}'
            )

        assert parse_structured(nested(6)).depth() == 7
        with pytest.raises(SchemaViolationError):
            parse_structured(nested(9))
        assert parse_structured(nested(9), max_depth=12).depth() == 10


class TestSerialize:
    def test_deterministic_bytes(self):
        rep = parse_structured(MINIMAL)
        assert serialize_structured(rep) == serialize_structured(rep)

    def test_round_trip_idempotent_string(self):
        first = serialize_structured(parse_structured(MINIMAL))
        second = serialize_structured(parse_structured(first))
        assert first == second

    def test_two_level_nesting_round_trip(self):
        rep = StructuredRep(
            core=CoreStatement(label="result", claim="effect persists"),
            hierarchy=[
                HierarchyNode(
                    relation="temporal",
                    components=[
                        "persisted six months",
                        [HierarchyNode(relation="exception", components=["unless reduced"])],
                    ],
                )
            ],
        )
        back = parse_structured(serialize_structured(rep))
        assert trees_equal(rep, back)

    def test_key_order_fixed(self):
        text = serialize_structured(parse_structured(MINIMAL))
        assert text.index('"core"') < text.index('"hierarchy"')
        assert text.index('"label"') < text.index('"claim"')

    def test_no_trailing_whitespace(self):
        assert serialize_structured(parse_structured(MINIMAL)).rstrip() == serialize_structured(
            parse_structured(MINIMAL)
        )

    def test_accepted_input_is_valid_json(self):
        # Rejection soundness: whatever parse accepts, a plain JSON parser accepts.
        rep = parse_structured(MINIMAL)
        json.loads(serialize_structured(rep))
        json.loads(MINIMAL)


_texts = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=12
).filter(lambda s: s.strip())


def _node_strategy():
    return st.recursive(
        st.builds(
            HierarchyNode,
            relation=_texts,
            components=st.lists(_texts, min_size=1, max_size=3),
        ),
        lambda children: st.builds(
            HierarchyNode,
            relation=_texts,
            components=st.lists(
                st.one_of(_texts, st.lists(children, min_size=1, max_size=2)),
                min_size=1,
                max_size=3,
            ),
        ),
        max_leaves=6,
    )


_reps = st.builds(
    StructuredRep,
    core=st.builds(CoreStatement, label=_texts, claim=_texts),
    hierarchy=st.lists(_node_strategy(), max_size=3),
)


class TestProperties:
    @settings(max_examples=80, deadline=None)
    @given(_reps)
    def test_round_trip_equality(self, rep):
        back = parse_structured(serialize_structured(rep), max_depth=64)
        assert trees_equal(rep, back)
        assert back == rep

    @settings(max_examples=80, deadline=None)
    @given(_reps)
    def test_serialized_form_is_plain_json(self, rep):
        json.loads(serialize_structured(rep))

    @settings(max_examples=40, deadline=None)
    @given(st.text(max_size=40))
    def test_junk_never_parses_as_non_json(self, text):
        try:
            parse_structured(text)
        except (MalformedJsonError, SchemaViolationError):
            return
        json.loads(text)


class TestCatalog:
    def test_default_has_17_unique_relations(self):
        catalog = RelationCatalog.load()
        assert len(catalog.relations) == 17
        assert len({r.lower() for r in catalog.relations}) == 17
        assert catalog.open_vocabulary

    def test_membership_is_case_normalized(self):
        catalog = RelationCatalog.load()
        assert "Cause" in catalog
        assert "CONTRAST " in catalog

    def test_duplicate_entries_rejected(self):
        with pytest.raises(ValueError):
            RelationCatalog(relations=["cause", "Cause"])

    def test_load_custom_file(self, tmp_path):
        path = tmp_path / "relations.json"
        path.write_text('["alpha", "beta"]')
        catalog = RelationCatalog.load(path)
        assert catalog.relations == ["alpha", "beta"]


class TestCompliance:
    def _rep(self, claim="c", label="l", component="x", relation="cause"):
        return StructuredRep(
            core=CoreStatement(label=label, claim=claim),
            hierarchy=[HierarchyNode(relation=relation, components=[component])],
        )

    def test_single_violation_at_threshold_boundary(self):
        original = "o" * 100
        rep = self._rep(claim="c" * 31, label="l" * 30, component="x" * 30)
        report = check_compliance(rep, original)
        assert report.field_ratio_violations == [("core.claim", 0.31)]

    def test_all_fields_within_threshold(self):
        original = "o" * 100
        rep = self._rep(claim="c" * 30, label="l" * 10, component="x" * 30)
        assert check_compliance(rep, original).field_ratio_violations == []

    def test_unknown_relation_reported_not_rejected(self):
        report = check_compliance(self._rep(relation="frobnicates"), "o" * 50)
        assert report.unknown_relations == ["frobnicates"]

    def test_known_relation_not_reported(self):
        report = check_compliance(self._rep(relation="Cause"), "o" * 50)
        assert report.unknown_relations == []

    def test_nested_paths(self):
        rep = StructuredRep(
            core=CoreStatement(label="l", claim="c"),
            hierarchy=[
                HierarchyNode(
                    relation="cause",
                    components=["ok", [HierarchyNode(relation="temporal", components=["y" * 40])]],
                )
            ],
        )
        report = check_compliance(rep, "o" * 100)
        assert report.field_ratio_violations == [
            ("hierarchy[0].components[1][0].components[0]", 0.40)
        ]
        assert report.max_depth == 2

    def test_token_unit(self):
        rep = self._rep(claim="one two three four")
        report = check_compliance(rep, "a b c d e f g h i j", unit="tokens")
        assert ("core.claim", 0.4) in report.field_ratio_violations

    @settings(max_examples=30, deadline=None)
    @given(st.floats(min_value=0.05, max_value=0.95), st.floats(min_value=0.0, max_value=0.9))
    def test_monotonicity_in_threshold(self, low, delta):
        rep = StructuredRep(
            core=CoreStatement(label="l" * 12, claim="c" * 37),
            hierarchy=[HierarchyNode(relation="cause", components=["x" * 21, "y" * 55])],
        )
        high = min(low + delta, 1.0)
        n_low = len(check_compliance(rep, "o" * 100, threshold=low).field_ratio_violations)
        n_high = len(check_compliance(rep, "o" * 100, threshold=high).field_ratio_violations)
        assert n_high <= n_low

"""Tests for guideline documents, constraint payloads and match plans."""

from decimal import Decimal

import pytest
from hypothesis import assume, given, settings

from core.errors import (
    CompileError,
    ConstraintValidationError,
    GuidelineSyntaxError,
    UnknownTermError,
)
from core.guidelines import (
    And,
    HasValue,
    Named,
    NutrientConstraint,
    Only,
    Or,
    Polarity,
    Some,
    TagConstraint,
    builtin_guidelines,
    compile_condition,
    execute_plan,
    extension,
    iter_terms,
    load_rules,
    parse_expression,
    parse_guideline,
    parse_payload,
    payload_to_json,
    render_expr,
)
from core.vocabulary import (
    CARBOHYDRATES,
    DIABETES,
    HAS_ATTRIBUTE,
    HIGH_CARB_DIET,
    LOW_FAT_DIET,
    PERSON,
    PHO,
    WAS_ASSOCIATED_WITH,
)

from tests.conftest import RULES_DIR
from tests.oracles import class_extension
from tests.strategies import EX, class_exprs, vocabulary_graphs

G2_JSON = (
    '{"carbohydrate":{"daily_total":150,"meal":{"lower":30,"type":"range","upper":45},"unit":"g"}}'
)

MINIMAL_RULE = """\
id: R1
label: Example rule.
condition: prov:Person
compliance: sio:hasAttribute some pho:ConsistentPattern
polarity: on-match
directive: pho:ExampleDirective
recommendation: pho:ExampleRecommendation
constraint: {"tag": "vegan"}
"""


def with_line(key: str, value: str) -> str:
    lines = [f"{key}: {value}" if line.startswith(f"{key}:") else line for line in MINIMAL_RULE.splitlines()]
    return "\n".join(lines) + "\n"


class TestPayloads:
    """Constraint payload grammar and canonical JSON."""

    def test_builtin_payloads_serialize_canonically(self):
        g1, g2 = builtin_guidelines()
        assert payload_to_json(g1.constraint) == '{"tag":"Mediterranean"}'
        assert payload_to_json(g2.constraint) == G2_JSON

    def test_lenient_form_parses_to_canonical(self):
        text = "{'carbohydrate': {'unit': 'g', 'meal': {'type': 'range', 'lower': '30', 'upper': '45'}, 'daily total': '150'}}"
        payload = parse_payload(text)
        assert payload == NutrientConstraint(Decimal(30), Decimal(45), Decimal(150))
        assert payload_to_json(payload) == G2_JSON

    def test_canonical_json_reads_back(self):
        assert parse_payload(G2_JSON) == builtin_guidelines()[1].constraint

    def test_midpoint(self):
        assert NutrientConstraint(Decimal(30), Decimal(45), Decimal(150)).midpoint == Decimal("37.5")

    def test_fractional_bounds_keep_decimals(self):
        payload = NutrientConstraint(Decimal("30.5"), Decimal(45), Decimal(150))
        assert '"lower":30.5' in payload_to_json(payload)

    @pytest.mark.parametrize(
        "text",
        [
            '{"carbohydrate": {"unit": "g", "meal": {"type": "range", "lower": 45, "upper": 30}, "daily_total": 150}}',
            '{"carbohydrate": {"unit": "mg", "meal": {"type": "range", "lower": 30, "upper": 45}, "daily_total": 150}}',
            '{"carbohydrate": {"meal": {"type": "range", "lower": "lots", "upper": 45}, "daily_total": 150}}',
            '{"carbohydrate": {"meal": {"type": "range", "lower": 0, "upper": 45}, "daily_total": 150}}',
            '{"carbohydrate": {"meal": {"type": "point", "value": 30}, "daily_total": 150}}',
            '{"carbohydrate": {"meal": {"type": "range", "lower": 30, "upper": 45}}}',
            '{"sugar": {"meal": {"type": "range", "lower": 30, "upper": 45}, "daily_total": 150}}',
            '{"tag": "a", "carbohydrate": {}}',
            '{"tag": ""}',
            "not json",
        ],
    )
    def test_invalid_payloads(self, text):
        with pytest.raises(ConstraintValidationError):
            parse_payload(text)


class TestDocuments:
    """Guideline document parsing."""

    def test_rule_files_match_builtins(self):
        assert load_rules(RULES_DIR) == builtin_guidelines()

    def test_minimal_rule(self):
        rule = parse_guideline(MINIMAL_RULE)
        assert rule.id == "R1"
        assert rule.polarity is Polarity.DIRECTIVE_ON_MATCH
        assert rule.condition == Named(PERSON)
        assert rule.directive_class == PHO.ExampleDirective
        assert rule.constraint == TagConstraint("vegan")

    def test_label_continuation_lines_join(self):
        (g1, _) = load_rules(RULES_DIR)
        assert "\n" not in g1.label
        assert g1.label.endswith("replaced with Mediterranean diet.")

    def test_missing_field(self):
        text = "\n".join(line for line in MINIMAL_RULE.splitlines() if not line.startswith("polarity"))
        with pytest.raises(GuidelineSyntaxError, match="polarity"):
            parse_guideline(text)

    def test_unknown_key(self):
        with pytest.raises(GuidelineSyntaxError) as info:
            parse_guideline(MINIMAL_RULE + "priority: high\n")
        assert info.value.line == 9

    def test_duplicate_key(self):
        with pytest.raises(GuidelineSyntaxError, match="duplicate"):
            parse_guideline(MINIMAL_RULE + "id: R2\n")

    def test_bad_polarity(self):
        with pytest.raises(GuidelineSyntaxError):
            parse_guideline(with_line("polarity", "sometimes"))

    def test_bad_expression_reports_line(self):
        with pytest.raises(GuidelineSyntaxError) as info:
            parse_guideline(with_line("compliance", "sio:hasAttribute some (pho:A and"))
        assert info.value.line == 4

    def test_undeclared_prefix(self):
        with pytest.raises(UnknownTermError):
            parse_guideline(with_line("condition", "nope:Person"))

    def test_directive_must_be_pho_term(self):
        with pytest.raises(UnknownTermError):
            parse_guideline(with_line("directive", "prov:Person"))

    def test_rule_id_must_be_iri_safe(self):
        with pytest.raises(GuidelineSyntaxError):
            parse_guideline(with_line("id", "rule one"))

    def test_empty_document(self):
        with pytest.raises(GuidelineSyntaxError):
            parse_guideline("# nothing here\n")

    def test_duplicate_ids_across_files(self, tmp_path):
        (tmp_path / "a.rule").write_text(MINIMAL_RULE, encoding="utf-8")
        (tmp_path / "b.rule").write_text(MINIMAL_RULE, encoding="utf-8")
        with pytest.raises(GuidelineSyntaxError, match="R1"):
            load_rules(tmp_path)


class TestExpressions:
    """Expression syntax."""

    def test_and_binds_tighter_than_or(self):
        expr = parse_expression("pho:HighCarbDiet and pho:LowFatDiet or prov:Person")
        assert expr == Or((And((Named(HIGH_CARB_DIET), Named(LOW_FAT_DIET))), Named(PERSON)))

    def test_has_value_with_iri_and_string(self):
        assert parse_expression("prov:wasAssociatedWith hasValue doid:Diabetes") == HasValue(
            WAS_ASSOCIATED_WITH, DIABETES
        )
        expr = parse_expression('pho:likes hasValue "spicy"')
        assert str(expr.value) == "spicy"

    def test_iter_terms(self):
        expr = Some(HAS_ATTRIBUTE, HasValue(HAS_ATTRIBUTE, CARBOHYDRATES))
        assert list(iter_terms(expr)) == [HAS_ATTRIBUTE, HAS_ATTRIBUTE, CARBOHYDRATES]

    def test_empty_conjunction_rejected(self):
        with pytest.raises(ValueError):
            And(())

    @settings(max_examples=100, deadline=None)
    @given(class_exprs(), vocabulary_graphs(max_triples=60))
    def test_rendered_expression_means_the_same(self, expr, graph):
        assume(not any(str(term).startswith(EX) for term in iter_terms(expr)))
        reparsed = parse_expression(render_expr(expr))
        assert extension(reparsed, graph) == extension(expr, graph)


class TestPlans:
    """Compiled plans against direct set evaluation."""

    def test_builtin_conditions_compile(self):
        for rule in builtin_guidelines():
            compile_condition(rule.condition)
            compile_condition(rule.compliance)

    def test_unknown_construct(self):
        with pytest.raises(CompileError):
            compile_condition("prov:Person")

    def test_only_is_vacuous_without_edges(self, consistent_graph):
        nodes = consistent_graph.nodes()
        result = extension(Only(WAS_ASSOCIATED_WITH, Named(PERSON)), consistent_graph)
        assert result == nodes - {s for s, _, _ in consistent_graph.match((None, WAS_ASSOCIATED_WITH, None))}

    @settings(max_examples=200, deadline=None)
    @given(class_exprs(), vocabulary_graphs())
    def test_plan_matches_set_semantics(self, expr, graph):
        universe = frozenset(graph.nodes())
        plan = compile_condition(expr)
        assert execute_plan(plan, graph, universe) == class_extension(expr, graph, universe)

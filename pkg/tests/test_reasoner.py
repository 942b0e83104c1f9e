"""Tests for rule evaluation, directive assertion and question augmentation."""

from datetime import timedelta
from decimal import Decimal

import pytest
from rdflib import URIRef
from rdflib.namespace import RDF

from core.errors import ConstraintConflictError, PreconditionError
from core.foodlog import FoodLog, MealType
from core.guidelines import NutrientConstraint, TagConstraint
from core.phkg_builder import DiabetesStatus, build_phkg
from core.rdf_store import KnowledgeGraph
from core.reasoner import (
    ConstraintSet,
    FiredBecause,
    GuidelineReasoner,
    active_constraints,
    augment_question,
    classify,
    current_window_view,
    latest_window_start,
)
from core.summarizer import PatternSet
from core.vocabulary import (
    CONSISTENT_CARB_DIET_DIRECTIVE,
    DIRECTIVE,
    HAS_RECOMMENDATION,
    MEDITERRANEAN_DIET_DIRECTIVE,
    STARTED_AT_TIME,
    user_iri,
)

from tests.conftest import MAIN_MEALS, START, graph_for, meal

USER = user_iri("user")
QUESTION = "What should I eat for breakfast?"
G2_RANGE = NutrientConstraint(Decimal(30), Decimal(45), Decimal(150))


def fired(graph) -> set[str]:
    _, directives, _ = classify(graph)
    return {d.rule_id for d in directives}


def steadied_log() -> FoodLog:
    """Four weeks of swinging carbohydrates, then one steady week."""
    entries = [
        meal(START + timedelta(days=offset), m, 10 if offset % 2 else 100, 40, 25)
        for offset in range(28)
        for m in MAIN_MEALS
    ]
    entries += [
        meal(START + timedelta(days=offset), m, 45, 40, 25)
        for offset in range(28, 35)
        for m in MAIN_MEALS
    ]
    return FoodLog("user", tuple(entries))


class TestFiring:
    """Which rules fire for which profile and log."""

    def test_variable_carbs_fire_g2(self, variable_graph):
        assert fired(variable_graph) == {"G2"}

    def test_consistent_carbs_fire_nothing(self, consistent_graph):
        reasoned, directives, verdicts = classify(consistent_graph)
        assert directives == []
        assert reasoned == consistent_graph
        g2 = next(v for v in verdicts if v.rule_id == "G2")
        assert g2.applicable and g2.compliant
        assert g2.evidence

    def test_high_carb_low_fat_fires_g1(self, high_carb_low_fat_log, diabetic_profile):
        assert fired(graph_for(high_carb_low_fat_log, diabetic_profile)) == {"G1"}

    def test_prediabetic_without_insulin(self, high_carb_low_fat_log, variable_log, prediabetic_profile):
        assert fired(graph_for(high_carb_low_fat_log, prediabetic_profile)) == {"G1"}
        assert fired(graph_for(variable_log, prediabetic_profile)) == set()

    def test_no_diagnosis_no_directives(self, high_carb_low_fat_log, variable_log, healthy_profile):
        for log in (high_carb_low_fat_log, variable_log):
            _, directives, verdicts = classify(graph_for(log, healthy_profile))
            assert directives == []
            assert all(not v.applicable and v.compliant is None for v in verdicts)

    def test_steady_snack_does_not_mask_swinging_days(self, diabetic_profile):
        entries = []
        for offset in range(14):
            day = START + timedelta(days=offset)
            entries += [meal(day, m, 10 if offset % 2 else 100, 40, 25) for m in MAIN_MEALS]
            entries.append(meal(day, MealType.SNACK, 20, 5, 5))
        graph = graph_for(FoodLog("user", tuple(entries)), diabetic_profile)
        assert fired(graph) == {"G2"}

    def test_only_latest_window_counts(self, diabetic_profile):
        graph = graph_for(steadied_log(), diabetic_profile)
        assert fired(graph) == set()

    def test_missing_person(self):
        with pytest.raises(PreconditionError):
            classify(KnowledgeGraph())


class TestDirectives:
    """Asserted triples."""

    def test_g2_directive_node(self, variable_graph):
        reasoned, (directive,), _ = classify(variable_graph)
        assert str(directive.node) == f"{USER}/directive/G2/2021-10-21"
        assert directive.fired_because is FiredBecause.NON_COMPLIANCE
        assert (directive.node, RDF.type, CONSISTENT_CARB_DIET_DIRECTIVE) in reasoned
        assert (directive.node, RDF.type, DIRECTIVE) in reasoned
        assert reasoned.objects(directive.node, HAS_RECOMMENDATION) == [directive.recommendation_node]

    def test_g1_fires_on_match(self, high_carb_low_fat_log, diabetic_profile):
        _, (directive,), _ = classify(graph_for(high_carb_low_fat_log, diabetic_profile))
        assert directive.directive_class == MEDITERRANEAN_DIET_DIRECTIVE
        assert directive.fired_because is FiredBecause.MATCH
        assert directive.constraint == TagConstraint("Mediterranean")

    def test_input_graph_untouched(self, variable_graph):
        before = set(variable_graph)
        classify(variable_graph)
        assert set(variable_graph) == before

    def test_classification_is_idempotent(self, reasoned_variable_graph):
        again, _, _ = classify(reasoned_variable_graph)
        assert again == reasoned_variable_graph


class TestWindows:
    """Current-window view."""

    def test_latest_full_window(self, variable_graph):
        assert latest_window_start(variable_graph).startswith("2021-10-21")

    def test_view_keeps_one_window(self, variable_graph):
        view = current_window_view(variable_graph)
        starts = {str(o)[:10] for _, _, o in view.match((None, STARTED_AT_TIME, None))}
        assert starts == {"2021-10-21"}

    def test_graph_without_patterns(self, diabetic_profile):
        graph = build_phkg(PatternSet(), diabetic_profile)
        assert latest_window_start(graph) is None
        assert fired(graph) == {"G2"}


class TestConstraints:
    """Active constraint sets."""

    def test_active_constraints_after_g2(self, reasoned_variable_graph):
        cs = active_constraints(reasoned_variable_graph)
        assert cs.diabetes_status is DiabetesStatus.DIABETES
        assert cs.likes == ("spicy",)
        assert cs.nutrient("carbohydrate") == G2_RANGE
        assert cs.constraints[0].rule_ids == ("G2",)

    def test_unreasoned_graph_has_profile_only(self, variable_graph):
        cs = active_constraints(variable_graph)
        assert cs.constraints == ()
        assert cs.likes == ("spicy",)

    def test_ranges_intersect(self):
        cs = ConstraintSet.merge(
            [
                (G2_RANGE, "G2"),
                (NutrientConstraint(Decimal(40), Decimal(60), Decimal(120)), "R9"),
            ]
        )
        merged = cs.nutrient("carbohydrate")
        assert (merged.per_meal_lower, merged.per_meal_upper, merged.daily_total) == (40, 45, 120)
        assert cs.constraints[0].rule_ids == ("G2", "R9")

    def test_disjoint_ranges_conflict(self):
        with pytest.raises(ConstraintConflictError) as info:
            ConstraintSet.merge(
                [(G2_RANGE, "G2"), (NutrientConstraint(Decimal(50), Decimal(60), Decimal(150)), "R9")]
            )
        assert info.value.rule_ids == ("G2", "R9")

    def test_exclusions_allergens_first(self):
        cs = ConstraintSet(dislikes=("mushrooms", "dairy"), allergies=("dairy",))
        assert cs.exclusions == ("dairy", "mushrooms")

    def test_dict_form_reads_back(self, reasoned_variable_graph):
        cs = active_constraints(reasoned_variable_graph)
        assert ConstraintSet.from_dict(cs.to_dict()) == cs


class TestAugmentation:
    """Bracketed constraint clauses."""

    def test_diabetic_with_g2(self, reasoned_variable_graph):
        cs = active_constraints(reasoned_variable_graph)
        assert augment_question(QUESTION, cs) == (
            "What should I eat for breakfast [diabetic, prefers spicy food, "
            "carbohydrates between 30-45 g, not to exceed 150 g daily total]?"
        )

    def test_prediabetic_with_g1(self, high_carb_low_fat_log, prediabetic_profile):
        reasoned, _, _ = classify(graph_for(high_carb_low_fat_log, prediabetic_profile))
        assert GuidelineReasoner().augment_question(QUESTION, reasoned) == (
            "What should I eat for breakfast [pre-diabetic, prefers mediterranean food, "
            "Mediterranean diet, no dairy, no mushrooms]?"
        )

    def test_combined_g1_and_g2_clause_order(self):
        cs = ConstraintSet.merge(
            [(G2_RANGE, "G2"), (TagConstraint("Mediterranean"), "G1")],
            DiabetesStatus.DIABETES,
            likes=("spicy",),
            allergies=("dairy",),
        )
        assert augment_question(QUESTION, cs) == (
            "What should I eat for breakfast [diabetic, prefers spicy food, "
            "carbohydrates between 30-45 g, not to exceed 150 g daily total, "
            "Mediterranean diet, no dairy]?"
        )

    def test_augmenting_twice_changes_nothing(self, reasoned_variable_graph):
        cs = active_constraints(reasoned_variable_graph)
        once = augment_question(QUESTION, cs)
        assert augment_question(once, cs) == once

    def test_no_constraints_no_change(self):
        assert augment_question(QUESTION, ConstraintSet()) == QUESTION

    def test_question_without_mark(self):
        cs = ConstraintSet(likes=("vegan",))
        assert augment_question("Suggest a lunch", cs) == "Suggest a lunch [prefers vegan food]"


class TestReasoner:
    """The rule-set wrapper."""

    def test_verdict_lookup(self, variable_graph):
        verdict = GuidelineReasoner().verdict(variable_graph, "G2")
        assert verdict.user == URIRef(USER)
        assert verdict.compliant is False

    def test_unknown_rule(self, variable_graph):
        with pytest.raises(KeyError):
            GuidelineReasoner().verdict(variable_graph, "G9")

    def test_report_shape(self, variable_graph):
        reasoner = GuidelineReasoner()
        reasoned, directives, verdicts = reasoner.classify(variable_graph)
        report = reasoner.report(directives, verdicts, reasoner.active_constraints(reasoned))
        assert report["rules"] == ["G1", "G2"]
        assert [d["rule"] for d in report["directives"]] == ["G2"]
        assert report["constraints"]["likes"] == ["spicy"]

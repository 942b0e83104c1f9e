"""Tests for the viewer controller (no Streamlit session needed)."""

import pytest

from core.competency import CompetencyService, ComplianceStatus
from core.rdf_store import serialize_turtle
from tools.recipe_search import RecipeSearchService
from ui.chat_interface import QuestionController


@pytest.fixture
def controller(catalog):
    return QuestionController(CompetencyService(recipe_search=RecipeSearchService(catalog)))


class TestQuestionController:
    def test_ask_before_load(self, controller):
        assert not controller.is_loaded
        with pytest.raises(RuntimeError):
            controller.ask("G2-compliance")

    def test_load_and_ask(self, controller, variable_graph):
        assert controller.load_turtle(serialize_turtle(variable_graph)) == len(variable_graph)
        assert controller.ask("G2-compliance").verdict is ComplianceStatus.NON_COMPLIANT

    def test_question_text(self, controller):
        assert controller.question_text("consistency.fat") == "Have I been consistent in my fat intake?"
        assert controller.question_text("allergy-rec", {"allergen": "eggs"}) == (
            "What foods can I eat if I have a eggs allergy?"
        )

    def test_augmented_after_load(self, controller, variable_graph):
        controller.load_turtle(serialize_turtle(variable_graph))
        assert controller.augmented("breakfast-rec") == (
            "What should I eat for breakfast [diabetic, prefers spicy food, "
            "carbohydrates between 30-45 g, not to exceed 150 g daily total]?"
        )

    def test_constraints_empty_without_graph(self, controller):
        assert controller.constraints().constraints == ()

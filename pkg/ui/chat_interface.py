"""
Viewer Controller
=================
Coordinates graph loading and competency answers for the viewer.

Kept free of Streamlit calls so that it can be driven from tests.
"""

import logging
from typing import Optional

from core.competency import QUESTIONS, CompetencyAnswer, CompetencyService
from core.rdf_store import KnowledgeGraph, parse_turtle
from core.reasoner import ConstraintSet, augment_question

logger = logging.getLogger(__name__)


class QuestionController:
    """
    Holds the loaded PHKG and answers questions against it.
    """

    def __init__(self, service: CompetencyService | None = None):
        self._service = service or CompetencyService()
        self._graph: Optional[KnowledgeGraph] = None

    # -------------------------
    # Graph loading
    # -------------------------

    @property
    def is_loaded(self) -> bool:
        return self._graph is not None

    @property
    def graph(self) -> Optional[KnowledgeGraph]:
        return self._graph

    def load_turtle(self, text: str) -> int:
        """
        Parse a (reasoned) PHKG and return its triple count.
        """
        self._graph = parse_turtle(text)
        logger.info("Viewer loaded %d triples", len(self._graph))
        return len(self._graph)

    # -------------------------
    # Questions
    # -------------------------

    def question_ids(self) -> list[str]:
        return self._service.question_ids()

    def question_text(self, question_id: str, params: dict | None = None) -> str:
        """Natural-language form of a question id."""
        kind, _, nutrient = question_id.partition(".")
        if kind in {"consistency", "progress"} and nutrient:
            return QUESTIONS[f"{kind}.<nutrient>"].replace("<nutrient>", nutrient)

        params = {"allergen": "dairy", "item": "almonds", **(params or {})}
        return QUESTIONS[question_id].format(**params)

    def constraints(self) -> ConstraintSet:
        if self._graph is None:
            return ConstraintSet()
        reasoned, _, _ = self._service.reasoner.classify(self._graph)
        return self._service.reasoner.active_constraints(reasoned)

    def augmented(self, question_id: str, params: dict | None = None) -> str:
        return augment_question(self.question_text(question_id, params), self.constraints())

    def ask(self, question_id: str, params: dict | None = None) -> CompetencyAnswer:
        if self._graph is None:
            raise RuntimeError("load a PHKG before asking questions")
        return self._service.answer_competency(self._graph, question_id, params or {})

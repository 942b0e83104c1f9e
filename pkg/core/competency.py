"""
Competency Questions
====================
Structured answers to the performance, behavioral and food questions a
user asks about their PHKG.

Responsibilities:
- Answer consistency and progress questions with subset-SPARQL queries
- Report guideline compliance from the reasoner
- Derive behavioral advice from the active directives
- Delegate food questions to recipe search with the active ConstraintSet
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Optional, Sequence, Union

from config.settings import settings
from core.errors import InsufficientDataError, UnknownQuestionError
from core.foodlog import FoodLog, MealType, daily_totals
from core.guidelines import GuidelineRule, NutrientConstraint, TagConstraint
from core.phkg_builder import NUTRIENT_TERMS
from core.query_engine import BindingTable, run_query
from core.rdf_store import KnowledgeGraph
from core.reasoner import (
    ComplianceVerdict,
    ConstraintSet,
    GuidelineReasoner,
    augment_question,
    format_amount,
)
from core.summarizer import Nutrient
from tools.recipe_search import RecipeSearchService

logger = logging.getLogger(__name__)


class Trend(str, Enum):
    IMPROVING = "Improving"
    WORSENING = "Worsening"
    MAINTAINING = "Maintaining"


class ComplianceStatus(str, Enum):
    COMPLIANT = "compliant"
    NON_COMPLIANT = "non-compliant"
    NOT_APPLICABLE = "not-applicable"

    @classmethod
    def of(cls, verdict: ComplianceVerdict) -> "ComplianceStatus":
        if not verdict.applicable:
            return cls.NOT_APPLICABLE
        return cls.COMPLIANT if verdict.compliant else cls.NON_COMPLIANT


Verdict = Union[bool, Trend, ComplianceStatus, list]


@dataclass(frozen=True)
class CompetencyAnswer:
    question_id: str
    verdict: Verdict
    bindings: list[dict] = field(default_factory=list)
    explanation: str = ""

    def to_dict(self) -> dict:
        verdict = self.verdict.value if isinstance(self.verdict, Enum) else self.verdict
        return {
            "question": self.question_id,
            "verdict": verdict,
            "explanation": self.explanation,
            "bindings": self.bindings,
        }


QUESTIONS = {
    "consistency.<nutrient>": "Have I been consistent in my <nutrient> intake?",
    "progress.<nutrient>": "How have I been doing (improving, getting worse, maintaining) over the past week?",
    "G1-compliance": "Have I been following a Mediterranean diet?",
    "G2-compliance": "Have I kept a consistent carbohydrate intake?",
    "improve-diet": "How can I improve my diet strategy?",
    "improve-performance": "Will my current diet strategy improve my performance?",
    "meets-preferences": "Does my current diet strategy meet my preferences?",
    "breakfast-rec": "What should I eat for breakfast?",
    "allergy-rec": "What foods can I eat if I have a {allergen} allergy?",
    "substitute-rec": "What can I substitute for {item}?",
}

MAIN_MEALS = (MealType.BREAKFAST, MealType.LUNCH, MealType.DINNER)

CONSISTENCY_QUERY = """
SELECT ?pattern ?cv ?start ?partial WHERE {{
  ?user a prov:Person ;
        sio:hasAttribute ?pattern .
  ?pattern a stato:coefficientOfVariation ;
           sio:hasAttribute <{nutrient}> ;
           sio:hasValue ?cv ;
           pho:granularity "daily" ;
           pho:partialWindow ?partial ;
           prov:startedAtTime ?start .
}}
"""

CONSISTENT_FLAG_QUERY = """
SELECT ?pattern WHERE {{
  ?pattern a pho:ConsistentPattern ;
           sio:hasAttribute <{nutrient}> ;
           pho:granularity "daily" .
}}
"""


# -------------------------
# Window series from the graph
# -------------------------

@dataclass(frozen=True)
class WindowCV:
    pattern: str
    start: str
    cv: float
    partial: bool

    def to_dict(self) -> dict:
        return {"pattern": self.pattern, "start": self.start, "cv": repr(self.cv), "partial": self.partial}


def _nutrient(name: str) -> Nutrient:
    try:
        return Nutrient(name)
    except ValueError:
        raise UnknownQuestionError(f"unknown nutrient {name!r}") from None


def window_cvs(graph: KnowledgeGraph, nutrient: Nutrient) -> list[WindowCV]:
    """Daily consistency measurements for a nutrient, oldest window first."""
    table: BindingTable = run_query(
        graph, CONSISTENCY_QUERY.format(nutrient=NUTRIENT_TERMS[nutrient])
    )
    rows = [
        WindowCV(str(row["pattern"]), str(row["start"]), float(row["cv"]), row["partial"] == "true")
        for row in table.as_dicts()
    ]
    return sorted(rows, key=lambda row: row.start)


# -------------------------
# Service
# -------------------------

class CompetencyService:
    """
    Answers competency questions by id. The graph is classified first so
    that questions work on both built and reasoned graphs.
    """

    def __init__(
        self,
        rules: Sequence[GuidelineRule] | None = None,
        recipe_search: RecipeSearchService | None = None,
        progress_band: float | None = None,
        window_length_days: int | None = None,
    ):
        self.reasoner = GuidelineReasoner(rules)
        self._recipe_search = recipe_search
        self.progress_band = progress_band if progress_band is not None else settings.PROGRESS_BAND
        self.window_length_days = window_length_days or settings.WINDOW_LENGTH_DAYS

        self._handlers: dict[str, Callable[..., CompetencyAnswer]] = {
            "G1-compliance": self._compliance,
            "G2-compliance": self._compliance,
            "improve-diet": self._improve_diet,
            "improve-performance": self._improve_performance,
            "meets-preferences": self._meets_preferences,
            "breakfast-rec": self._breakfast,
            "allergy-rec": self._allergy,
            "substitute-rec": self._substitute,
        }

    @property
    def recipe_search(self) -> RecipeSearchService:
        """Catalog-backed search, loaded on first food question."""
        if self._recipe_search is None:
            self._recipe_search = RecipeSearchService()
        return self._recipe_search

    def question_ids(self) -> list[str]:
        ids = [f"consistency.{n.value}" for n in Nutrient] + [f"progress.{n.value}" for n in Nutrient]
        return ids + list(self._handlers)

    def answer_competency(
        self,
        graph: KnowledgeGraph,
        question_id: str,
        params: Optional[Mapping[str, object]] = None,
    ) -> CompetencyAnswer:
        params = dict(params or {})
        kind, _, nutrient = question_id.partition(".")

        if kind == "consistency" and nutrient:
            return self._consistency(graph, question_id, _nutrient(nutrient))
        if kind == "progress" and nutrient:
            return self._progress(graph, question_id, _nutrient(nutrient))

        handler = self._handlers.get(question_id)
        if handler is None:
            raise UnknownQuestionError(f"unknown question id {question_id!r}")

        logger.info("Answering %s", question_id)
        reasoned, _, verdicts = self.reasoner.classify(graph)
        return handler(question_id, reasoned, verdicts, params)

    # -------------------------
    # Performance
    # -------------------------

    def _consistency(self, graph: KnowledgeGraph, question_id: str, nutrient: Nutrient) -> CompetencyAnswer:
        series = window_cvs(graph, nutrient)
        if not series:
            raise InsufficientDataError(f"no {nutrient.value} consistency pattern in the graph")

        full = [row for row in series if not row.partial]
        latest = (full or series)[-1]
        consistent_nodes = {
            str(term)
            for term in run_query(
                graph, CONSISTENT_FLAG_QUERY.format(nutrient=NUTRIENT_TERMS[nutrient])
            ).column("pattern")
        }
        consistent = latest.pattern in consistent_nodes

        window = "window" if not latest.partial else "partial window"
        return CompetencyAnswer(
            question_id,
            consistent,
            [latest.to_dict()],
            f"{nutrient.label} CV over the {window} starting {latest.start[:10]} is "
            f"{latest.cv:.2f}; {'consistent' if consistent else 'not consistent'}.",
        )

    def progress_trend(self, previous: float, current: float) -> Trend:
        if current < previous - self.progress_band:
            return Trend.IMPROVING
        if current > previous + self.progress_band:
            return Trend.WORSENING
        return Trend.MAINTAINING

    def _progress(self, graph: KnowledgeGraph, question_id: str, nutrient: Nutrient) -> CompetencyAnswer:
        full = [row for row in window_cvs(graph, nutrient) if not row.partial]
        if len(full) < 2:
            raise InsufficientDataError(
                f"progress needs two full windows with {nutrient.value} patterns, found {len(full)}"
            )

        previous, current = full[-2], full[-1]
        trend = self.progress_trend(previous.cv, current.cv)
        return CompetencyAnswer(
            question_id,
            trend,
            [previous.to_dict(), current.to_dict()],
            f"{nutrient.label} CV went from {previous.cv:.2f} to {current.cv:.2f}: {trend.value}.",
        )

    def _compliance(self, question_id, graph, verdicts, params) -> CompetencyAnswer:
        rule_id = question_id.removesuffix("-compliance")
        verdict = next((v for v in verdicts if v.rule_id == rule_id), None)
        if verdict is None:
            raise UnknownQuestionError(f"no rule {rule_id!r} is loaded")

        status = ComplianceStatus.of(verdict)
        explanation = f"Guideline {rule_id}: {status.value}."
        if rule_id == "G1":
            explanation += " Mediterranean adherence is judged as absence of the high-carbohydrate, low-fat pattern."
        return CompetencyAnswer(question_id, status, [verdict.to_dict()], explanation)

    # -------------------------
    # Behavioral
    # -------------------------

    @staticmethod
    def _fired(verdicts: Sequence[ComplianceVerdict]) -> list[ComplianceVerdict]:
        return [v for v in verdicts if v.applicable and not v.compliant]

    def _improve_diet(self, question_id, graph, verdicts, params) -> CompetencyAnswer:
        cs = self.reasoner.active_constraints(graph)
        advice = []
        for constraint in cs.constraints:
            payload = constraint.payload
            if isinstance(payload, TagConstraint):
                advice.append(f"Follow a {payload.tag} diet")
            elif isinstance(payload, NutrientConstraint):
                advice.append(
                    f"Keep {payload.nutrient} between {format_amount(payload.per_meal_lower)}-"
                    f"{format_amount(payload.per_meal_upper)} g per meal and at most "
                    f"{format_amount(payload.daily_total)} g per day"
                )

        log = params.get("log")
        if isinstance(log, FoodLog):
            breakfast = missed_breakfast_advice(log, cs, self.window_length_days)
            if breakfast:
                advice.append(breakfast)

        fired = self._fired(verdicts)
        explanation = (
            f"{len(fired)} guideline directive(s) active." if fired else "No guideline directive is active."
        )
        return CompetencyAnswer(question_id, advice, [v.to_dict() for v in fired], explanation)

    def _improve_performance(self, question_id, graph, verdicts, params) -> CompetencyAnswer:
        fired = self._fired(verdicts)
        try:
            trend = self._progress(graph, "progress.carbohydrates", Nutrient.CARBOHYDRATES).verdict
        except InsufficientDataError:
            trend = None

        improves = not fired and trend is not Trend.WORSENING
        parts = [f"{len(fired)} directive(s) active"]
        parts.append(f"carbohydrate trend {trend.value}" if trend else "carbohydrate trend unknown")
        return CompetencyAnswer(
            question_id, improves, [v.to_dict() for v in fired], "; ".join(parts) + "."
        )

    def _meets_preferences(self, question_id, graph, verdicts, params) -> CompetencyAnswer:
        cs = self.reasoner.active_constraints(graph)
        bindings = []
        for meal in MAIN_MEALS:
            recipes = self.recipe_search.search(cs, meal)["recipes"]
            liked = [r for r in recipes if r["matched_tags"]] if cs.likes else recipes
            bindings.append({"meal": meal.value, "options": len(recipes), "preferred": len(liked)})

        meets = all(row["preferred"] > 0 for row in bindings)
        missing = [row["meal"] for row in bindings if not row["preferred"]]
        explanation = (
            "Every main meal has a recipe that satisfies the guidelines and preferences."
            if meets
            else f"No preferred recipe satisfies the guidelines for: {', '.join(missing)}."
        )
        return CompetencyAnswer(question_id, meets, bindings, explanation)

    # -------------------------
    # Food
    # -------------------------

    def _recommend(
        self,
        question_id: str,
        question: str,
        cs: ConstraintSet,
        meal: Optional[MealType],
        params: Mapping[str, object],
    ) -> CompetencyAnswer:
        log = params.get("log") if isinstance(params.get("log"), FoodLog) else None
        result = self.recipe_search.search(cs, meal, log=log)
        explanation = augment_question(question, cs)
        if result["note"]:
            explanation = f"{explanation} {result['note']}"
        return CompetencyAnswer(
            question_id, [r["name"] for r in result["recipes"]], result["recipes"], explanation
        )

    def _breakfast(self, question_id, graph, verdicts, params) -> CompetencyAnswer:
        cs = self.reasoner.active_constraints(graph)
        return self._recommend(question_id, QUESTIONS[question_id], cs, MealType.BREAKFAST, params)

    def _allergy(self, question_id, graph, verdicts, params) -> CompetencyAnswer:
        allergen = str(params.get("allergen", "dairy")).strip().lower()
        cs = self.reasoner.active_constraints(graph)
        cs = dataclasses.replace(cs, allergies=tuple(dict.fromkeys(cs.allergies + (allergen,))))
        question = QUESTIONS[question_id].format(allergen=allergen)
        return self._recommend(question_id, question, cs, _meal(params), params)

    def _substitute(self, question_id, graph, verdicts, params) -> CompetencyAnswer:
        item = str(params.get("item", "almonds")).strip().lower()
        cs = self.reasoner.active_constraints(graph)
        cs = dataclasses.replace(cs, dislikes=tuple(dict.fromkeys(cs.dislikes + (item,))))
        question = QUESTIONS[question_id].format(item=item)
        return self._recommend(question_id, question, cs, _meal(params), params)


def _meal(params: Mapping[str, object]) -> Optional[MealType]:
    meal = params.get("meal")
    return MealType.parse(str(meal)) if meal else None


def missed_breakfast_advice(log: FoodLog, cs: ConstraintSet, window_length_days: int) -> Optional[str]:
    """
    Advice for users who skip breakfast on at least half of the days of
    the latest window while a per-meal carbohydrate range is active.
    """
    carbs = cs.nutrient("carbohydrate")
    days = daily_totals(log)
    if carbs is None or not days:
        return None

    recent = days[-window_length_days:]
    with_breakfast = sum(1 for day in recent if MealType.BREAKFAST in day.per_meal)
    if with_breakfast * 2 > len(recent):
        return None

    budget = f"{format_amount(carbs.per_meal_lower)}-{format_amount(carbs.per_meal_upper)} g"
    return (
        f"Breakfast was logged on {with_breakfast} of the last {len(recent)} days; "
        f"move the breakfast carbohydrate budget ({budget}) to lunch and dinner "
        f"or to a mid-morning snack"
    )

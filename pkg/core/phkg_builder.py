"""
PHKG Builder
============
Turns mined patterns and the user profile into RDF triples.

Responsibilities:
- Load and normalize user profiles
- Emit profile triples (person, diabetes status, fixed insulin, preferences)
- Emit one node per pattern with stable, content-derived IRIs
- Assemble the Personal Health Knowledge Graph
"""

import json
import logging
from dataclasses import dataclass
from datetime import date, timedelta
from enum import Enum
from typing import Iterable, Optional, Union

from rdflib import Literal, URIRef
from rdflib.namespace import RDF, XSD

from config.settings import settings
from core.errors import PHKGError
from core.foodlog import MealType
from core.rdf_store import KnowledgeGraph, Triple, typed_literal
from core.summarizer import (
    CombinedGoal,
    ConsistencyPattern,
    DietLabel,
    DietLabelFrequency,
    Nutrient,
    Pattern,
    PatternSet,
    PredominantDiet,
    Window,
)
from core.vocabulary import (
    ALLERGIC_TO,
    CALORIES,
    CARBOHYDRATES,
    COEFFICIENT_OF_VARIATION,
    CONSISTENT_PATTERN,
    DIABETES,
    DIET_CONSUMPTION,
    DIET_PATTERN,
    DISLIKES,
    DURING_MEAL,
    ENDED_AT_TIME,
    FAT,
    FIXED_INSULIN_DOSAGE,
    FIXED_MEDICATION_DOSAGE,
    FREQUENCY,
    GRANULARITY,
    HAS_ATTRIBUTE,
    HAS_PARTICIPANT,
    HAS_VALUE,
    INSULIN,
    LIKES,
    NUTRIENT_INTAKE_GOAL,
    PARTIAL_WINDOW,
    PERSON,
    PHO,
    PRE_DIABETES,
    PROTEIN,
    STARTED_AT_TIME,
    WAS_ASSOCIATED_WITH,
    user_iri,
)

logger = logging.getLogger(__name__)

NUTRIENT_TERMS = {
    Nutrient.CARBOHYDRATES: CARBOHYDRATES,
    Nutrient.FAT: FAT,
    Nutrient.PROTEIN: PROTEIN,
    Nutrient.CALORIES: CALORIES,
}


class DiabetesStatus(str, Enum):
    DIABETES = "diabetes"
    PRE_DIABETES = "prediabetes"

    @property
    def term(self) -> URIRef:
        return DIABETES if self is DiabetesStatus.DIABETES else PRE_DIABETES

    @property
    def adjective(self) -> str:
        return "diabetic" if self is DiabetesStatus.DIABETES else "pre-diabetic"

    @classmethod
    def parse(cls, value: Optional[str]) -> Optional["DiabetesStatus"]:
        if value is None:
            return None
        text = str(value).strip().lower().replace("-", "").replace("_", "").replace(" ", "")
        if text in {"", "none", "null"}:
            return None
        if text in {"diabetes", "diabetic", "t2d"}:
            return cls.DIABETES
        if text in {"prediabetes", "prediabetic"}:
            return cls.PRE_DIABETES
        raise ValueError(f"unknown diabetes status {value!r}")


def _normalized(values: Iterable[str], field: str) -> tuple[str, ...]:
    cleaned = []
    for value in values:
        text = str(value).strip().lower()
        if not text:
            raise ValueError(f"{field} entries must not be empty")
        if text not in cleaned:
            cleaned.append(text)
    return tuple(cleaned)


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    diabetes_status: Optional[DiabetesStatus] = None
    fixed_insulin_dosage: bool = False
    likes: tuple[str, ...] = ()
    dislikes: tuple[str, ...] = ()
    allergies: tuple[str, ...] = ()

    def __post_init__(self):
        for field in ("likes", "dislikes", "allergies"):
            object.__setattr__(self, field, _normalized(getattr(self, field), field))
        if isinstance(self.diabetes_status, str) and not isinstance(self.diabetes_status, DiabetesStatus):
            object.__setattr__(self, "diabetes_status", DiabetesStatus.parse(self.diabetes_status))

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "diabetes_status": self.diabetes_status.value if self.diabetes_status else None,
            "fixed_insulin_dosage": self.fixed_insulin_dosage,
            "likes": list(self.likes),
            "dislikes": list(self.dislikes),
            "allergies": list(self.allergies),
        }


def load_profile(text: str, default_user_id: Optional[str] = None) -> UserProfile:
    """Read a profile JSON document mirroring the UserProfile fields."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PHKGError(f"profile is not valid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise PHKGError("profile must be a JSON object")

    try:
        return UserProfile(
            user_id=str(data.get("user_id") or default_user_id or settings.USER_ID),
            diabetes_status=DiabetesStatus.parse(data.get("diabetes_status")),
            fixed_insulin_dosage=bool(data.get("fixed_insulin_dosage", False)),
            likes=tuple(data.get("likes") or ()),
            dislikes=tuple(data.get("dislikes") or ()),
            allergies=tuple(data.get("allergies") or ()),
        )
    except (TypeError, ValueError) as exc:
        raise PHKGError(f"invalid profile: {exc}") from None


# -------------------------
# Literal helpers
# -------------------------

def float_literal(value: float) -> Literal:
    """Shortest round-tripping decimal form, e.g. 0.99 or 1.0."""
    return typed_literal(repr(float(value)), XSD.float)


def boolean_literal(value: bool) -> Literal:
    return typed_literal("true" if value else "false", XSD.boolean)


def datetime_literal(day: date) -> Literal:
    return typed_literal(f"{day.isoformat()}T00:00:00-00:00", XSD.dateTime)


def string_literal(value: str) -> Literal:
    return typed_literal(value, XSD.string)


def window_triples(node: URIRef, window: Window) -> list[Triple]:
    """Start at midnight of the first day; end at midnight after the last day."""
    return [
        (node, STARTED_AT_TIME, datetime_literal(window.start)),
        (node, ENDED_AT_TIME, datetime_literal(window.end + timedelta(days=1))),
        (node, PARTIAL_WINDOW, boolean_literal(window.partial)),
    ]


# -------------------------
# Node naming
# -------------------------

def pattern_node(user: URIRef, kind: str, name: str, window: Window) -> URIRef:
    return URIRef(f"{user}/pattern/{kind}/{name}/{window.start.isoformat()}")


def consistency_node(user: URIRef, pattern: ConsistencyPattern) -> URIRef:
    name = pattern.nutrient.value
    if pattern.window.meal:
        name = f"{name}-{pattern.window.meal.value}"
    return pattern_node(user, "consistency", name, pattern.window)


def frequency_node(user: URIRef, label: DietLabel, window: Window) -> URIRef:
    return pattern_node(user, "frequency", label.value, window)


def fixed_insulin_node(user: URIRef) -> URIRef:
    return URIRef(f"{user}/medication/fixed-insulin-dosage")


def meal_term(meal: MealType) -> URIRef:
    return PHO[meal.label]


def _as_user(user: Union[str, URIRef], namespace: Optional[str] = None) -> URIRef:
    if isinstance(user, URIRef):
        return user
    return user_iri(user, namespace or settings.USER_NAMESPACE)


# -------------------------
# Emission
# -------------------------

def emit_pattern_triples(
    pattern: Pattern, user: Union[str, URIRef], namespace: Optional[str] = None
) -> list[Triple]:
    """Triples for one mined pattern, linked from the user via sio:hasAttribute."""
    user = _as_user(user, namespace)

    if isinstance(pattern, ConsistencyPattern):
        node = consistency_node(user, pattern)
        triples = [
            (user, HAS_ATTRIBUTE, node),
            (node, RDF.type, COEFFICIENT_OF_VARIATION),
            (node, HAS_VALUE, float_literal(pattern.value)),
            (node, HAS_ATTRIBUTE, NUTRIENT_TERMS[pattern.nutrient]),
            (node, GRANULARITY, string_literal(pattern.window.granularity)),
        ]
        if pattern.consistent:
            triples.append((node, RDF.type, CONSISTENT_PATTERN))
        if pattern.window.meal:
            triples.append((node, DURING_MEAL, meal_term(pattern.window.meal)))
        return triples + window_triples(node, pattern.window)

    if isinstance(pattern, DietLabelFrequency):
        node = frequency_node(user, pattern.label, pattern.window)
        return [
            (user, HAS_ATTRIBUTE, node),
            (node, RDF.type, PHO[pattern.label.value]),
            (node, FREQUENCY, float_literal(pattern.frequency)),
        ] + window_triples(node, pattern.window)

    if isinstance(pattern, CombinedGoal):
        node = pattern_node(user, "goal", pattern.name, pattern.window)
        triples = [
            (user, HAS_ATTRIBUTE, node),
            (node, RDF.type, NUTRIENT_INTAKE_GOAL),
            (node, HAS_VALUE, boolean_literal(pattern.holds)),
            (node, FREQUENCY, float_literal(pattern.co_occurrence_fraction)),
        ]
        triples += [
            (node, HAS_PARTICIPANT, frequency_node(user, label, pattern.window))
            for label in pattern.participants
        ]
        return triples + window_triples(node, pattern.window)

    if isinstance(pattern, PredominantDiet):
        node = pattern_node(user, "diet", "predominant", pattern.window)
        consumption = pattern_node(user, "diet-consumption", "predominant", pattern.window)
        triples = [
            (user, HAS_ATTRIBUTE, node),
            (node, RDF.type, CONSISTENT_PATTERN),
            (node, RDF.type, DIET_PATTERN),
            (node, HAS_ATTRIBUTE, consumption),
            (consumption, RDF.type, DIET_CONSUMPTION),
        ]
        triples += [(consumption, RDF.type, PHO[label.value]) for label in pattern.labels]
        return triples + window_triples(node, pattern.window)

    raise TypeError(f"not a pattern: {pattern!r}")


def emit_profile_triples(profile: UserProfile, namespace: Optional[str] = None) -> list[Triple]:
    user = _as_user(profile.user_id, namespace)
    triples: list[Triple] = [(user, RDF.type, PERSON)]

    if profile.diabetes_status:
        triples.append((user, WAS_ASSOCIATED_WITH, profile.diabetes_status.term))

    if profile.fixed_insulin_dosage:
        dosage = fixed_insulin_node(user)
        triples += [
            (user, HAS_ATTRIBUTE, dosage),
            (dosage, RDF.type, FIXED_INSULIN_DOSAGE),
            (dosage, HAS_ATTRIBUTE, INSULIN),
            (dosage, HAS_ATTRIBUTE, FIXED_MEDICATION_DOSAGE),
        ]

    triples += [(user, LIKES, string_literal(tag)) for tag in profile.likes]
    triples += [(user, DISLIKES, string_literal(item)) for item in profile.dislikes]
    triples += [(user, ALLERGIC_TO, string_literal(item)) for item in profile.allergies]
    return triples


def build_phkg(
    patterns: PatternSet, profile: UserProfile, namespace: Optional[str] = None
) -> KnowledgeGraph:
    """
    Profile triples plus every pattern's triples, in one fresh graph.
    User IRIs are minted under `namespace`, bound to the empty prefix.
    """
    namespace = namespace or settings.USER_NAMESPACE
    user = _as_user(profile.user_id, namespace)
    graph = KnowledgeGraph({"": namespace})
    graph.insert_all(emit_profile_triples(profile, namespace))
    for pattern in patterns:
        graph.insert_all(emit_pattern_triples(pattern, user))

    logger.info("Built PHKG with %d triples from %d patterns", len(graph), len(patterns))
    return graph

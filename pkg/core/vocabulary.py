"""
PHO Vocabulary
==============
Namespace and term constants for the Personal Health Ontology terms used by
the knowledge graph, the guideline rules and the competency questions.

Terms that have no published home (diet labels, directives, ...) live in the
local `pho:` namespace.
"""

import re

from rdflib import Namespace, URIRef
from rdflib.namespace import RDF, RDFS, XSD

from core.errors import PrefixResolutionError, UnknownTermError

PROV = Namespace("http://www.w3.org/ns/prov#")
SIO = Namespace("http://semanticscience.org/resource/")
STATO = Namespace("http://purl.obolibrary.org/obo/STATO_")
DOID = Namespace("http://purl.obolibrary.org/obo/DOID_")
DRON = Namespace("http://purl.obolibrary.org/obo/DRON_")
FOOD = Namespace("http://purl.org/heals/food/")
PHO = Namespace("https://w3id.org/pho-example/onto#")

DEFAULT_USER_NAMESPACE = "https://w3id.org/pho-example/user/"

DEFAULT_PREFIXES: dict[str, str] = {
    "": DEFAULT_USER_NAMESPACE,
    "doid": str(DOID),
    "dron": str(DRON),
    "food": str(FOOD),
    "pho": str(PHO),
    "prov": str(PROV),
    "rdf": str(RDF),
    "rdfs": str(RDFS),
    "sio": str(SIO),
    "stato": str(STATO),
    "xsd": str(XSD),
}

# -------------------------
# Term constants
# -------------------------

PERSON = PROV.Person
WAS_ASSOCIATED_WITH = PROV.wasAssociatedWith
STARTED_AT_TIME = PROV.startedAtTime
ENDED_AT_TIME = PROV.endedAtTime

HAS_ATTRIBUTE = SIO.hasAttribute
HAS_VALUE = SIO.hasValue
FREQUENCY = SIO.frequency
HAS_PARTICIPANT = SIO.hasParticipant

COEFFICIENT_OF_VARIATION = STATO.coefficientOfVariation

DIABETES = DOID.Diabetes
PRE_DIABETES = DOID.PreDiabetes
INSULIN = DRON.Insulin

CARBOHYDRATES = FOOD.Carbohydrates
FAT = FOOD.Fat
PROTEIN = FOOD.Protein
CALORIES = FOOD.Calories

CONSISTENT_PATTERN = PHO.ConsistentPattern
DIET_PATTERN = PHO.DietPattern
DIET_CONSUMPTION = PHO.DietConsumption
NUTRIENT_INTAKE_GOAL = PHO.NutrientIntakeGoal
LOW_CARB_DIET = PHO.LowCarbDiet
HIGH_CARB_DIET = PHO.HighCarbDiet
LOW_FAT_DIET = PHO.LowFatDiet
HIGH_FAT_DIET = PHO.HighFatDiet
FIXED_INSULIN_DOSAGE = PHO.FixedInsulinDosage
FIXED_MEDICATION_DOSAGE = PHO.FixedMedicationDosage
DIRECTIVE = PHO.Directive
RECOMMENDATION = PHO.Recommendation
CONSTRAINT = PHO.Constraint
DIETARY_ASSESSMENT = PHO.DietaryAssessment

MEDITERRANEAN_DIET_DIRECTIVE = PHO.MediterraneanDietDirective
MEDITERRANEAN_DIET_RECOMMENDATION = PHO.MediterraneanDietRecommendation
CONSISTENT_CARB_DIET_DIRECTIVE = PHO.ConsistentCarbDietDirective
CONSISTENT_CARB_RECOMMENDATION = PHO.ConsistentCarbRecommendation

BREAKFAST = PHO.Breakfast
LUNCH = PHO.Lunch
DINNER = PHO.Dinner
SNACK = PHO.Snack

# Locally minted properties
LIKES = PHO.likes
DISLIKES = PHO.dislikes
ALLERGIC_TO = PHO.allergicTo
HAS_RECOMMENDATION = PHO.hasRecommendation
CONSTRAINT_PAYLOAD = PHO.constraint
SOURCE_RULE = PHO.sourceRule
FIRED_BECAUSE = PHO.firedBecause
PARTIAL_WINDOW = PHO.partialWindow
GRANULARITY = PHO.granularity
DURING_MEAL = PHO.duringMeal

KNOWN_TERMS: frozenset[URIRef] = frozenset(
    {
        RDF.type,
        RDFS.label,
        RDFS.subClassOf,
        PERSON,
        WAS_ASSOCIATED_WITH,
        STARTED_AT_TIME,
        ENDED_AT_TIME,
        HAS_ATTRIBUTE,
        HAS_VALUE,
        FREQUENCY,
        HAS_PARTICIPANT,
        COEFFICIENT_OF_VARIATION,
        DIABETES,
        PRE_DIABETES,
        INSULIN,
        CARBOHYDRATES,
        FAT,
        PROTEIN,
        CALORIES,
        CONSISTENT_PATTERN,
        DIET_PATTERN,
        DIET_CONSUMPTION,
        NUTRIENT_INTAKE_GOAL,
        LOW_CARB_DIET,
        HIGH_CARB_DIET,
        LOW_FAT_DIET,
        HIGH_FAT_DIET,
        FIXED_INSULIN_DOSAGE,
        FIXED_MEDICATION_DOSAGE,
        DIRECTIVE,
        RECOMMENDATION,
        CONSTRAINT,
        DIETARY_ASSESSMENT,
        MEDITERRANEAN_DIET_DIRECTIVE,
        MEDITERRANEAN_DIET_RECOMMENDATION,
        CONSISTENT_CARB_DIET_DIRECTIVE,
        CONSISTENT_CARB_RECOMMENDATION,
        BREAKFAST,
        LUNCH,
        DINNER,
        SNACK,
        LIKES,
        DISLIKES,
        ALLERGIC_TO,
        HAS_RECOMMENDATION,
        CONSTRAINT_PAYLOAD,
        SOURCE_RULE,
        FIRED_BECAUSE,
        PARTIAL_WINDOW,
        GRANULARITY,
        DURING_MEAL,
    }
)

_USER_ID = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._~-]*$")


def is_known_term(iri: URIRef) -> bool:
    """Vocabulary constants plus anything minted in the pho: namespace."""
    return iri in KNOWN_TERMS or str(iri).startswith(str(PHO))


def resolve_curie(curie: str, prefixes: dict[str, str] | None = None) -> URIRef:
    """
    Expand a prefixed name such as `sio:hasAttribute` into an IRI.

    Raises PrefixResolutionError for an undeclared prefix.
    """
    prefixes = DEFAULT_PREFIXES if prefixes is None else prefixes
    prefix, sep, local = curie.partition(":")
    if not sep:
        raise PrefixResolutionError(f"not a prefixed name: {curie!r}")
    if prefix not in prefixes:
        raise PrefixResolutionError(f"prefix {prefix!r} is not declared")
    return URIRef(prefixes[prefix] + local)


def resolve_term(curie: str, prefixes: dict[str, str] | None = None) -> URIRef:
    """
    Expand a prefixed name and require it to be a vocabulary term.
    """
    iri = resolve_curie(curie, prefixes)
    if not is_known_term(iri):
        raise UnknownTermError(f"unknown vocabulary term: {curie}")
    return iri


def user_iri(user_id: str, namespace: str = DEFAULT_USER_NAMESPACE) -> URIRef:
    """IRI of the user node; pattern and directive nodes are minted below it."""
    if not _USER_ID.match(user_id):
        raise ValueError(f"user id is not IRI-safe: {user_id!r}")
    return URIRef(f"{namespace}{user_id}")

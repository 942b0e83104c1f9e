"""
Guideline Reasoner
==================
Evaluates guideline rules over a PHKG under closed-world semantics.

Responsibilities:
- Restrict evaluation to the most recent full pattern window
- Decide applicability and compliance per rule and person
- Assert directive and recommendation triples for fired rules
- Collect the active personalized ConstraintSet
- Augment a user question with the implicit constraints
"""

import json
import logging
import re
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Iterable, Optional, Sequence

from rdflib import Literal, URIRef
from rdflib.namespace import RDF, RDFS

from core.errors import ConstraintConflictError, PreconditionError
from core.guidelines import (
    ConstraintPayload,
    GuidelineRule,
    NutrientConstraint,
    Polarity,
    Some,
    TagConstraint,
    builtin_guidelines,
    execute_plan,
    compile_condition,
    parse_payload,
    payload_to_json,
)
from core.phkg_builder import DiabetesStatus, string_literal
from core.rdf_store import KnowledgeGraph, Term, Triple, term_sort_key
from core.vocabulary import (
    ALLERGIC_TO,
    CONSTRAINT_PAYLOAD,
    DIABETES,
    DIRECTIVE,
    DISLIKES,
    FIRED_BECAUSE,
    HAS_RECOMMENDATION,
    LIKES,
    PARTIAL_WINDOW,
    PERSON,
    PRE_DIABETES,
    RECOMMENDATION,
    SOURCE_RULE,
    STARTED_AT_TIME,
    WAS_ASSOCIATED_WITH,
)

logger = logging.getLogger(__name__)


class FiredBecause(str, Enum):
    MATCH = "match"
    NON_COMPLIANCE = "non-compliance"


@dataclass(frozen=True)
class Directive:
    node: URIRef
    directive_class: URIRef
    user: URIRef
    recommendation_node: URIRef
    recommendation_class: URIRef
    constraint: ConstraintPayload
    fired_because: FiredBecause
    rule_id: str

    def to_dict(self) -> dict:
        return {
            "rule": self.rule_id,
            "directive": str(self.node),
            "directive_class": str(self.directive_class),
            "user": str(self.user),
            "recommendation": str(self.recommendation_node),
            "recommendation_class": str(self.recommendation_class),
            "constraint": self.constraint.to_dict(),
            "fired_because": self.fired_because.value,
        }


@dataclass(frozen=True)
class ComplianceVerdict:
    """`compliant` is None when the rule does not apply."""

    rule_id: str
    user: URIRef
    applicable: bool
    compliant: Optional[bool]
    evidence: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "rule": self.rule_id,
            "user": str(self.user),
            "applicable": self.applicable,
            "compliant": self.compliant,
            "evidence": list(self.evidence),
        }


# -------------------------
# Constraint sets
# -------------------------

@dataclass(frozen=True)
class ActiveConstraint:
    payload: ConstraintPayload
    rule_ids: tuple[str, ...]


@dataclass(frozen=True)
class ConstraintSet:
    constraints: tuple[ActiveConstraint, ...] = ()
    diabetes_status: Optional[DiabetesStatus] = None
    likes: tuple[str, ...] = ()
    dislikes: tuple[str, ...] = ()
    allergies: tuple[str, ...] = ()

    @classmethod
    def merge(
        cls,
        entries: Iterable[tuple[ConstraintPayload, str]],
        diabetes_status: Optional[DiabetesStatus] = None,
        likes: Sequence[str] = (),
        dislikes: Sequence[str] = (),
        allergies: Sequence[str] = (),
    ) -> "ConstraintSet":
        """
        Combine payloads from several rules. Ranges on the same nutrient
        are intersected; an empty intersection is a conflict.
        """
        tags: dict[str, list[str]] = {}
        nutrients: dict[str, tuple[NutrientConstraint, list[str]]] = {}

        for payload, rule_id in entries:
            if isinstance(payload, TagConstraint):
                tags.setdefault(payload.tag, []).append(rule_id)
                continue

            if payload.nutrient not in nutrients:
                nutrients[payload.nutrient] = (payload, [rule_id])
                continue

            current, rule_ids = nutrients[payload.nutrient]
            rule_ids = rule_ids + [rule_id]
            lower = max(current.per_meal_lower, payload.per_meal_lower)
            upper = min(current.per_meal_upper, payload.per_meal_upper)
            if lower > upper:
                raise ConstraintConflictError(
                    f"{payload.nutrient} ranges do not overlap", sorted(set(rule_ids))
                )
            merged = NutrientConstraint(
                lower,
                upper,
                min(current.daily_total, payload.daily_total),
                nutrient=payload.nutrient,
            )
            nutrients[payload.nutrient] = (merged, rule_ids)

        constraints = [
            ActiveConstraint(payload, tuple(sorted(set(ids))))
            for payload, ids in (nutrients[name] for name in sorted(nutrients))
        ]
        constraints += [
            ActiveConstraint(TagConstraint(tag), tuple(sorted(set(ids))))
            for tag, ids in sorted(tags.items())
        ]
        return cls(tuple(constraints), diabetes_status, tuple(likes), tuple(dislikes), tuple(allergies))

    @property
    def nutrient_constraints(self) -> list[NutrientConstraint]:
        return [c.payload for c in self.constraints if isinstance(c.payload, NutrientConstraint)]

    @property
    def tags(self) -> list[str]:
        return [c.payload.tag for c in self.constraints if isinstance(c.payload, TagConstraint)]

    def nutrient(self, name: str) -> Optional[NutrientConstraint]:
        for constraint in self.nutrient_constraints:
            if constraint.nutrient == name:
                return constraint
        return None

    @property
    def exclusions(self) -> tuple[str, ...]:
        """Allergens first, then dislikes, without repeats."""
        return tuple(dict.fromkeys(self.allergies + self.dislikes))

    @property
    def is_empty(self) -> bool:
        return not (
            self.constraints or self.diabetes_status or self.likes or self.dislikes or self.allergies
        )

    def to_dict(self) -> dict:
        return {
            "constraints": [
                {"payload": c.payload.to_dict(), "rules": list(c.rule_ids)} for c in self.constraints
            ],
            "diabetes_status": self.diabetes_status.value if self.diabetes_status else None,
            "likes": list(self.likes),
            "dislikes": list(self.dislikes),
            "allergies": list(self.allergies),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConstraintSet":
        """Inverse of to_dict; also accepts a whole reason report."""
        if "constraints" in data and isinstance(data["constraints"], dict):
            data = data["constraints"]
        entries = []
        for item in data.get("constraints", []):
            payload = parse_payload(json.dumps(item["payload"]))
            for rule_id in item.get("rules") or ["user"]:
                entries.append((payload, rule_id))
        return cls.merge(
            entries,
            DiabetesStatus.parse(data.get("diabetes_status")),
            tuple(str(x).lower() for x in data.get("likes", [])),
            tuple(str(x).lower() for x in data.get("dislikes", [])),
            tuple(str(x).lower() for x in data.get("allergies", [])),
        )


# -------------------------
# Graph views
# -------------------------

def pattern_windows(graph: KnowledgeGraph) -> dict[Term, tuple[str, bool]]:
    """Pattern node -> (start lexical form, partial flag)."""
    found = {}
    for node, _, start in graph.match((None, STARTED_AT_TIME, None)):
        flags = graph.objects(node, PARTIAL_WINDOW)
        partial = any(str(flag) == "true" for flag in flags)
        found[node] = (str(start), partial)
    return found


def latest_window_start(graph: KnowledgeGraph) -> Optional[str]:
    """Start of the most recent full window, else of the most recent window."""
    windows = pattern_windows(graph)
    full = [start for start, partial in windows.values() if not partial]
    if full:
        return max(full)
    if windows:
        logger.warning("No full pattern window in graph; using the latest partial window")
        return max(start for start, _ in windows.values())
    return None


def current_window_view(graph: KnowledgeGraph) -> KnowledgeGraph:
    """
    Copy of the graph without pattern nodes from any window other than
    the latest one (their incoming and outgoing edges go too).
    """
    latest = latest_window_start(graph)
    stale = {node for node, (start, _) in pattern_windows(graph).items() if start != latest}
    view = KnowledgeGraph(graph.prefixes)
    view.insert_all(
        (s, p, o) for s, p, o in graph if s not in stale and o not in stale
    )
    return view


# -------------------------
# Reasoning
# -------------------------

def _window_key(latest: Optional[str]) -> str:
    return latest[:10] if latest else "latest"


def _persons(graph: KnowledgeGraph) -> list[URIRef]:
    persons = sorted(graph.subjects(RDF.type, PERSON), key=term_sort_key)
    if not persons:
        raise PreconditionError("graph has no prov:Person user node")
    return persons


def _evidence(rule: GuidelineRule, user: URIRef, view: KnowledgeGraph, universe) -> tuple[str, ...]:
    if isinstance(rule.compliance, Some):
        filler = execute_plan(compile_condition(rule.compliance.filler), view, universe)
        return tuple(
            str(obj) for obj in view.objects(user, rule.compliance.prop) if obj in filler
        )
    return ()


def evaluate(
    graph: KnowledgeGraph, rules: Optional[Sequence[GuidelineRule]] = None
) -> list[ComplianceVerdict]:
    """Applicability and compliance of every rule for every person."""
    rules = builtin_guidelines() if rules is None else rules
    persons = _persons(graph)
    view = current_window_view(graph)
    universe = frozenset(view.nodes())

    verdicts = []
    for rule in rules:
        applicable_set = execute_plan(compile_condition(rule.condition), view, universe)
        matching_set = execute_plan(compile_condition(rule.compliance), view, universe)

        for user in persons:
            applicable = user in applicable_set
            matches = user in matching_set
            compliant = None
            if applicable:
                compliant = not matches if rule.polarity is Polarity.DIRECTIVE_ON_MATCH else matches
            verdicts.append(
                ComplianceVerdict(
                    rule.id,
                    user,
                    applicable,
                    compliant,
                    _evidence(rule, user, view, universe) if matches else (),
                )
            )
    return verdicts


def directive_triples(directive: Directive, rule: GuidelineRule) -> list[Triple]:
    node, rec = directive.node, directive.recommendation_node
    return [
        (node, RDF.type, directive.directive_class),
        (node, RDF.type, DIRECTIVE),
        (node, WAS_ASSOCIATED_WITH, directive.user),
        (node, HAS_RECOMMENDATION, rec),
        (node, SOURCE_RULE, string_literal(rule.id)),
        (node, FIRED_BECAUSE, string_literal(directive.fired_because.value)),
        (rec, RDF.type, directive.recommendation_class),
        (rec, RDF.type, RECOMMENDATION),
        (rec, CONSTRAINT_PAYLOAD, string_literal(payload_to_json(rule.constraint))),
        (directive.directive_class, RDFS.subClassOf, DIRECTIVE),
        (directive.recommendation_class, RDFS.subClassOf, RECOMMENDATION),
        (directive.recommendation_class, RDFS.label, string_literal(rule.label)),
    ]


def classify(
    graph: KnowledgeGraph, rules: Optional[Sequence[GuidelineRule]] = None
) -> tuple[KnowledgeGraph, list[Directive], list[ComplianceVerdict]]:
    """
    Evaluate the rules and return a new graph holding the input triples
    plus the assertions of every fired rule.
    """
    rules = builtin_guidelines() if rules is None else list(rules)
    by_id = {rule.id: rule for rule in rules}
    verdicts = evaluate(graph, rules)
    window = _window_key(latest_window_start(graph))

    output = graph.copy()
    directives = []
    for verdict in verdicts:
        if not verdict.applicable or verdict.compliant:
            continue

        rule = by_id[verdict.rule_id]
        fired_because = (
            FiredBecause.MATCH
            if rule.polarity is Polarity.DIRECTIVE_ON_MATCH
            else FiredBecause.NON_COMPLIANCE
        )
        directive = Directive(
            node=URIRef(f"{verdict.user}/directive/{rule.id}/{window}"),
            directive_class=rule.directive_class,
            user=verdict.user,
            recommendation_node=URIRef(f"{verdict.user}/recommendation/{rule.id}/{window}"),
            recommendation_class=rule.recommendation_class,
            constraint=rule.constraint,
            fired_because=fired_because,
            rule_id=rule.id,
        )
        output.insert_all(directive_triples(directive, rule))
        directives.append(directive)
        logger.info("Rule %s fired (%s) for %s", rule.id, fired_because.value, verdict.user)

    logger.info("Classification asserted %d directive(s)", len(directives))
    return output, directives, verdicts


def _profile_strings(graph: KnowledgeGraph, user: URIRef, predicate: URIRef) -> tuple[str, ...]:
    return tuple(str(obj).lower() for obj in graph.objects(user, predicate) if isinstance(obj, Literal))


def active_constraints(graph: KnowledgeGraph, user: Optional[URIRef] = None) -> ConstraintSet:
    """
    Constraint payloads of asserted recommendations, plus the user's
    diabetes status, likes, dislikes and allergies.
    """
    user = user or _persons(graph)[0]

    entries = []
    for directive in graph.subjects(RDF.type, DIRECTIVE):
        if user not in graph.objects(directive, WAS_ASSOCIATED_WITH):
            continue
        rule_ids = [str(rule_id) for rule_id in graph.objects(directive, SOURCE_RULE)] or [str(directive)]
        for rec in graph.objects(directive, HAS_RECOMMENDATION):
            for payload in graph.objects(rec, CONSTRAINT_PAYLOAD):
                entries.append((parse_payload(str(payload)), rule_ids[0]))

    diseases = set(graph.objects(user, WAS_ASSOCIATED_WITH))
    status = None
    if DIABETES in diseases:
        status = DiabetesStatus.DIABETES
    elif PRE_DIABETES in diseases:
        status = DiabetesStatus.PRE_DIABETES

    return ConstraintSet.merge(
        entries,
        status,
        _profile_strings(graph, user, LIKES),
        _profile_strings(graph, user, DISLIKES),
        _profile_strings(graph, user, ALLERGIC_TO),
    )


# -------------------------
# Question augmentation
# -------------------------

_AUGMENTED = re.compile(r"\[[^\]]*\]\s*\?\s*$")
NUTRIENT_WORDS = {"carbohydrate": "carbohydrates", "fat": "fat", "protein": "protein"}


def format_amount(value: Decimal) -> str:
    return format(value.normalize(), "f")


def constraint_clauses(cs: ConstraintSet) -> list[str]:
    clauses = []
    if cs.diabetes_status:
        clauses.append(cs.diabetes_status.adjective)
    clauses += [f"prefers {tag} food" for tag in cs.likes]
    for constraint in cs.nutrient_constraints:
        clauses.append(
            f"{NUTRIENT_WORDS[constraint.nutrient]} between "
            f"{format_amount(constraint.per_meal_lower)}-{format_amount(constraint.per_meal_upper)} "
            f"{constraint.unit}, not to exceed {format_amount(constraint.daily_total)} "
            f"{constraint.unit} daily total"
        )
    clauses += [f"{tag} diet" for tag in cs.tags]
    clauses += [f"no {item}" for item in cs.exclusions]
    return clauses


def augment_question(question: str, cs: ConstraintSet) -> str:
    """
    Insert the implicit constraints as a bracketed clause before the
    closing `?`. Already-augmented questions come back unchanged.
    """
    clauses = constraint_clauses(cs)
    if not clauses or _AUGMENTED.search(question):
        return question

    bracket = f"[{', '.join(clauses)}]"
    text = question.rstrip()
    if text.endswith("?"):
        return f"{text[:-1].rstrip()} {bracket}?"
    return f"{text} {bracket}"


class GuidelineReasoner:
    """
    Bundles a rule set with the reasoning operations.
    """

    def __init__(self, rules: Sequence[GuidelineRule] | None = None):
        self.rules = list(rules) if rules is not None else builtin_guidelines()

    def classify(self, graph: KnowledgeGraph):
        return classify(graph, self.rules)

    def evaluate(self, graph: KnowledgeGraph) -> list[ComplianceVerdict]:
        return evaluate(graph, self.rules)

    def verdict(self, graph: KnowledgeGraph, rule_id: str) -> ComplianceVerdict:
        for verdict in self.evaluate(graph):
            if verdict.rule_id == rule_id:
                return verdict
        raise KeyError(rule_id)

    def active_constraints(self, graph: KnowledgeGraph) -> ConstraintSet:
        return active_constraints(graph)

    def augment_question(self, question: str, graph: KnowledgeGraph) -> str:
        return augment_question(question, active_constraints(graph))

    def report(
        self,
        directives: Sequence[Directive],
        verdicts: Sequence[ComplianceVerdict],
        constraints: ConstraintSet,
    ) -> dict:
        return {
            "rules": [rule.id for rule in self.rules],
            "verdicts": [v.to_dict() for v in verdicts],
            "directives": [d.to_dict() for d in directives],
            "constraints": constraints.to_dict(),
        }

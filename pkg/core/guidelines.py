"""
Guideline Rules
===============
Clinical dietary guidelines as class expressions plus recommendation
payloads.

Responsibilities:
- Model class expressions (named classes, and/or, some/only/hasValue)
- Model recommendation constraint payloads and their canonical JSON form
- Parse guideline documents (`.rule` files)
- Compile class expressions into executable match plans
- Provide the two built-in ADA guidelines
"""

import itertools
import json
import logging
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional, Union

import pyparsing as pp
from rdflib import Literal, URIRef, Variable
from rdflib.namespace import RDF, XSD

from core.errors import (
    CompileError,
    ConstraintValidationError,
    GuidelineSyntaxError,
    PrefixResolutionError,
    UnknownTermError,
)
from core.query_engine import join_patterns
from core.rdf_store import KnowledgeGraph, Term, TriplePattern, typed_literal
from core.vocabulary import (
    CARBOHYDRATES,
    CONSISTENT_PATTERN,
    CONSISTENT_CARB_DIET_DIRECTIVE,
    CONSISTENT_CARB_RECOMMENDATION,
    DEFAULT_PREFIXES,
    DIABETES,
    FIXED_INSULIN_DOSAGE,
    GRANULARITY,
    HAS_ATTRIBUTE,
    HIGH_CARB_DIET,
    LOW_FAT_DIET,
    MEDITERRANEAN_DIET_DIRECTIVE,
    MEDITERRANEAN_DIET_RECOMMENDATION,
    PERSON,
    PHO,
    PRE_DIABETES,
    WAS_ASSOCIATED_WITH,
    resolve_term,
)

logger = logging.getLogger(__name__)


# -------------------------
# Class expressions
# -------------------------

@dataclass(frozen=True)
class Named:
    iri: URIRef


@dataclass(frozen=True)
class And:
    operands: tuple["ClassExpr", ...]

    def __post_init__(self):
        object.__setattr__(self, "operands", tuple(self.operands))
        if not self.operands:
            raise ValueError("And needs at least one operand")


@dataclass(frozen=True)
class Or:
    operands: tuple["ClassExpr", ...]

    def __post_init__(self):
        object.__setattr__(self, "operands", tuple(self.operands))
        if not self.operands:
            raise ValueError("Or needs at least one operand")


@dataclass(frozen=True)
class Some:
    prop: URIRef
    filler: "ClassExpr"

    def __post_init__(self):
        if not isinstance(self.prop, URIRef):
            raise ValueError(f"restriction property must be an IRI: {self.prop!r}")


@dataclass(frozen=True)
class Only:
    prop: URIRef
    filler: "ClassExpr"

    def __post_init__(self):
        if not isinstance(self.prop, URIRef):
            raise ValueError(f"restriction property must be an IRI: {self.prop!r}")


@dataclass(frozen=True)
class HasValue:
    prop: URIRef
    value: Term

    def __post_init__(self):
        if not isinstance(self.prop, URIRef):
            raise ValueError(f"restriction property must be an IRI: {self.prop!r}")


ClassExpr = Union[Named, And, Or, Some, Only, HasValue]


def _compact(iri: URIRef, prefixes: dict[str, str]) -> str:
    for prefix, namespace in sorted(prefixes.items(), key=lambda item: -len(item[1])):
        if prefix and str(iri).startswith(namespace):
            return f"{prefix}:{str(iri)[len(namespace):]}"
    return f"<{iri}>"


def render_expr(expr: ClassExpr, prefixes: Optional[dict[str, str]] = None) -> str:
    """Rule-document syntax for an expression."""
    prefixes = prefixes or DEFAULT_PREFIXES

    def wrap(inner: ClassExpr) -> str:
        text = render_expr(inner, prefixes)
        return f"({text})" if isinstance(inner, (And, Or, Some, Only, HasValue)) else text

    if isinstance(expr, Named):
        return _compact(expr.iri, prefixes)
    if isinstance(expr, And):
        return " and ".join(wrap(op) if isinstance(op, Or) else render_expr(op, prefixes) for op in expr.operands)
    if isinstance(expr, Or):
        return " or ".join(render_expr(op, prefixes) for op in expr.operands)
    if isinstance(expr, Some):
        return f"{_compact(expr.prop, prefixes)} some {wrap(expr.filler)}"
    if isinstance(expr, Only):
        return f"{_compact(expr.prop, prefixes)} only {wrap(expr.filler)}"
    if isinstance(expr, HasValue):
        value = expr.value
        shown = json.dumps(str(value)) if isinstance(value, Literal) else _compact(value, prefixes)
        return f"{_compact(expr.prop, prefixes)} hasValue {shown}"
    raise CompileError(f"unsupported class expression {type(expr).__name__}")


# -------------------------
# Constraint payloads
# -------------------------

NUTRIENT_KEYS = ("carbohydrate", "fat", "protein")


def _amount(value, name: str) -> Decimal:
    if isinstance(value, bool):
        raise ConstraintValidationError(f"{name} must be a number")
    try:
        amount = value if isinstance(value, Decimal) else Decimal(str(value).strip())
    except InvalidOperation:
        raise ConstraintValidationError(f"{name} must be a number, got {value!r}") from None
    if not amount.is_finite() or amount <= 0:
        raise ConstraintValidationError(f"{name} must be positive, got {value!r}")
    return amount


def _json_number(value: Decimal):
    return int(value) if value == value.to_integral_value() else float(value)


@dataclass(frozen=True)
class TagConstraint:
    tag: str

    def __post_init__(self):
        if not isinstance(self.tag, str) or not self.tag.strip():
            raise ConstraintValidationError("tag constraint needs a non-empty tag")

    def to_dict(self) -> dict:
        return {"tag": self.tag}


@dataclass(frozen=True)
class NutrientConstraint:
    per_meal_lower: Decimal
    per_meal_upper: Decimal
    daily_total: Decimal
    nutrient: str = "carbohydrate"
    unit: str = "g"

    def __post_init__(self):
        for name in ("per_meal_lower", "per_meal_upper", "daily_total"):
            object.__setattr__(self, name, _amount(getattr(self, name), name))
        if self.unit != "g":
            raise ConstraintValidationError(f"unit must be 'g', got {self.unit!r}")
        if self.nutrient not in NUTRIENT_KEYS:
            raise ConstraintValidationError(f"unknown nutrient {self.nutrient!r}")
        if self.per_meal_lower > self.per_meal_upper:
            raise ConstraintValidationError(
                f"lower bound {self.per_meal_lower} exceeds upper bound {self.per_meal_upper}"
            )

    @property
    def midpoint(self) -> Decimal:
        return (self.per_meal_lower + self.per_meal_upper) / 2

    def to_dict(self) -> dict:
        return {
            self.nutrient: {
                "unit": self.unit,
                "meal": {
                    "type": "range",
                    "lower": _json_number(self.per_meal_lower),
                    "upper": _json_number(self.per_meal_upper),
                },
                "daily_total": _json_number(self.daily_total),
            }
        }


ConstraintPayload = Union[TagConstraint, NutrientConstraint]


def payload_to_json(payload: ConstraintPayload) -> str:
    """Canonical JSON: sorted keys, no whitespace."""
    return json.dumps(payload.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def parse_payload(text: str) -> ConstraintPayload:
    """
    Read a constraint payload. Besides the canonical grammar this accepts
    single-quoted keys, quoted numbers and a "daily total" key.
    """
    try:
        data = json.loads(text, parse_float=Decimal, parse_int=Decimal)
    except json.JSONDecodeError:
        try:
            data = json.loads(text.replace("'", '"'), parse_float=Decimal, parse_int=Decimal)
        except json.JSONDecodeError as exc:
            raise ConstraintValidationError(f"constraint is not valid JSON: {exc.msg}") from None

    if not isinstance(data, dict) or len(data) != 1:
        raise ConstraintValidationError("constraint must be an object with exactly one key")

    (key, body), = data.items()
    if key == "tag":
        if not isinstance(body, str):
            raise ConstraintValidationError("tag must be a string")
        return TagConstraint(body)

    if key not in NUTRIENT_KEYS:
        raise ConstraintValidationError(f"unknown constraint key {key!r}")
    if not isinstance(body, dict):
        raise ConstraintValidationError(f"{key} constraint must be an object")

    meal = body.get("meal")
    if not isinstance(meal, dict) or meal.get("type") != "range":
        raise ConstraintValidationError("meal constraint must be a range")

    daily = body.get("daily_total", body.get("daily total"))
    if daily is None or "lower" not in meal or "upper" not in meal:
        raise ConstraintValidationError("range needs lower, upper and daily_total")

    return NutrientConstraint(
        per_meal_lower=_amount(meal["lower"], "lower"),
        per_meal_upper=_amount(meal["upper"], "upper"),
        daily_total=_amount(daily, "daily_total"),
        nutrient=key,
        unit=str(body.get("unit", "g")),
    )


# -------------------------
# Rules
# -------------------------

class Polarity(str, Enum):
    DIRECTIVE_ON_MATCH = "on-match"
    DIRECTIVE_ON_NON_COMPLIANCE = "on-non-compliance"


@dataclass(frozen=True)
class GuidelineRule:
    """
    For on-match rules `compliance` describes the pattern whose presence
    triggers the directive; for on-non-compliance rules it describes the
    pattern whose absence does.
    """

    id: str
    label: str
    condition: ClassExpr
    compliance: ClassExpr
    polarity: Polarity
    directive_class: URIRef
    recommendation_class: URIRef
    constraint: ConstraintPayload

    def __post_init__(self):
        if not re.match(r"^[A-Za-z0-9][A-Za-z0-9._-]*$", self.id):
            raise GuidelineSyntaxError(f"rule id is not IRI-safe: {self.id!r}")
        for name in ("directive_class", "recommendation_class"):
            if not str(getattr(self, name)).startswith(str(PHO)):
                raise UnknownTermError(f"{name} must be a pho: term")
        if self.directive_class == self.recommendation_class:
            raise GuidelineSyntaxError("directive and recommendation classes must differ")


# -------------------------
# Built-in guidelines
# -------------------------

G1_LABEL = (
    "For pre-diabetic and diabetic individuals diet low in total fat but relatively "
    "high in carbohydrates should be replaced with Mediterranean diet."
)
G2_LABEL = (
    "For individuals whose daily insulin dosing is fixed, a consistent pattern of "
    "carbohydrate intake with respect to time and amount may be recommended to "
    "improve glycemic control and reduce the risk of hypoglycemia."
)

DIABETIC_STATUS = Or(
    (
        HasValue(WAS_ASSOCIATED_WITH, DIABETES),
        HasValue(WAS_ASSOCIATED_WITH, PRE_DIABETES),
    )
)
HIGH_CARB_LOW_FAT = And((Named(HIGH_CARB_DIET), Named(LOW_FAT_DIET)))


def builtin_guidelines() -> list[GuidelineRule]:
    g1 = GuidelineRule(
        id="G1",
        label=G1_LABEL,
        condition=And((Named(PERSON), DIABETIC_STATUS)),
        compliance=Some(
            HAS_ATTRIBUTE,
            And(
                (
                    Named(CONSISTENT_PATTERN),
                    Some(HAS_ATTRIBUTE, HIGH_CARB_LOW_FAT),
                    Only(HAS_ATTRIBUTE, HIGH_CARB_LOW_FAT),
                )
            ),
        ),
        polarity=Polarity.DIRECTIVE_ON_MATCH,
        directive_class=MEDITERRANEAN_DIET_DIRECTIVE,
        recommendation_class=MEDITERRANEAN_DIET_RECOMMENDATION,
        constraint=TagConstraint("Mediterranean"),
    )
    g2 = GuidelineRule(
        id="G2",
        label=G2_LABEL,
        condition=And(
            (Named(PERSON), DIABETIC_STATUS, Some(HAS_ATTRIBUTE, Named(FIXED_INSULIN_DOSAGE)))
        ),
        compliance=Some(
            HAS_ATTRIBUTE,
            And(
                (
                    Named(CONSISTENT_PATTERN),
                    HasValue(HAS_ATTRIBUTE, CARBOHYDRATES),
                    HasValue(GRANULARITY, typed_literal("daily", XSD.string)),
                )
            ),
        ),
        polarity=Polarity.DIRECTIVE_ON_NON_COMPLIANCE,
        directive_class=CONSISTENT_CARB_DIET_DIRECTIVE,
        recommendation_class=CONSISTENT_CARB_RECOMMENDATION,
        constraint=NutrientConstraint(Decimal(30), Decimal(45), Decimal(150)),
    )
    return [g1, g2]


# -------------------------
# Guideline documents
# -------------------------

RULE_KEYS = (
    "id",
    "label",
    "condition",
    "compliance",
    "polarity",
    "directive",
    "recommendation",
    "constraint",
)


@dataclass(frozen=True)
class _Node:
    kind: str
    args: tuple


def _expression_grammar() -> pp.ParserElement:
    pname = pp.Regex(r"[A-Za-z][A-Za-z0-9_-]*:[A-Za-z_][A-Za-z0-9_-]*")
    pname.set_parse_action(lambda t: _Node("name", (t[0],)))
    string = pp.QuotedString('"', esc_char="\\")
    string.set_parse_action(lambda t: _Node("string", (t[0],)))

    and_ = pp.Keyword("and").suppress()
    or_ = pp.Keyword("or").suppress()
    some, only, has_value = pp.Keyword("some"), pp.Keyword("only"), pp.Keyword("hasValue")

    expr = pp.Forward()
    primary = pp.Forward()

    quantified = pname + (some | only) + primary
    quantified.set_parse_action(lambda t: _Node(t[1], (t[0], t[2])))
    valued = pname + has_value.suppress() + (pname | string)
    valued.set_parse_action(lambda t: _Node("hasValue", (t[0], t[1])))

    primary <<= quantified | valued | pname | (pp.Suppress("(") + expr + pp.Suppress(")"))

    conjunction = primary + pp.ZeroOrMore(and_ + primary)
    conjunction.set_parse_action(lambda t: t[0] if len(t) == 1 else _Node("and", tuple(t)))
    expr <<= conjunction + pp.ZeroOrMore(or_ + conjunction)
    expr.set_parse_action(lambda t: t[0] if len(t) == 1 else _Node("or", tuple(t)))
    return expr


_EXPRESSION = _expression_grammar()


def _build(node: _Node, prefixes: dict[str, str]) -> ClassExpr:
    def term(name_node: _Node) -> URIRef:
        try:
            return resolve_term(name_node.args[0], prefixes)
        except PrefixResolutionError as exc:
            raise UnknownTermError(str(exc)) from None

    if node.kind == "name":
        return Named(term(node))
    if node.kind == "and":
        return And(tuple(_build(arg, prefixes) for arg in node.args))
    if node.kind == "or":
        return Or(tuple(_build(arg, prefixes) for arg in node.args))
    if node.kind == "some":
        return Some(term(node.args[0]), _build(node.args[1], prefixes))
    if node.kind == "only":
        return Only(term(node.args[0]), _build(node.args[1], prefixes))
    if node.kind == "hasValue":
        value = node.args[1]
        target = typed_literal(value.args[0], XSD.string) if value.kind == "string" else term(value)
        return HasValue(term(node.args[0]), target)
    raise GuidelineSyntaxError(f"unexpected expression node {node.kind}")


def parse_expression(text: str, prefixes: Optional[dict[str, str]] = None, line: int = 1) -> ClassExpr:
    prefixes = prefixes or DEFAULT_PREFIXES
    try:
        result = _EXPRESSION.parse_string(text, parse_all=True)
    except pp.ParseBaseException as exc:
        raise GuidelineSyntaxError(f"invalid expression: {exc.msg}", line + exc.lineno - 1, exc.col) from None
    return _build(result[0], prefixes)


def _split_document(doc: str) -> dict[str, tuple[str, int]]:
    """key -> (value, line of the key); indented lines continue a value."""
    fields: dict[str, tuple[str, int]] = {}
    current: Optional[str] = None

    for number, raw in enumerate(doc.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        if raw[0].isspace():
            if current is None:
                raise GuidelineSyntaxError("continuation line without a key", number, 1)
            value, line = fields[current]
            fields[current] = (f"{value}\n{raw.strip()}", line)
            continue

        key, sep, value = raw.partition(":")
        key = key.strip()
        if not sep or key not in RULE_KEYS:
            raise GuidelineSyntaxError(f"expected one of {', '.join(RULE_KEYS)}", number, 1)
        if key in fields:
            raise GuidelineSyntaxError(f"duplicate key {key!r}", number, 1)
        fields[key] = (value.strip(), number)
        current = key

    return fields


def parse_guideline(doc: str, prefixes: Optional[dict[str, str]] = None) -> GuidelineRule:
    """
    Parse a guideline document: `key: value` lines for every rule field,
    class expressions over prefixed names, constraint as inline JSON.
    """
    prefixes = prefixes or DEFAULT_PREFIXES
    fields = _split_document(doc)
    if not fields:
        raise GuidelineSyntaxError("empty guideline document")

    missing = [key for key in RULE_KEYS if not fields.get(key, ("", 0))[0]]
    if missing:
        raise GuidelineSyntaxError(f"missing field(s): {', '.join(missing)}")

    def value(key: str) -> str:
        return fields[key][0]

    try:
        polarity = Polarity(value("polarity"))
    except ValueError:
        raise GuidelineSyntaxError(
            f"polarity must be on-match or on-non-compliance, got {value('polarity')!r}",
            fields["polarity"][1],
            1,
        ) from None

    def class_term(key: str) -> URIRef:
        try:
            return resolve_term(value(key), prefixes)
        except PrefixResolutionError as exc:
            raise UnknownTermError(str(exc)) from None

    return GuidelineRule(
        id=value("id"),
        label=" ".join(value("label").split()),
        condition=parse_expression(value("condition"), prefixes, fields["condition"][1]),
        compliance=parse_expression(value("compliance"), prefixes, fields["compliance"][1]),
        polarity=polarity,
        directive_class=class_term("directive"),
        recommendation_class=class_term("recommendation"),
        constraint=parse_payload(value("constraint")),
    )


def load_rules(directory: Union[str, Path]) -> list[GuidelineRule]:
    """Every `*.rule` file in a directory, in file-name order."""
    rules = []
    for path in sorted(Path(directory).glob("*.rule")):
        rules.append(parse_guideline(path.read_text(encoding="utf-8")))
        logger.debug("Loaded guideline %s from %s", rules[-1].id, path)

    ids = [rule.id for rule in rules]
    duplicates = sorted({rule_id for rule_id in ids if ids.count(rule_id) > 1})
    if duplicates:
        raise GuidelineSyntaxError(f"duplicate rule id(s): {', '.join(duplicates)}")
    return rules


# -------------------------
# Match plans
# -------------------------

@dataclass(frozen=True)
class PatternStep:
    """Conjunctive triple patterns; the plan's result is the bindings of `focus`."""

    focus: Variable
    patterns: tuple[TriplePattern, ...]


@dataclass(frozen=True)
class IntersectStep:
    parts: tuple["MatchPlan", ...]


@dataclass(frozen=True)
class UnionStep:
    parts: tuple["MatchPlan", ...]


@dataclass(frozen=True)
class SomeStep:
    """Subjects with at least one `prop` value inside the filler plan's result."""

    focus: Variable
    prop: URIRef
    filler: "MatchPlan"


@dataclass(frozen=True)
class OnlyStep:
    """Nodes none of whose `prop` values fall outside the filler plan's result."""

    focus: Variable
    prop: URIRef
    filler: "MatchPlan"


MatchPlan = Union[PatternStep, IntersectStep, UnionStep, SomeStep, OnlyStep]


def _rename(pattern: TriplePattern, old: Variable, new: Variable) -> TriplePattern:
    return tuple(new if slot == old else slot for slot in pattern)


class _Compiler:
    def __init__(self):
        self._counter = itertools.count()

    def fresh(self) -> Variable:
        return Variable(f"x{next(self._counter)}")

    def compile(self, expr: ClassExpr) -> MatchPlan:
        if isinstance(expr, Named):
            x = self.fresh()
            return PatternStep(x, ((x, RDF.type, expr.iri),))

        if isinstance(expr, HasValue):
            x = self.fresh()
            return PatternStep(x, ((x, expr.prop, expr.value),))

        if isinstance(expr, Some):
            filler = self.compile(expr.filler)
            x = self.fresh()
            if isinstance(filler, PatternStep):
                return PatternStep(x, ((x, expr.prop, filler.focus),) + filler.patterns)
            return SomeStep(x, expr.prop, filler)

        if isinstance(expr, Only):
            return OnlyStep(self.fresh(), expr.prop, self.compile(expr.filler))

        if isinstance(expr, And):
            parts = [self.compile(op) for op in expr.operands]
            steps = [p for p in parts if isinstance(p, PatternStep)]
            others = [p for p in parts if not isinstance(p, PatternStep)]
            if steps:
                focus = steps[0].focus
                merged = tuple(
                    _rename(pattern, step.focus, focus)
                    for step in steps
                    for pattern in step.patterns
                )
                others.insert(0, PatternStep(focus, merged))
            return others[0] if len(others) == 1 else IntersectStep(tuple(others))

        if isinstance(expr, Or):
            parts = tuple(self.compile(op) for op in expr.operands)
            return parts[0] if len(parts) == 1 else UnionStep(parts)

        raise CompileError(f"unsupported class expression construct: {type(expr).__name__}")


def compile_condition(expr: ClassExpr) -> MatchPlan:
    """Compile a class expression into a match plan."""
    return _Compiler().compile(expr)


def execute_plan(
    plan: MatchPlan,
    graph: KnowledgeGraph,
    universe: Optional[frozenset] = None,
) -> frozenset:
    """
    Closed-world extension of a plan: the graph nodes it selects.
    Universe defaults to every non-literal subject or object.
    """
    if universe is None:
        universe = frozenset(graph.nodes())

    if isinstance(plan, PatternStep):
        found = {binding[plan.focus] for binding in join_patterns(graph, plan.patterns)}
        return frozenset(found) & universe

    if isinstance(plan, IntersectStep):
        result = execute_plan(plan.parts[0], graph, universe)
        for part in plan.parts[1:]:
            if not result:
                break
            result &= execute_plan(part, graph, universe)
        return result

    if isinstance(plan, UnionStep):
        result = frozenset()
        for part in plan.parts:
            result |= execute_plan(part, graph, universe)
        return result

    if isinstance(plan, SomeStep):
        filler = execute_plan(plan.filler, graph, universe)
        return frozenset(
            subject for subject, _, obj in graph.match((None, plan.prop, None)) if obj in filler
        ) & universe

    if isinstance(plan, OnlyStep):
        filler = execute_plan(plan.filler, graph, universe)
        violators = {
            subject for subject, _, obj in graph.match((None, plan.prop, None)) if obj not in filler
        }
        return universe - violators

    raise CompileError(f"unknown plan step {type(plan).__name__}")


def extension(expr: ClassExpr, graph: KnowledgeGraph) -> frozenset:
    return execute_plan(compile_condition(expr), graph)


def iter_terms(expr: ClassExpr) -> Iterator[URIRef]:
    """Every IRI an expression mentions."""
    if isinstance(expr, Named):
        yield expr.iri
    elif isinstance(expr, (And, Or)):
        for op in expr.operands:
            yield from iter_terms(op)
    elif isinstance(expr, (Some, Only)):
        yield expr.prop
        yield from iter_terms(expr.filler)
    elif isinstance(expr, HasValue):
        yield expr.prop
        if isinstance(expr.value, URIRef):
            yield expr.value

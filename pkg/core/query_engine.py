"""
Query Engine
============
A SPARQL subset over KnowledgeGraph.

Responsibilities:
- Parse queries with rdflib's SPARQL parser and accept only the subset
  PREFIX / SELECT / WHERE {basic graph pattern + FILTER} / LIMIT
- Reject everything else with an explicit unsupported-feature error
- Join basic graph patterns against the store (also used by compiled
  guideline plans)
- Return deterministic, duplicate-free binding tables
"""

import logging
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Mapping, Optional, Sequence

from pyparsing import ParseBaseException
from rdflib import BNode, Literal, URIRef, Variable
from rdflib.namespace import XSD
from rdflib.paths import Path
from rdflib.plugins.sparql.algebra import translateQuery
from rdflib.plugins.sparql.parser import parseQuery
from rdflib.plugins.sparql.parserutils import CompValue

from core.errors import QuerySyntaxError, UnsupportedFeatureError
from core.rdf_store import KnowledgeGraph, Term, TriplePattern, normalize_term, term_sort_key
from core.vocabulary import DEFAULT_PREFIXES

logger = logging.getLogger(__name__)

Binding = dict[Variable, Term]

NUMERIC_DATATYPES = frozenset(
    XSD[name]
    for name in (
        "integer", "decimal", "float", "double", "int", "long", "short", "byte",
        "nonNegativeInteger", "positiveInteger", "nonPositiveInteger", "negativeInteger",
        "unsignedLong", "unsignedInt", "unsignedShort", "unsignedByte",
    )
)

COMPARISONS = ("=", "!=", "<", "<=", ">", ">=")

# algebra node name -> feature name reported to the user
UNSUPPORTED_NODES = {
    "LeftJoin": "OPTIONAL",
    "Union": "UNION",
    "Minus": "MINUS",
    "Extend": "BIND / select expressions",
    "OrderBy": "ORDER BY",
    "Group": "GROUP BY",
    "AggregateJoin": "aggregates",
    "ToMultiSet": "subqueries",
    "values": "VALUES",
    "Graph": "GRAPH",
    "ServiceGraphPattern": "SERVICE",
    "Reduced": "REDUCED",
    "AskQuery": "ASK",
    "ConstructQuery": "CONSTRUCT",
    "DescribeQuery": "DESCRIBE",
}


# -------------------------
# Query model
# -------------------------

def numeric_value(term: Term) -> Optional[Decimal]:
    """Decimal value of a numeric-datatype literal, else None."""
    if not isinstance(term, Literal) or term.datatype not in NUMERIC_DATATYPES:
        return None
    try:
        value = Decimal(str(term).strip())
    except InvalidOperation:
        return None
    return value if value.is_finite() else None


@dataclass(frozen=True)
class Filter:
    left: object
    op: str
    right: object

    def __post_init__(self):
        if self.op not in COMPARISONS:
            raise UnsupportedFeatureError(f"filter operator {self.op}")

    @property
    def variables(self) -> set[Variable]:
        return {side for side in (self.left, self.right) if isinstance(side, Variable)}

    def holds(self, binding: Mapping[Variable, Term]) -> bool:
        """
        Numbers compare by value when both sides are numeric literals;
        otherwise only = and != apply, as term equality.
        """
        left = binding.get(self.left, self.left) if isinstance(self.left, Variable) else self.left
        right = binding.get(self.right, self.right) if isinstance(self.right, Variable) else self.right

        a, b = numeric_value(left), numeric_value(right)
        if a is not None and b is not None:
            return {
                "=": a == b,
                "!=": a != b,
                "<": a < b,
                "<=": a <= b,
                ">": a > b,
                ">=": a >= b,
            }[self.op]

        if self.op == "=":
            return normalize_term(left) == normalize_term(right)
        if self.op == "!=":
            return normalize_term(left) != normalize_term(right)
        return False


@dataclass(frozen=True)
class Query:
    prefixes: dict[str, str]
    variables: tuple[Variable, ...]
    patterns: tuple[TriplePattern, ...]
    filters: tuple[Filter, ...] = ()
    limit: Optional[int] = None


@dataclass(frozen=True)
class BindingTable:
    columns: tuple[Variable, ...]
    rows: tuple[tuple[Term, ...], ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.rows)

    def as_dicts(self) -> list[dict[str, str]]:
        return [
            {str(var): str(term) for var, term in zip(self.columns, row)} for row in self.rows
        ]

    def column(self, name: str) -> list[Term]:
        index = self.columns.index(Variable(name))
        return [row[index] for row in self.rows]

    def to_tsv(self) -> str:
        """SPARQL TSV results: header of ?names, then N-Triples terms."""
        lines = ["\t".join(f"?{var}" for var in self.columns)]
        lines += ["\t".join(term.n3() for term in row) for row in self.rows]
        return "\n".join(lines) + "\n"


# -------------------------
# Parsing
# -------------------------

def _unsupported(node: CompValue) -> UnsupportedFeatureError:
    return UnsupportedFeatureError(UNSUPPORTED_NODES.get(node.name, node.name))


def _collect_filters(expr, found: list[Filter]) -> None:
    if not isinstance(expr, CompValue):
        raise UnsupportedFeatureError(f"filter expression {expr!r}")

    if expr.name == "ConditionalAndExpression":
        _collect_filters(expr.expr, found)
        for other in expr.other or []:
            _collect_filters(other, found)
        return

    if expr.name == "RelationalExpression" and expr.op in COMPARISONS:
        if expr.other is None:
            raise UnsupportedFeatureError("filter without comparison")
        for side in (expr.expr, expr.other):
            if isinstance(side, CompValue):
                raise UnsupportedFeatureError(f"filter operand {side.name}")
        found.append(
            Filter(_normalize(expr.expr), str(expr.op), _normalize(expr.other))
        )
        return

    raise UnsupportedFeatureError(f"filter expression {expr.name}")


def _normalize(term):
    if isinstance(term, BNode):
        raise UnsupportedFeatureError("blank nodes in queries")
    if isinstance(term, Path):
        raise UnsupportedFeatureError("property paths")
    if isinstance(term, (Variable, URIRef)):
        return term
    if isinstance(term, Literal):
        return normalize_term(term)
    raise UnsupportedFeatureError(f"query term {term!r}")


def _walk_pattern(node, patterns: list, filters: list[Filter]) -> None:
    if not isinstance(node, CompValue):
        raise UnsupportedFeatureError(f"pattern {node!r}")

    if node.name == "BGP":
        for triple in node.triples or []:
            patterns.append(tuple(_normalize(term) for term in triple))
    elif node.name == "Join":
        _walk_pattern(node.p1, patterns, filters)
        _walk_pattern(node.p2, patterns, filters)
    elif node.name == "Filter":
        _collect_filters(node.expr, filters)
        _walk_pattern(node.p, patterns, filters)
    else:
        raise _unsupported(node)


def parse_query(text: str, prefixes: Optional[Mapping[str, str]] = None) -> Query:
    """
    Parse a query in the supported subset.

    Prefixes declared in the query extend `prefixes` (by default the
    PHO prefixes). Raises QuerySyntaxError or UnsupportedFeatureError.
    """
    namespaces = dict(DEFAULT_PREFIXES if prefixes is None else prefixes)

    try:
        parsed = parseQuery(text)
    except ParseBaseException as exc:
        raise QuerySyntaxError(f"invalid query: {exc.msg}", exc.loc) from None

    try:
        translated = translateQuery(parsed, initNs=namespaces)
    except (UnsupportedFeatureError, QuerySyntaxError):
        raise
    except Exception as exc:
        raise QuerySyntaxError(f"invalid query: {exc}") from None

    for prefix, namespace in translated.prologue.namespace_manager.namespaces():
        namespaces.setdefault(prefix, str(namespace))

    node = translated.algebra
    if node.name != "SelectQuery":
        raise _unsupported(node)
    node = node.p

    limit = None
    if node.name == "Slice":
        if node.start:
            raise UnsupportedFeatureError("OFFSET")
        limit = node.length
        node = node.p
    if node.name == "Distinct":
        node = node.p
    if node.name != "Project":
        raise _unsupported(node)

    variables = tuple(node.PV)
    patterns: list[TriplePattern] = []
    filters: list[Filter] = []
    _walk_pattern(node.p, patterns, filters)

    if not patterns:
        raise QuerySyntaxError("empty graph pattern")
    if not variables:
        raise QuerySyntaxError("no variables selected")

    in_pattern = {term for pattern in patterns for term in pattern if isinstance(term, Variable)}
    for var in variables:
        if var not in in_pattern:
            raise QuerySyntaxError(f"selected variable ?{var} does not occur in the pattern")
    for flt in filters:
        missing = flt.variables - in_pattern
        if missing:
            raise QuerySyntaxError(
                f"filter variable ?{sorted(missing)[0]} does not occur in the pattern"
            )

    return Query(namespaces, variables, tuple(patterns), tuple(filters), limit)


# -------------------------
# Evaluation
# -------------------------

def _substitute(pattern: TriplePattern, binding: Binding) -> TriplePattern:
    return tuple(
        binding.get(slot, slot) if isinstance(slot, Variable) else slot for slot in pattern
    )


def _order_patterns(patterns: Sequence[TriplePattern]) -> list[TriplePattern]:
    """
    Greedy join order: most concrete pattern first, then always a pattern
    sharing a variable with what is already bound.
    """
    remaining = list(patterns)
    ordered: list[TriplePattern] = []
    bound: set[Variable] = set()

    def score(pattern):
        variables = [slot for slot in pattern if isinstance(slot, Variable)]
        connected = any(var in bound for var in variables) or not bound
        free = sum(1 for var in variables if var not in bound)
        return (not connected, free)

    while remaining:
        best = min(remaining, key=score)
        remaining.remove(best)
        ordered.append(best)
        bound.update(slot for slot in best if isinstance(slot, Variable))
    return ordered


def join_patterns(
    graph: KnowledgeGraph,
    patterns: Sequence[TriplePattern],
    initial: Optional[Binding] = None,
) -> list[Binding]:
    """
    All variable bindings satisfying every pattern (nested-loop join).
    """
    solutions: list[Binding] = [dict(initial or {})]

    for pattern in _order_patterns(patterns):
        extended: list[Binding] = []
        for binding in solutions:
            concrete = _substitute(pattern, binding)
            # a predicate variable bound to a literal elsewhere matches nothing
            if isinstance(concrete[1], Literal):
                continue
            for triple in graph.match(concrete):
                candidate = dict(binding)
                for slot, term in zip(concrete, triple):
                    if isinstance(slot, Variable):
                        candidate[slot] = term
                extended.append(candidate)
        solutions = extended
        if not solutions:
            break

    return solutions


def execute(graph: KnowledgeGraph, query: Query) -> BindingTable:
    """
    Join, filter, project, de-duplicate, sort, then apply LIMIT.
    """
    rows = {
        tuple(binding[var] for var in query.variables)
        for binding in join_patterns(graph, query.patterns)
        if all(flt.holds(binding) for flt in query.filters)
    }
    ordered = sorted(rows, key=lambda row: tuple(term_sort_key(term) for term in row))
    if query.limit is not None:
        ordered = ordered[: query.limit]

    logger.debug("Query returned %d rows", len(ordered))
    return BindingTable(query.variables, tuple(ordered))


def run_query(graph: KnowledgeGraph, text: str) -> BindingTable:
    """Parse against the graph's prefixes and execute."""
    return execute(graph, parse_query(text, graph.prefixes))

"""
Triple Store
============
In-memory RDF graph used by every other module.

Responsibilities:
- Hold the PHKG triples (rdflib Graph underneath) together with a prefix map
- Enforce term-position rules on insertion
- Answer triple-pattern matches in a deterministic order
- Read Turtle (rdflib parser) and write canonical Turtle
  (a serializer plugin registered with rdflib)

Literal equality is lexical. rdflib's literal normalization is switched off
so that "1.0" and "1.00" stay distinct and lexical forms survive a round trip.
"""

import json
import logging
import re
import threading
from typing import IO, Iterable, Iterator, Mapping, Optional, Union

import rdflib
from rdflib import BNode, Graph, Literal, URIRef, Variable
from rdflib.namespace import RDF, XSD
from rdflib.plugins.parsers.notation3 import BadSyntax
from rdflib.serializer import Serializer

from core.errors import PrefixResolutionError, StructuralError, TurtleSyntaxError
from core.vocabulary import DEFAULT_PREFIXES

rdflib.NORMALIZE_LITERALS = False

logger = logging.getLogger(__name__)

Term = Union[URIRef, Literal, BNode]
Triple = tuple[Term, URIRef, Term]
# None or a Variable in any slot acts as a wildcard
PatternSlot = Optional[Union[URIRef, Literal, BNode, Variable]]
TriplePattern = tuple[PatternSlot, PatternSlot, PatternSlot]

TURTLE_FORMAT = "phkg-turtle"

_SCHEME = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:")
_LOCAL_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-]*$")
_TERM_RANK = {URIRef: 0, BNode: 1, Literal: 2}


def is_absolute_iri(value: str) -> bool:
    return bool(_SCHEME.match(value))


def literal_datatype(literal: Literal) -> URIRef:
    """Datatype with the RDF 1.1 defaults filled in."""
    if literal.language:
        return RDF.langString
    return literal.datatype or XSD.string


def normalize_term(term: Term) -> Term:
    """Give plain literals their implicit xsd:string datatype."""
    if isinstance(term, Literal) and term.datatype is None and not term.language:
        return Literal(str(term), datatype=XSD.string)
    return term


def typed_literal(lexical: str, datatype: URIRef) -> Literal:
    """Literal that keeps its lexical form exactly as given."""
    return Literal(lexical, datatype=datatype, normalize=False)


def term_sort_key(term: Term) -> tuple:
    """Total order on terms: lexical form first, then kind, datatype, language."""
    if isinstance(term, Literal):
        return (str(term), 2, str(literal_datatype(term)), term.language or "")
    return (str(term), _TERM_RANK.get(type(term), 3), "", "")


def triple_sort_key(triple: Triple) -> tuple:
    return tuple(term_sort_key(term) for term in triple)


def validate_triple(triple: Triple) -> Triple:
    """
    Check term positions and IRI form; return the triple with
    plain literals normalized.
    """
    if len(triple) != 3:
        raise StructuralError(f"a triple has exactly three terms, got {len(triple)}")

    subject, predicate, obj = triple

    if isinstance(subject, Literal) or not isinstance(subject, (URIRef, BNode)):
        raise StructuralError(f"subject must be an IRI or blank node: {subject!r}")
    if not isinstance(predicate, URIRef):
        raise StructuralError(f"predicate must be an IRI: {predicate!r}")
    if not isinstance(obj, (URIRef, BNode, Literal)):
        raise StructuralError(f"object must be an RDF term: {obj!r}")

    for term in (subject, predicate, obj):
        if isinstance(term, URIRef) and not is_absolute_iri(str(term)):
            raise StructuralError(f"IRI is not absolute: {term}")

    return subject, predicate, normalize_term(obj)


class KnowledgeGraph:
    """
    Set of triples plus a prefix map.

    Readers may share a graph freely; writers take the internal lock so
    that only one insertion batch runs at a time.
    """

    def __init__(self, prefixes: Mapping[str, str] | None = None):
        self._graph = Graph(bind_namespaces="none")
        self._prefixes: dict[str, str] = {}
        self._lock = threading.RLock()

        for prefix, namespace in {**DEFAULT_PREFIXES, **(prefixes or {})}.items():
            self.bind(prefix, namespace)

    # -------------------------
    # Prefix handling
    # -------------------------

    @property
    def prefixes(self) -> dict[str, str]:
        return dict(self._prefixes)

    @property
    def rdflib_graph(self) -> Graph:
        """Expose the underlying rdflib graph when needed."""
        return self._graph

    def bind(self, prefix: str, namespace: str) -> None:
        if not is_absolute_iri(namespace):
            raise StructuralError(f"namespace must be an absolute IRI: {namespace}")
        self._prefixes[prefix] = namespace
        self._graph.bind(prefix, URIRef(namespace), override=True, replace=True)

    # -------------------------
    # Mutation
    # -------------------------

    def insert(self, triple: Triple) -> "KnowledgeGraph":
        """
        Add one triple. Inserting an existing triple is a no-op.
        """
        checked = validate_triple(triple)
        with self._lock:
            self._graph.add(checked)
        return self

    def insert_all(self, triples: Iterable[Triple]) -> "KnowledgeGraph":
        checked = [validate_triple(triple) for triple in triples]
        with self._lock:
            for triple in checked:
                self._graph.add(triple)
        return self

    def copy(self) -> "KnowledgeGraph":
        clone = KnowledgeGraph(self._prefixes)
        clone.insert_all(self)
        return clone

    # -------------------------
    # Lookup
    # -------------------------

    def match(self, pattern: TriplePattern) -> list[Triple]:
        """
        Return the triples unifying with the pattern, sorted by subject,
        predicate and object. None and Variables are wildcards; a variable
        repeated within the pattern must bind the same term.
        """
        if len(pattern) != 3:
            raise StructuralError("a triple pattern has exactly three slots")

        predicate = pattern[1]
        if predicate is not None and not isinstance(predicate, (URIRef, Variable)):
            raise StructuralError(f"pattern predicate must be an IRI: {predicate!r}")

        lookup = tuple(
            None if slot is None or isinstance(slot, Variable) else normalize_term(slot)
            for slot in pattern
        )
        found = [t for t in self._graph.triples(lookup) if _same_variables(pattern, t)]
        return sorted(found, key=triple_sort_key)

    def objects(self, subject: Term, predicate: URIRef) -> list[Term]:
        return [obj for _, _, obj in self.match((subject, predicate, None))]

    def subjects(self, predicate: URIRef, obj: Term) -> list[Term]:
        return [subj for subj, _, _ in self.match((None, predicate, obj))]

    def nodes(self) -> set[Term]:
        """Every non-literal term in subject or object position."""
        found: set[Term] = set()
        for subject, _, obj in self._graph:
            found.add(subject)
            if not isinstance(obj, Literal):
                found.add(obj)
        return found

    def __contains__(self, triple: Triple) -> bool:
        return tuple(normalize_term(term) for term in triple) in self._graph

    def __iter__(self) -> Iterator[Triple]:
        return iter(sorted(self._graph, key=triple_sort_key))

    def __len__(self) -> int:
        return len(self._graph)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return set(self._graph) == set(other._graph)

    def __repr__(self) -> str:
        return f"KnowledgeGraph({len(self)} triples)"


def _same_variables(pattern: TriplePattern, triple: Triple) -> bool:
    seen: dict[Variable, Term] = {}
    for slot, term in zip(pattern, triple):
        if isinstance(slot, Variable):
            if seen.setdefault(slot, term) != term:
                return False
    return True


# -------------------------
# Turtle output
# -------------------------

class CanonicalTurtleSerializer(Serializer):
    """
    Deterministic Turtle writer.

    Every bound prefix is declared (alphabetically), subjects and
    predicates are sorted, rdf:type is written as `a` and comes first,
    and literals always carry an explicit datatype or language tag.
    """

    def serialize(
        self,
        stream: IO[bytes],
        base: Optional[str] = None,
        encoding: Optional[str] = None,
        **args,
    ) -> None:
        text = self.render()
        stream.write(text.encode(encoding or "utf-8"))

    def render(self) -> str:
        prefixes = sorted(
            (prefix, str(namespace)) for prefix, namespace in self.store.namespaces()
        )
        # longest namespace wins when several match
        self._compaction = sorted(prefixes, key=lambda item: -len(item[1]))

        lines = [f"@prefix {prefix}: <{namespace}> ." for prefix, namespace in prefixes]

        by_subject: dict[Term, dict[URIRef, list[Term]]] = {}
        for subject, predicate, obj in self.store:
            by_subject.setdefault(subject, {}).setdefault(predicate, []).append(obj)

        for subject in sorted(by_subject, key=term_sort_key):
            predicates = by_subject[subject]
            ordered = sorted(
                predicates, key=lambda p: (p != RDF.type, term_sort_key(p))
            )
            statements = []
            for predicate in ordered:
                objects = sorted(predicates[predicate], key=term_sort_key)
                verb = "a" if predicate == RDF.type else self._term(predicate)
                rendered = " , ".join(self._term(obj) for obj in objects)
                statements.append(f"{verb} {rendered}")

            lines.append("")
            lines.append(f"{self._term(subject)} " + " ;\n    ".join(statements) + " .")

        return "\n".join(lines) + "\n"

    def _iri(self, iri: str) -> str:
        for prefix, namespace in self._compaction:
            if iri.startswith(namespace):
                local = iri[len(namespace):]
                if _LOCAL_NAME.match(local):
                    return f"{prefix}:{local}"
        return f"<{iri}>"

    def _term(self, term: Term) -> str:
        if isinstance(term, URIRef):
            return self._iri(str(term))
        if isinstance(term, BNode):
            return f"_:{term}"

        quoted = json.dumps(str(term), ensure_ascii=False)
        if term.language:
            return f"{quoted}@{term.language}"
        return f"{quoted}^^{self._iri(str(literal_datatype(term)))}"


rdflib.plugin.register(TURTLE_FORMAT, Serializer, __name__, "CanonicalTurtleSerializer")


def serialize_turtle(graph: KnowledgeGraph) -> str:
    """
    Render a graph as canonical Turtle: prefix block first, then one
    statement group per subject.
    """
    return graph.rdflib_graph.serialize(format=TURTLE_FORMAT)


# -------------------------
# Turtle input
# -------------------------

def parse_turtle(text: str) -> KnowledgeGraph:
    """
    Parse a Turtle document into a KnowledgeGraph.

    Syntax errors carry line and column; an undeclared prefix raises
    PrefixResolutionError.
    """
    raw = Graph(bind_namespaces="none")
    try:
        raw.parse(data=text, format="turtle")
    except BadSyntax as exc:
        why = str(getattr(exc, "_why", exc))
        line, column = _locate(text, exc)
        if "not bound" in why:
            raise PrefixResolutionError(f"{why} (line {line})") from exc
        raise TurtleSyntaxError(why, line, column) from exc

    graph = KnowledgeGraph({prefix: str(ns) for prefix, ns in raw.namespaces()})
    graph.insert_all(raw)
    logger.debug("Parsed %d triples from Turtle", len(graph))
    return graph


def _locate(text: str, exc: BadSyntax) -> tuple[int, int]:
    """Line (1-based) and column (1-based) of a parser error."""
    offset = getattr(exc, "_i", None)
    if not isinstance(offset, int):
        return getattr(exc, "lines", 0) + 1, 1

    offset = max(0, min(offset, len(text)))
    line = text.count("\n", 0, offset) + 1
    column = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, column

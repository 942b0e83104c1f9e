"""Tests for the SPARQL subset: parsing, evaluation and result output."""

import pytest
from hypothesis import given, settings
from rdflib import URIRef, Variable
from rdflib.namespace import XSD

from core.errors import QuerySyntaxError, UnsupportedFeatureError
from core.query_engine import execute, parse_query, run_query
from core.rdf_store import KnowledgeGraph, typed_literal
from core.vocabulary import COEFFICIENT_OF_VARIATION, HAS_ATTRIBUTE, PERSON, user_iri

from tests.oracles import enumerate_select
from tests.strategies import query_graphs, select_queries

EX = "http://example.org/"
A, B, C = (URIRef(f"{EX}{name}") for name in "abc")
P, Q = URIRef(f"{EX}p"), URIRef(f"{EX}q")


@pytest.fixture
def small_graph():
    return KnowledgeGraph({"ex": EX}).insert_all(
        [
            (A, P, B),
            (B, P, C),
            (A, Q, typed_literal("3", XSD.integer)),
            (B, Q, typed_literal("7", XSD.integer)),
            (C, Q, typed_literal("seven", XSD.string)),
        ]
    )


class TestParsing:
    """What the subset accepts."""

    def test_basic_select(self):
        query = parse_query("PREFIX ex: <http://example.org/> SELECT ?x WHERE { ?x ex:p ?y } LIMIT 5")
        assert query.variables == (Variable("x"),)
        assert query.patterns == ((Variable("x"), P, Variable("y")),)
        assert query.limit == 5

    def test_default_prefixes(self):
        query = parse_query("SELECT ?u WHERE { ?u a prov:Person }")
        assert query.patterns[0][2] == PERSON

    def test_filters_collected(self):
        query = parse_query(
            "PREFIX ex: <http://example.org/> "
            "SELECT ?x WHERE { ?x ex:q ?n . FILTER(?n > 2 && ?n != 5) }"
        )
        assert [f.op for f in query.filters] == [">", "!="]

    @pytest.mark.parametrize(
        "text, feature",
        [
            ("SELECT ?x WHERE { ?x ?p ?o OPTIONAL { ?x ?q ?r } }", "OPTIONAL"),
            ("SELECT ?x WHERE { { ?x ?p ?o } UNION { ?o ?p ?x } }", "UNION"),
            ("SELECT ?x WHERE { ?x ?p ?o } ORDER BY ?x", "ORDER BY"),
            ("ASK { ?x ?p ?o }", "ASK"),
            ("SELECT ?x WHERE { ?x ?p ?o } LIMIT 2 OFFSET 1", "OFFSET"),
        ],
    )
    def test_unsupported_features(self, text, feature):
        with pytest.raises(UnsupportedFeatureError) as info:
            parse_query(text)
        assert info.value.feature == feature

    def test_syntax_error(self):
        with pytest.raises(QuerySyntaxError):
            parse_query("SELECT ?x WHERE { ?x ?p ")

    def test_undeclared_prefix(self):
        with pytest.raises(QuerySyntaxError):
            parse_query("SELECT ?x WHERE { ?x nope:p ?o }")

    def test_selected_variable_must_occur(self):
        with pytest.raises(QuerySyntaxError, match="\\?y"):
            parse_query("SELECT ?y WHERE { ?x ?p ?o }")


class TestExecution:
    """Joins, filters and result order."""

    def test_join(self, small_graph):
        table = run_query(small_graph, "SELECT ?x ?z WHERE { ?x ex:p ?y . ?y ex:p ?z }")
        assert table.rows == ((A, C),)

    def test_numeric_filter_ignores_strings(self, small_graph):
        table = run_query(small_graph, "SELECT ?x WHERE { ?x ex:q ?n . FILTER(?n >= 3) }")
        assert table.column("x") == [A, B]

    def test_equality_on_strings(self, small_graph):
        table = run_query(small_graph, 'SELECT ?x WHERE { ?x ex:q ?n . FILTER(?n = "seven") }')
        assert table.column("x") == [C]

    def test_rows_are_distinct_and_limited(self, small_graph):
        table = run_query(small_graph, "SELECT ?x WHERE { ?x ?p ?o } LIMIT 2")
        assert table.column("x") == [A, B]

    def test_tsv(self, small_graph):
        table = run_query(small_graph, "SELECT ?x ?n WHERE { ?x ex:q ?n . FILTER(?n < 5) }")
        assert table.to_tsv() == (
            '?x\t?n\n<http://example.org/a>\t"3"^^<http://www.w3.org/2001/XMLSchema#integer>\n'
        )

    def test_patterns_over_built_graph(self, consistent_graph):
        table = run_query(
            consistent_graph,
            "SELECT ?p ?cv WHERE { ?u sio:hasAttribute ?p . ?p a stato:coefficientOfVariation ;"
            " sio:hasValue ?cv . FILTER(?cv < 0.25) }",
        )
        assert len(table)
        assert all(float(cv) < 0.25 for cv in table.column("cv"))
        for pattern in table.column("p"):
            assert (user_iri("user"), HAS_ATTRIBUTE, pattern) in consistent_graph
            assert consistent_graph.match((pattern, None, COEFFICIENT_OF_VARIATION))

    @settings(max_examples=200, deadline=None)
    @given(query_graphs(), select_queries())
    def test_matches_enumeration(self, graph, query):
        text, select, patterns, filters, limit = query
        table = execute(graph, parse_query(text))
        assert list(table.rows) == enumerate_select(graph, select, patterns, filters, limit)

"""End-to-end tests for the phkg command line."""

import json

import pytest
from click.testing import CliRunner
from rdflib import URIRef
from rdflib.namespace import RDF

from cli import cli
from core.foodlog import GenSpec, generate_synthetic_log, parse_log, serialize_log
from core.rdf_store import parse_turtle
from core.vocabulary import PERSON

from tests.conftest import CATALOG_PATH, RULES_DIR

OUTPUT_FILES = {
    "log.jsonl",
    "patterns.json",
    "phkg.ttl",
    "phkg_reasoned.ttl",
    "reason_report.json",
    "recommendations.json",
}


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    result = runner.invoke(cli, [str(arg) for arg in args], catch_exceptions=False)
    assert result.exit_code == 0, result.stderr
    return result


class TestStages:
    """One subcommand at a time."""

    def test_gen_defaults_match_library(self, runner):
        result = invoke(runner, "gen")
        assert result.stdout == serialize_log(generate_synthetic_log(GenSpec()))

    def test_gen_csv_to_file(self, runner, tmp_path):
        out = tmp_path / "log.csv"
        invoke(runner, "gen", "--days", 3, "--format", "csv", "-o", out)
        assert len(parse_log(out.read_text(encoding="utf-8"))) == 9

    def test_ingest_canonicalizes(self, runner, tmp_path, consistent_log):
        path = tmp_path / "log.csv"
        path.write_text(serialize_log(consistent_log, "csv"), encoding="utf-8")
        assert invoke(runner, "ingest", path).stdout == serialize_log(consistent_log)

    def test_summarize(self, runner, log_file):
        report = json.loads(invoke(runner, "summarize", "--log", log_file).stdout)
        assert len(report["windows"]) == 5

    def test_window_length_option(self, runner, log_file):
        report = json.loads(invoke(runner, "--window-length", 5, "summarize", "--log", log_file).stdout)
        assert len(report["windows"]) == 7

    def test_build_kg_is_turtle(self, runner, log_file, profile_file, consistent_graph):
        text = invoke(runner, "build-kg", "--log", log_file, "--profile", profile_file).stdout
        assert parse_turtle(text) == consistent_graph

    def test_reason_report_on_stdout(self, runner, tmp_path, variable_log_file, profile_file):
        kg = tmp_path / "phkg.ttl"
        invoke(runner, "build-kg", "--log", variable_log_file, "--profile", profile_file, "-o", kg)
        result = invoke(runner, "reason", "--kg", kg, "--rules", RULES_DIR, "-o", tmp_path / "out.ttl")
        report = json.loads(result.stdout)
        assert [d["rule"] for d in report["directives"]] == ["G2"]

    def test_query_sparql_and_question(self, runner, tmp_path, log_file, profile_file):
        kg = tmp_path / "phkg.ttl"
        invoke(runner, "build-kg", "--log", log_file, "--profile", profile_file, "-o", kg)

        sparql = tmp_path / "q.rq"
        sparql.write_text("SELECT ?u WHERE { ?u a prov:Person }", encoding="utf-8")
        tsv = invoke(runner, "query", "--kg", kg, "--sparql", sparql).stdout
        assert tsv == "?u\n<https://w3id.org/pho-example/user/user>\n"

        answer = json.loads(
            invoke(
                runner, "query", "--kg", kg, "--question", "G2-compliance",
                "--rules", RULES_DIR, "--catalog", CATALOG_PATH,
            ).stdout
        )
        assert answer["verdict"] == "compliant"

    def test_recommend_inline_constraints(self, runner):
        constraints = json.dumps(
            {
                "constraints": [
                    {
                        "payload": {"carbohydrate": {"unit": "g", "meal": {"type": "range", "lower": 30, "upper": 45}, "daily_total": 150}},
                        "rules": ["G2"],
                    }
                ],
                "likes": ["spicy"],
            }
        )
        result = invoke(runner, "recommend", "--constraints", constraints, "--catalog", CATALOG_PATH)
        recipes = json.loads(result.stdout)
        assert recipes[0]["name"] == "Sweet Potato Breakfast Hash"


class TestPipeline:
    """The chained run."""

    def test_writes_every_output(self, runner, tmp_path, variable_log_file, profile_file):
        out = tmp_path / "out"
        result = invoke(
            runner, "pipeline", "--log", variable_log_file, "--profile", profile_file,
            "--rules", RULES_DIR, "--catalog", CATALOG_PATH, "--output-dir", out,
        )
        assert {path.name for path in out.iterdir()} == OUTPUT_FILES
        assert len(result.stdout.splitlines()) == len(OUTPUT_FILES)

    def test_matches_individual_stages(self, runner, tmp_path, variable_log_file, profile_file):
        out = tmp_path / "out"
        invoke(
            runner, "pipeline", "--log", variable_log_file, "--profile", profile_file,
            "--rules", RULES_DIR, "--catalog", CATALOG_PATH, "--output-dir", out,
        )
        staged = tmp_path / "staged"
        staged.mkdir()
        invoke(runner, "summarize", "--log", variable_log_file, "-o", staged / "patterns.json")
        invoke(runner, "build-kg", "--log", variable_log_file, "--profile", profile_file, "-o", staged / "phkg.ttl")
        invoke(
            runner, "reason", "--kg", staged / "phkg.ttl", "--rules", RULES_DIR,
            "-o", staged / "phkg_reasoned.ttl", "--report", staged / "reason_report.json",
        )
        invoke(
            runner, "recommend", "--constraints", staged / "reason_report.json",
            "--catalog", CATALOG_PATH, "-o", staged / "recommendations.json",
        )
        for name in ("patterns.json", "phkg.ttl", "phkg_reasoned.ttl", "reason_report.json", "recommendations.json"):
            assert (staged / name).read_text(encoding="utf-8") == (out / name).read_text(encoding="utf-8"), name

    def test_same_inputs_same_bytes(self, runner, tmp_path, log_file, profile_file):
        for name in ("a", "b"):
            invoke(
                runner, "pipeline", "--log", log_file, "--profile", profile_file,
                "--rules", RULES_DIR, "--catalog", CATALOG_PATH, "--output-dir", tmp_path / name,
            )
        for name in OUTPUT_FILES:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestErrors:
    """Exit codes and error lines."""

    def test_invalid_log_exits_1(self, runner, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"date": "2021-09-23", "meal": "brunch"}\n', encoding="utf-8")
        result = runner.invoke(cli, ["ingest", str(bad)])
        assert result.exit_code == 1
        assert result.stderr.startswith("error: ")

    def test_unknown_threshold_value_exits_1(self, runner, log_file):
        result = runner.invoke(
            cli, ["--thresholds.cv_consistent_max", "-1", "summarize", "--log", str(log_file)]
        )
        assert result.exit_code == 1

    def test_missing_config_exits_2(self, runner, tmp_path, log_file):
        result = runner.invoke(cli, ["--config", str(tmp_path / "absent.env"), "summarize", "--log", str(log_file)])
        assert result.exit_code == 2
        assert "error: config file not found" in result.stderr

    def test_config_file_sets_window(self, runner, tmp_path, log_file):
        config = tmp_path / "phkg.env"
        config.write_text("window_length_days = 5\n", encoding="utf-8")
        result = invoke(runner, "--config", config, "summarize", "--log", log_file)
        assert len(json.loads(result.stdout)["windows"]) == 7

    def test_config_file_sets_user_namespace(self, runner, tmp_path, log_file, profile_file):
        config = tmp_path / "phkg.env"
        config.write_text("user_namespace = https://example.org/people/\n", encoding="utf-8")
        text = invoke(runner, "--config", config, "build-kg", "--log", log_file, "--profile", profile_file).stdout
        assert "@prefix : <https://example.org/people/> ." in text
        graph = parse_turtle(text)
        assert (URIRef("https://example.org/people/user"), RDF.type, PERSON) in graph
        assert "pho-example/user" not in text

    def test_threshold_flag_reaches_generator(self, runner):
        args = ["gen", "--days", "3", "--low-carb-high-fat", "--carbs-mean", "60", "--fat-mean", "60"]
        assert runner.invoke(cli, args).exit_code == 1
        result = runner.invoke(cli, ["--thresholds.low_carb_max_g_per_day", "200", *args])
        assert result.exit_code == 0, result.stderr

    def test_malformed_turtle_exits_1(self, runner, tmp_path):
        kg = tmp_path / "bad.ttl"
        kg.write_text("<a> <b> .\n", encoding="utf-8")
        result = runner.invoke(cli, ["reason", "--kg", str(kg)])
        assert result.exit_code == 1

    def test_query_needs_exactly_one_mode(self, runner, tmp_path, log_file, profile_file):
        kg = tmp_path / "phkg.ttl"
        invoke(runner, "build-kg", "--log", log_file, "--profile", profile_file, "-o", kg)
        assert runner.invoke(cli, ["query", "--kg", str(kg)]).exit_code == 2

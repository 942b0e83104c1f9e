"""
Pipeline
========
Stage functions shared by the CLI subcommands and the `pipeline` command.

Responsibilities:
- Hold run configuration (paths, thresholds, window length, seed)
- Run each stage: ingest, summarize, build, reason, recommend
- Render every stage output deterministically (JSON reports, canonical Turtle)
- Chain the stages into one run that writes all outputs
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

from config.settings import Settings, settings
from core.errors import DataInconsistencyError
from core.foodlog import FoodLog, MealType, parse_log, serialize_log, validate_log
from core.guidelines import GuidelineRule, builtin_guidelines, load_rules
from core.phkg_builder import UserProfile, build_phkg, load_profile
from core.rdf_store import KnowledgeGraph, serialize_turtle
from core.reasoner import ConstraintSet, GuidelineReasoner
from core.summarizer import PatternSet, Thresholds, TimeSeriesSummarizer
from tools.recipe_search import RecipeSearchService, load_catalog_file

logger = logging.getLogger(__name__)

LOG_FILE = "log.jsonl"
PATTERNS_FILE = "patterns.json"
PHKG_FILE = "phkg.ttl"
REASONED_FILE = "phkg_reasoned.ttl"
REPORT_FILE = "reason_report.json"
RECOMMENDATIONS_FILE = "recommendations.json"


@dataclass(frozen=True)
class PipelineConfig:
    log_path: Optional[Path] = None
    profile_path: Optional[Path] = None
    rules_dir: Path = Path(settings.RULES_DIR)
    catalog_path: Path = Path(settings.CATALOG_PATH)
    output_dir: Path = Path(settings.OUTPUT_DIR)
    thresholds: Thresholds = field(default_factory=Thresholds.from_settings)
    window_length_days: int = settings.WINDOW_LENGTH_DAYS
    seed: int = settings.SEED
    meal: MealType = MealType.BREAKFAST
    user_namespace: str = settings.USER_NAMESPACE
    user_id: str = settings.USER_ID

    @classmethod
    def from_settings(
        cls,
        config: Settings | None = None,
        threshold_overrides: Mapping[str, object] | None = None,
        **paths,
    ) -> "PipelineConfig":
        """Defaults from settings; thresholds overridden field by field."""
        config = config or settings
        thresholds = Thresholds.from_settings(config).with_overrides(threshold_overrides or {})
        base = cls(
            rules_dir=Path(config.RULES_DIR),
            catalog_path=Path(config.CATALOG_PATH),
            output_dir=Path(config.OUTPUT_DIR),
            thresholds=thresholds,
            window_length_days=config.WINDOW_LENGTH_DAYS,
            seed=config.SEED,
            user_namespace=config.USER_NAMESPACE,
            user_id=config.USER_ID,
        )
        changes = {name: Path(value) if name.endswith(("_path", "_dir")) else value
                   for name, value in paths.items() if value is not None}
        return replace(base, **changes)


def dump_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def read_text(path: Path) -> str:
    return Path(path).read_text(encoding="utf-8")


# -------------------------
# Stages
# -------------------------

def ingest(text: str, user_id: Optional[str] = None) -> FoodLog:
    """Parse and validate a log document; duplicate meals are an error."""
    log = parse_log(text, user_id)
    checked = validate_log(log)
    if isinstance(checked, list):
        details = "; ".join(violation.message for violation in checked)
        raise DataInconsistencyError(f"duplicate meal entries: {details}")
    logger.info("Ingested %d meal entries over %d days", len(log), len(log.dates))
    return checked


def summarize(log: FoodLog, config: PipelineConfig) -> PatternSet:
    return TimeSeriesSummarizer(config.thresholds, config.window_length_days).summarize(log)


def build(log: FoodLog, profile: UserProfile, config: PipelineConfig) -> KnowledgeGraph:
    return build_phkg(summarize(log, config), profile, config.user_namespace)


def load_guidelines(rules_dir: Optional[Path]) -> list[GuidelineRule]:
    """Rule documents from a directory, else the built-in guidelines."""
    if rules_dir and Path(rules_dir).is_dir():
        rules = load_rules(rules_dir)
        if rules:
            return rules
    logger.info("No rule documents under %s; using built-in guidelines", rules_dir)
    return builtin_guidelines()


def reason(graph: KnowledgeGraph, rules: Sequence[GuidelineRule]) -> tuple[KnowledgeGraph, dict]:
    """Classified graph and the verdict/directive/constraint report."""
    reasoner = GuidelineReasoner(rules)
    reasoned, directives, verdicts = reasoner.classify(graph)
    constraints = reasoner.active_constraints(reasoned)
    return reasoned, reasoner.report(directives, verdicts, constraints)


def recommend(
    cs: ConstraintSet,
    meal: Optional[MealType],
    catalog_path: Optional[Path] = None,
) -> list[dict]:
    service = RecipeSearchService(load_catalog_file(catalog_path))
    return service.search(cs, meal)["recipes"]


# -------------------------
# Full run
# -------------------------

def run_pipeline(config: PipelineConfig) -> dict[str, Path]:
    """
    log -> patterns -> PHKG -> reasoned PHKG + report -> recommendations.
    Returns the written files by name.
    """
    if config.log_path is None or config.profile_path is None:
        raise DataInconsistencyError("pipeline needs both a log and a profile")

    profile = load_profile(read_text(config.profile_path), config.user_id)
    log = ingest(read_text(config.log_path), profile.user_id)
    patterns = summarize(log, config)
    graph = build_phkg(patterns, profile, config.user_namespace)
    reasoned, report = reason(graph, load_guidelines(config.rules_dir))
    cs = ConstraintSet.from_dict(report["constraints"])
    recommendations = recommend(cs, config.meal, config.catalog_path)

    outputs = {
        LOG_FILE: serialize_log(log),
        PATTERNS_FILE: dump_json(patterns.to_dict()),
        PHKG_FILE: serialize_turtle(graph),
        REASONED_FILE: serialize_turtle(reasoned),
        REPORT_FILE: dump_json(report),
        RECOMMENDATIONS_FILE: dump_json(recommendations),
    }

    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, text in outputs.items():
        path = output_dir / name
        path.write_text(text, encoding="utf-8")
        written[name] = path

    logger.info("Pipeline wrote %d files to %s", len(written), output_dir)
    return written

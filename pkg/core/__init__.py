"""Core module initialization."""

from core.rdf_store import KnowledgeGraph, parse_turtle, serialize_turtle
from core.foodlog import FoodLog, parse_log, generate_synthetic_log
from core.summarizer import TimeSeriesSummarizer, Thresholds, mine_patterns
from core.phkg_builder import UserProfile, build_phkg
from core.guidelines import GuidelineRule, builtin_guidelines
from core.query_engine import run_query
from core.reasoner import GuidelineReasoner, ConstraintSet, augment_question

__all__ = [
    "KnowledgeGraph",
    "parse_turtle",
    "serialize_turtle",
    "FoodLog",
    "parse_log",
    "generate_synthetic_log",
    "TimeSeriesSummarizer",
    "Thresholds",
    "mine_patterns",
    "UserProfile",
    "build_phkg",
    "GuidelineRule",
    "builtin_guidelines",
    "run_query",
    "GuidelineReasoner",
    "ConstraintSet",
    "augment_question",
]

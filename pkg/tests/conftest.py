"""Shared fixtures: logs, profiles, graphs and the recipe catalog."""

import json
from datetime import date, timedelta
from decimal import Decimal
from pathlib import Path

import pytest

from core.foodlog import (
    FoodLog,
    GenSpec,
    MealEntry,
    MealType,
    NutrientVector,
    atwater_energy,
    generate_synthetic_log,
    serialize_log,
)
from core.phkg_builder import UserProfile, build_phkg, load_profile
from core.reasoner import classify
from core.summarizer import TimeSeriesSummarizer
from tools.recipe_search import RecipeCatalog, load_catalog_file

FIXTURES = Path(__file__).parent / "fixtures"
REPO_ROOT = Path(__file__).parent.parent
CATALOG_PATH = REPO_ROOT / "data" / "recipes.json"
RULES_DIR = REPO_ROOT / "rules"

START = date(2021, 9, 23)
MAIN_MEALS = (MealType.BREAKFAST, MealType.LUNCH, MealType.DINNER)


def meal(day: date, meal_type: MealType, carbs, fat, protein, foods=("food",)) -> MealEntry:
    carbs, fat, protein = Decimal(str(carbs)), Decimal(str(fat)), Decimal(str(protein))
    return MealEntry(
        day,
        meal_type,
        tuple(foods),
        NutrientVector(atwater_energy(carbs, fat, protein), carbs, fat, protein),
    )


def uniform_log(days: int, carbs, fat, protein, meals=MAIN_MEALS, user_id="user") -> FoodLog:
    """Same macros for every meal of every day."""
    entries = [
        meal(START + timedelta(days=offset), m, carbs, fat, protein)
        for offset in range(days)
        for m in meals
    ]
    return FoodLog(user_id, tuple(entries))


def alternating_carbs_log(days: int = 35, user_id="user") -> FoodLog:
    """Carbohydrates swing between 10 g and 100 g per meal from day to day."""
    entries = [
        meal(START + timedelta(days=offset), m, 10 if offset % 2 else 100, 40, 25)
        for offset in range(days)
        for m in MAIN_MEALS
    ]
    return FoodLog(user_id, tuple(entries))


def graph_for(log: FoodLog, profile: UserProfile, window_length_days: int = 7):
    patterns = TimeSeriesSummarizer(window_length_days=window_length_days).summarize(log)
    return build_phkg(patterns, profile)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def diabetic_profile() -> UserProfile:
    return load_profile((FIXTURES / "diabetic_profile.json").read_text(encoding="utf-8"))


@pytest.fixture
def prediabetic_profile() -> UserProfile:
    return load_profile((FIXTURES / "prediabetic_profile.json").read_text(encoding="utf-8"))


@pytest.fixture
def healthy_profile() -> UserProfile:
    return load_profile((FIXTURES / "healthy_profile.json").read_text(encoding="utf-8"))


@pytest.fixture
def consistent_log() -> FoodLog:
    """Five weeks from the default generator: steady carbs, high-fat days."""
    return generate_synthetic_log(GenSpec())


@pytest.fixture
def variable_log() -> FoodLog:
    return alternating_carbs_log()


@pytest.fixture
def high_carb_low_fat_log() -> FoodLog:
    return uniform_log(35, carbs=80, fat=8, protein=20)


@pytest.fixture
def consistent_graph(consistent_log, diabetic_profile):
    return graph_for(consistent_log, diabetic_profile)


@pytest.fixture
def variable_graph(variable_log, diabetic_profile):
    return graph_for(variable_log, diabetic_profile)


@pytest.fixture
def reasoned_variable_graph(variable_graph):
    reasoned, _, _ = classify(variable_graph)
    return reasoned


@pytest.fixture
def catalog() -> RecipeCatalog:
    return load_catalog_file(CATALOG_PATH)


@pytest.fixture
def log_file(tmp_path, consistent_log) -> Path:
    path = tmp_path / "log.jsonl"
    path.write_text(serialize_log(consistent_log), encoding="utf-8")
    return path


@pytest.fixture
def variable_log_file(tmp_path, variable_log) -> Path:
    path = tmp_path / "variable.jsonl"
    path.write_text(serialize_log(variable_log), encoding="utf-8")
    return path


@pytest.fixture
def profile_file(tmp_path, diabetic_profile) -> Path:
    path = tmp_path / "profile.json"
    path.write_text(json.dumps(diabetic_profile.to_dict()), encoding="utf-8")
    return path

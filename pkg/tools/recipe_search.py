"""
Recipe Search
=============
Constraint-filtered recipe recommendation over a local catalog.

The catalog is a JSON array of recipe records and stands in for a large
food knowledge graph. Hard constraints (meal type, per-meal nutrient
range, allergens, dislikes, required diet tags) filter; liked tags and
distance to the range midpoint rank.
"""

import json
import logging
import re
from dataclasses import dataclass
from datetime import date
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Optional, Union

from config.settings import settings
from core.errors import CatalogError
from core.foodlog import FoodLog, MealType, daily_totals
from core.guidelines import NutrientConstraint
from core.reasoner import ConstraintSet, format_amount

logger = logging.getLogger(__name__)


def _lowered(values: Iterable[str]) -> frozenset[str]:
    return frozenset(str(value).strip().lower() for value in values if str(value).strip())


def food_words(text: str) -> tuple[str, ...]:
    """Lower-cased words of a food name, each with one plural s removed."""
    return tuple(word.removesuffix("s") or word for word in re.findall(r"[a-z0-9]+", text.lower()))


def food_matches(item: str, food: str) -> bool:
    """True when the words of `item` appear as a run inside `food` ("almonds" in "almond butter")."""
    wanted, words = food_words(item), food_words(food)
    if not wanted:
        return False
    width = len(wanted)
    return any(words[i : i + width] == wanted for i in range(len(words) - width + 1))


@dataclass(frozen=True)
class Recipe:
    name: str
    meal_types: frozenset[MealType]
    tags: frozenset[str] = frozenset()
    ingredients: frozenset[str] = frozenset()
    allergens: frozenset[str] = frozenset()
    carbohydrates_g: Decimal = Decimal(0)
    calories: Decimal = Decimal(0)

    def contains(self, item: str) -> bool:
        return any(food_matches(item, food) for food in self.ingredients | self.allergens)

    def matched_tags(self, likes: Iterable[str]) -> list[str]:
        return sorted(tag for tag in _lowered(likes) if tag in self.tags)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "meal_types": sorted(meal.value for meal in self.meal_types),
            "tags": sorted(self.tags),
            "ingredients": sorted(self.ingredients),
            "allergens": sorted(self.allergens),
            "carbohydrates_g": float(self.carbohydrates_g),
            "calories": float(self.calories),
        }


class RecipeCatalog:
    """
    Immutable recipe list with meal-type and tag indices.
    """

    def __init__(self, recipes: Iterable[Recipe] = ()):
        self._recipes = tuple(sorted(recipes, key=lambda r: r.name.lower()))

        seen = set()
        for recipe in self._recipes:
            key = recipe.name.lower()
            if key in seen:
                raise CatalogError(f"duplicate recipe name {recipe.name!r}")
            seen.add(key)

        self._by_meal: dict[MealType, tuple[Recipe, ...]] = {
            meal: tuple(r for r in self._recipes if meal in r.meal_types) for meal in MealType
        }
        tags = sorted({tag for recipe in self._recipes for tag in recipe.tags})
        self._by_tag: dict[str, tuple[Recipe, ...]] = {
            tag: tuple(r for r in self._recipes if tag in r.tags) for tag in tags
        }

    @property
    def recipes(self) -> tuple[Recipe, ...]:
        return self._recipes

    def by_meal(self, meal: MealType) -> tuple[Recipe, ...]:
        return self._by_meal[meal]

    def by_tag(self, tag: str) -> tuple[Recipe, ...]:
        return self._by_tag.get(tag.lower(), ())

    def __len__(self) -> int:
        return len(self._recipes)

    def __iter__(self):
        return iter(self._recipes)


# -------------------------
# Loading
# -------------------------

def _amount(record: dict, name: str, position: int) -> Decimal:
    value = record.get(name, 0)
    try:
        amount = Decimal(str(value))
    except InvalidOperation:
        raise CatalogError(f"recipe {position}: {name} is not a number") from None
    if not amount.is_finite() or amount < 0:
        raise CatalogError(f"recipe {position}: {name} must not be negative")
    return amount


def _recipe(record: dict, position: int) -> Recipe:
    if not isinstance(record, dict):
        raise CatalogError(f"recipe {position}: expected an object")

    name = str(record.get("name") or "").strip()
    if not name:
        raise CatalogError(f"recipe {position}: missing name")

    try:
        meals = frozenset(MealType.parse(meal) for meal in record.get("meal_types", []))
    except ValueError as exc:
        raise CatalogError(f"recipe {position}: {exc}") from None

    return Recipe(
        name=name,
        meal_types=meals,
        tags=_lowered(record.get("tags", [])),
        ingredients=_lowered(record.get("ingredients", [])),
        allergens=_lowered(record.get("allergens", [])),
        carbohydrates_g=_amount(record, "carbohydrates_g", position),
        calories=_amount(record, "calories", position),
    )


def load_catalog(doc: str) -> RecipeCatalog:
    """
    Build a catalog from a JSON array. An empty document is an empty catalog.
    """
    if not doc.strip():
        return RecipeCatalog()

    try:
        records = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"catalog is not valid JSON: {exc.msg}") from None
    if not isinstance(records, list):
        raise CatalogError("catalog must be a JSON array")

    catalog = RecipeCatalog(_recipe(record, i) for i, record in enumerate(records, start=1))
    logger.info("Loaded catalog with %d recipes", len(catalog))
    return catalog


def load_catalog_file(path: Union[str, Path, None] = None) -> RecipeCatalog:
    path = Path(path or settings.CATALOG_PATH)
    return load_catalog(path.read_text(encoding="utf-8"))


# -------------------------
# Filtering and ranking
# -------------------------

def carbohydrate_range(cs: ConstraintSet) -> Optional[NutrientConstraint]:
    return cs.nutrient("carbohydrate")


def satisfies(recipe: Recipe, cs: ConstraintSet, meal_type: Optional[MealType]) -> bool:
    """Whether a recipe passes every hard constraint."""
    if meal_type is not None and meal_type not in recipe.meal_types:
        return False

    carbs = carbohydrate_range(cs)
    if carbs and not carbs.per_meal_lower <= recipe.carbohydrates_g <= carbs.per_meal_upper:
        return False

    if any(recipe.contains(item) for item in cs.exclusions):
        return False

    return all(tag.lower() in recipe.tags for tag in cs.tags)


def filter_recipes(
    catalog: RecipeCatalog,
    cs: ConstraintSet,
    meal_type: Optional[MealType] = None,
) -> list[Recipe]:
    """
    Recipes satisfying every hard constraint, ranked by liked-tag matches
    (descending), distance of carbohydrates to the range midpoint, then name.
    `meal_type=None` searches every meal.
    """
    for constraint in cs.nutrient_constraints:
        if constraint.nutrient != "carbohydrate":
            logger.debug("Catalog has no %s values; range not applied", constraint.nutrient)

    pool = catalog.recipes if meal_type is None else catalog.by_meal(meal_type)
    carbs = carbohydrate_range(cs)

    def rank(recipe: Recipe):
        distance = abs(recipe.carbohydrates_g - carbs.midpoint) if carbs else Decimal(0)
        return (-len(recipe.matched_tags(cs.likes)), distance, recipe.name.lower())

    return sorted((r for r in pool if satisfies(r, cs, meal_type)), key=rank)


def daily_budget_note(
    cs: ConstraintSet,
    log: Optional[FoodLog] = None,
    day: Optional[date] = None,
) -> Optional[str]:
    """
    Advisory text for the daily carbohydrate total. With a log, reports
    what is left for `day` (default: the last logged day).
    """
    carbs = carbohydrate_range(cs)
    if carbs is None:
        return None

    limit = format_amount(carbs.daily_total)
    note = f"Daily carbohydrate total should not exceed {limit} g."
    if log is None or not len(log):
        return note

    totals = {d.date: d.total.carbohydrates_g for d in daily_totals(log)}
    day = day or max(totals)
    consumed = totals.get(day, Decimal(0))
    remaining = max(carbs.daily_total - consumed, Decimal(0))
    return (
        f"{note} {format_amount(consumed)} g logged on {day.isoformat()}, "
        f"{format_amount(remaining)} g remaining."
    )


class RecipeSearchService:
    """
    Recommendation entry point shared by the CLI, competency answers and viewer.
    """

    def __init__(self, catalog: RecipeCatalog | None = None, catalog_path: str | None = None):
        self.catalog = catalog if catalog is not None else load_catalog_file(catalog_path)

    def search(
        self,
        cs: ConstraintSet,
        meal_type: Optional[MealType] = None,
        log: Optional[FoodLog] = None,
        limit: Optional[int] = None,
    ) -> dict:
        """
        Ranked recommendations plus the daily-budget advisory.
        """
        recipes = filter_recipes(self.catalog, cs, meal_type)
        if limit is not None:
            recipes = recipes[:limit]

        return {
            "meal": meal_type.value if meal_type else None,
            "recipes": self.records(recipes, cs),
            "note": daily_budget_note(cs, log),
        }

    @staticmethod
    def records(recipes: list[Recipe], cs: ConstraintSet) -> list[dict]:
        return [
            {
                "name": recipe.name,
                "carbohydrates_g": float(recipe.carbohydrates_g),
                "matched_tags": recipe.matched_tags(cs.likes),
                "rank": rank,
            }
            for rank, recipe in enumerate(recipes, start=1)
        ]

    def build_answer(self, result: dict) -> str:
        """
        Readable text block for a search result.
        """
        lines = []
        for item in result["recipes"]:
            tags = f" ({', '.join(item['matched_tags'])})" if item["matched_tags"] else ""
            lines.append(f"{item['rank']}. {item['name']}: {item['carbohydrates_g']:g} g carbohydrates{tags}")

        if not lines:
            lines.append("No recipe satisfies the constraints.")
        if result.get("note"):
            lines.append(result["note"])
        return "\n".join(lines)

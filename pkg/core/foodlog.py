"""
Food Log Handling
=================
Meal-level food logs in a MyFitnessPal-like record schema.

Responsibilities:
- Parse JSON-lines and CSV log documents into an immutable FoodLog
- Write logs back out in either format
- Report duplicate meals and missing days
- Aggregate meals into per-day nutrient totals
- Generate reproducible synthetic logs
"""

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass, field, fields
from datetime import date, timedelta
from decimal import ROUND_CEILING, ROUND_FLOOR, Decimal, InvalidOperation
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Optional, Union

import numpy as np

from config.settings import settings
from core.errors import GenerationError, LogParseError

if TYPE_CHECKING:
    from core.summarizer import Thresholds

logger = logging.getLogger(__name__)

TENTH = Decimal("0.1")
NUTRIENT_FIELDS = ("calories", "carbohydrates_g", "fat_g", "protein_g")
CSV_COLUMNS = ("date", "meal", "foods", "calories", "carbohydrates_g", "fat_g", "protein_g")

# Atwater factors, kcal per gram
KCAL_PER_G_CARBOHYDRATE = 4
KCAL_PER_G_FAT = 9
KCAL_PER_G_PROTEIN = 4


class MealType(str, Enum):
    BREAKFAST = "breakfast"
    LUNCH = "lunch"
    DINNER = "dinner"
    SNACK = "snack"

    @property
    def order(self) -> int:
        return list(MealType).index(self)

    @property
    def label(self) -> str:
        """Capitalized name, as used for PHO meal terms."""
        return self.value.capitalize()

    @classmethod
    def parse(cls, text: str) -> "MealType":
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise ValueError(f"unknown meal type {text!r}") from None


class MissingDaysWarning(UserWarning):
    """The log skips one or more calendar days."""


# -------------------------
# Records
# -------------------------

@dataclass(frozen=True)
class NutrientVector:
    calories: Decimal = Decimal(0)
    carbohydrates_g: Decimal = Decimal(0)
    fat_g: Decimal = Decimal(0)
    protein_g: Decimal = Decimal(0)

    def __post_init__(self):
        for name in NUTRIENT_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, Decimal):
                value = Decimal(str(value))
                object.__setattr__(self, name, value)
            if not value.is_finite():
                raise ValueError(f"{name} must be finite")
            if value < 0:
                raise ValueError(f"negative nutrient: {name}")

    def __add__(self, other: "NutrientVector") -> "NutrientVector":
        return NutrientVector(
            **{name: getattr(self, name) + getattr(other, name) for name in NUTRIENT_FIELDS}
        )

    def get(self, nutrient: str) -> Decimal:
        return getattr(self, nutrient)

    @property
    def is_zero(self) -> bool:
        return all(getattr(self, name) == 0 for name in NUTRIENT_FIELDS)


@dataclass(frozen=True)
class MealEntry:
    date: date
    meal_type: MealType
    food_names: tuple[str, ...]
    nutrients: NutrientVector

    @property
    def sort_key(self) -> tuple[date, int]:
        return self.date, self.meal_type.order


@dataclass(frozen=True)
class FoodLog:
    """Entries are kept sorted by date, then meal order."""

    user_id: str
    entries: tuple[MealEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "entries", tuple(sorted(self.entries, key=lambda e: e.sort_key))
        )

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def dates(self) -> list[date]:
        return sorted({entry.date for entry in self.entries})


@dataclass(frozen=True)
class DayNutrients:
    date: date
    total: NutrientVector
    per_meal: dict[MealType, NutrientVector] = field(default_factory=dict)
    meals_logged: int = 0


@dataclass(frozen=True)
class Violation:
    date: date
    meal_type: MealType
    count: int

    @property
    def message(self) -> str:
        return (
            f"{self.count} {self.meal_type.value} entries on {self.date.isoformat()}"
        )


# -------------------------
# Parsing
# -------------------------

def _require(record: dict, index: int, name: str):
    value = record.get(name)
    if value is None or (isinstance(value, str) and not value.strip()):
        raise LogParseError(index, name, "missing field")
    return value


def _decimal(value, index: int, name: str) -> Decimal:
    if isinstance(value, bool):
        raise LogParseError(index, name, "not a number")
    try:
        number = value if isinstance(value, Decimal) else Decimal(str(value).strip())
    except InvalidOperation:
        raise LogParseError(index, name, "not a number") from None
    if not number.is_finite():
        raise LogParseError(index, name, "non-finite nutrient")
    if number < 0:
        raise LogParseError(index, name, "negative nutrient")
    return number


def _record_to_entry(record: dict, index: int) -> MealEntry:
    raw_date = _require(record, index, "date")
    try:
        day = date.fromisoformat(str(raw_date).strip())
    except ValueError:
        raise LogParseError(index, "date", f"bad date {raw_date!r}") from None

    try:
        meal = MealType.parse(_require(record, index, "meal"))
    except ValueError as exc:
        raise LogParseError(index, "meal", str(exc)) from None

    foods = record.get("foods") or []
    if isinstance(foods, str):
        foods = [name for name in foods.split(";")]
    if not isinstance(foods, list):
        raise LogParseError(index, "foods", "expected a list of food names")
    food_names = tuple(str(name).strip() for name in foods if str(name).strip())

    nutrients = NutrientVector(
        **{
            name: _decimal(_require(record, index, name), index, name)
            for name in NUTRIENT_FIELDS
        }
    )
    return MealEntry(day, meal, food_names, nutrients)


def _jsonl_records(text: str) -> Iterable[tuple[int, dict]]:
    index = 0
    for line in text.splitlines():
        if not line.strip():
            continue
        index += 1
        try:
            record = json.loads(line, parse_float=Decimal, parse_int=Decimal)
        except json.JSONDecodeError as exc:
            raise LogParseError(index, "record", f"invalid JSON: {exc.msg}") from None
        if not isinstance(record, dict):
            raise LogParseError(index, "record", "expected a JSON object")
        yield index, record


def _csv_records(text: str) -> Iterable[tuple[int, dict]]:
    reader = csv.DictReader(io.StringIO(text))
    for index, row in enumerate(reader, start=1):
        yield index, {key.strip().lower(): value for key, value in row.items() if key}


def parse_log(text: str, user_id: Optional[str] = None) -> FoodLog:
    """
    Parse a log document.

    JSON-lines is detected by a leading `{`; anything else is read as CSV
    with a header row. Records are 1-indexed in error messages.
    """
    user_id = user_id or settings.USER_ID
    body = text.lstrip("\ufeff")
    if not body.strip():
        return FoodLog(user_id)

    records = _jsonl_records(body) if body.lstrip().startswith("{") else _csv_records(body)
    entries = [_record_to_entry(record, index) for index, record in records]

    logger.info("Parsed %d meal entries", len(entries))
    return FoodLog(user_id, tuple(entries))


def _number(value: Decimal) -> str:
    return format(value, "f")


def serialize_log(log: FoodLog, fmt: str = "jsonl") -> str:
    """Write a log as JSON-lines (default) or CSV."""
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for entry in log.entries:
            writer.writerow(
                [
                    entry.date.isoformat(),
                    entry.meal_type.value,
                    ";".join(entry.food_names),
                    *(_number(entry.nutrients.get(name)) for name in NUTRIENT_FIELDS),
                ]
            )
        return buffer.getvalue()

    if fmt != "jsonl":
        raise ValueError(f"unknown log format {fmt!r}")

    lines = []
    for entry in log.entries:
        parts = [
            f'"date":"{entry.date.isoformat()}"',
            f'"meal":"{entry.meal_type.value}"',
            f'"foods":{json.dumps(list(entry.food_names), ensure_ascii=False)}',
        ]
        parts += [f'"{name}":{_number(entry.nutrients.get(name))}' for name in NUTRIENT_FIELDS]
        lines.append("{" + ",".join(parts) + "}")
    return "".join(line + "\n" for line in lines)


# -------------------------
# Validation & aggregation
# -------------------------

def find_gaps(log: FoodLog) -> list[date]:
    """Calendar days between the first and last logged date with no entries."""
    logged = set(log.dates)
    if not logged:
        return []
    first, last = min(logged), max(logged)
    span = (last - first).days
    return [
        first + timedelta(days=offset)
        for offset in range(span + 1)
        if first + timedelta(days=offset) not in logged
    ]


def validate_log(log: FoodLog) -> Union[FoodLog, list[Violation]]:
    """
    Return the log unchanged when it has no duplicate (date, meal) pairs,
    else the list of violations. Missing days only raise a MissingDaysWarning.
    """
    counts: dict[tuple[date, MealType], int] = {}
    for entry in log.entries:
        key = (entry.date, entry.meal_type)
        counts[key] = counts.get(key, 0) + 1

    violations = [
        Violation(day, meal, count)
        for (day, meal), count in sorted(counts.items(), key=lambda item: (item[0][0], item[0][1].order))
        if count > 1
    ]

    gaps = find_gaps(log)
    if gaps:
        listed = ", ".join(day.isoformat() for day in gaps)
        logger.warning("Food log is missing %d day(s): %s", len(gaps), listed)
        warnings.warn(MissingDaysWarning(f"missing days: {listed}"), stacklevel=2)

    if violations:
        logger.warning("Food log has %d duplicate meal entries", len(violations))
        return violations
    return log


def daily_totals(log: FoodLog) -> list[DayNutrients]:
    """
    One DayNutrients per logged date, in date order. Meals that were not
    logged contribute nothing and are not counted in meals_logged.
    """
    per_day: dict[date, dict[MealType, NutrientVector]] = {}
    for entry in log.entries:
        meals = per_day.setdefault(entry.date, {})
        meals[entry.meal_type] = meals.get(entry.meal_type, NutrientVector()) + entry.nutrients

    days = []
    for day in sorted(per_day):
        meals = per_day[day]
        total = NutrientVector()
        for vector in meals.values():
            total = total + vector
        days.append(DayNutrients(day, total, dict(meals), len(meals)))
    return days


# -------------------------
# Synthetic generation
# -------------------------

FOOD_CHOICES: dict[MealType, tuple[str, ...]] = {
    MealType.BREAKFAST: (
        "oatmeal", "blueberries", "greek yogurt", "whole wheat toast",
        "scrambled eggs", "banana", "almond butter", "avocado",
    ),
    MealType.LUNCH: (
        "grilled chicken", "quinoa", "mixed greens", "lentil soup",
        "brown rice", "turkey wrap", "chickpeas", "olive oil",
    ),
    MealType.DINNER: (
        "baked salmon", "sweet potato", "broccoli", "whole wheat pasta",
        "tofu stir fry", "black beans", "roasted vegetables", "lean beef",
    ),
    MealType.SNACK: (
        "apple", "walnuts", "carrot sticks", "hummus", "cheese", "orange",
    ),
}

VARIABLE_CARB_SPREAD = 0.8


@dataclass(frozen=True)
class GenSpec:
    """
    Synthetic log parameters. Means are per meal; jitter fractions bound
    each draw to [mean * (1 - jitter), mean * (1 + jitter)].
    """

    start: date = date(2021, 9, 23)
    num_days: int = 35
    meals: tuple[MealType, ...] = (MealType.BREAKFAST, MealType.LUNCH, MealType.DINNER)
    carbs_mean: float = 45.0
    carbs_jitter: float = 0.1
    fat_mean: float = 25.0
    fat_jitter: float = 0.1
    protein_mean: float = 25.0
    protein_jitter: float = 0.1
    calories_mean: Optional[float] = None
    calories_jitter: float = 0.1
    consistent_carbs: bool = True
    low_carb_high_fat: bool = False
    skip_breakfast_probability: float = 0.0
    seed: int = 7
    user_id: str = "user"
    thresholds: Optional["Thresholds"] = None

    def __post_init__(self):
        if self.num_days < 1:
            raise GenerationError("num_days must be at least 1")
        if not self.meals:
            raise GenerationError("at least one meal slot is required")
        for name in ("carbs_jitter", "fat_jitter", "protein_jitter", "calories_jitter"):
            if not 0 <= getattr(self, name) <= 1:
                raise GenerationError(f"{name} must lie in [0, 1]")
        if not 0 <= self.skip_breakfast_probability <= 1:
            raise GenerationError("skip_breakfast_probability must lie in [0, 1]")
        for name in ("carbs_mean", "fat_mean", "protein_mean"):
            if getattr(self, name) <= 0:
                raise GenerationError(f"{name} must be positive")
        if self.calories_mean is not None and self.calories_mean <= 0:
            raise GenerationError("calories_mean must be positive")

    @property
    def effective_carbs_jitter(self) -> float:
        return self.carbs_jitter if self.consistent_carbs else VARIABLE_CARB_SPREAD

    def bounds(self, mean: float, jitter: float) -> tuple[Decimal, Decimal]:
        """Draw range on the 0.1 grid."""
        center = Decimal(str(mean))
        spread = Decimal(str(jitter))
        low = (center * (1 - spread)).quantize(TENTH, rounding=ROUND_CEILING)
        high = (center * (1 + spread)).quantize(TENTH, rounding=ROUND_FLOOR)
        if low > high:
            low = high = center.quantize(TENTH)
        return low, high

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def _check_low_carb_high_fat(spec: GenSpec) -> None:
    """
    Reject specs whose draw ranges allow a day outside the low-carb and
    high-fat labels under the configured thresholds.
    """
    carbs_lo, carbs_hi = (float(v) for v in spec.bounds(spec.carbs_mean, spec.effective_carbs_jitter))
    fat_lo, _ = (float(v) for v in spec.bounds(spec.fat_mean, spec.fat_jitter))
    protein_lo, protein_hi = (float(v) for v in spec.bounds(spec.protein_mean, spec.protein_jitter))

    if spec.thresholds is not None:
        low_carb_cap = spec.thresholds.low_carb_max_g_per_day
        high_fat = spec.thresholds.high_fat_energy_fraction
        high_carb = spec.thresholds.high_carb_energy_fraction
    else:
        low_carb_cap = settings.LOW_CARB_MAX_G_PER_DAY
        high_fat = settings.HIGH_FAT_ENERGY_FRACTION
        high_carb = settings.HIGH_CARB_ENERGY_FRACTION

    daily_carbs_hi = carbs_hi * len(spec.meals)
    if daily_carbs_hi >= low_carb_cap:
        raise GenerationError(
            f"carbohydrates can reach {daily_carbs_hi:g} g/day, "
            f"not below the low-carb cap of {low_carb_cap:g} g"
        )

    fat_energy = KCAL_PER_G_FAT * fat_lo
    worst_energy = KCAL_PER_G_CARBOHYDRATE * carbs_hi + fat_energy + KCAL_PER_G_PROTEIN * protein_hi
    if spec.calories_mean is not None:
        _, calories_hi = spec.bounds(spec.calories_mean, spec.calories_jitter)
        worst_energy = max(worst_energy, float(calories_hi))
    if fat_energy / worst_energy < high_fat:
        raise GenerationError(
            "fat share of energy can fall below the high-fat threshold "
            f"({fat_energy / worst_energy:.3f} < {high_fat})"
        )

    carb_energy = KCAL_PER_G_CARBOHYDRATE * carbs_hi
    leanest = carb_energy + fat_energy + KCAL_PER_G_PROTEIN * protein_lo
    if carb_energy / leanest >= high_carb:
        raise GenerationError(
            "carbohydrate share of energy can reach the high-carb threshold, "
            "which contradicts a low-carb day"
        )


def atwater_energy(carbohydrates_g: Decimal, fat_g: Decimal, protein_g: Decimal) -> Decimal:
    return (
        KCAL_PER_G_CARBOHYDRATE * carbohydrates_g
        + KCAL_PER_G_FAT * fat_g
        + KCAL_PER_G_PROTEIN * protein_g
    )


def generate_synthetic_log(spec: GenSpec) -> FoodLog:
    """
    Deterministic synthetic log: the same GenSpec (seed included)
    always yields the same FoodLog.
    """
    if spec.low_carb_high_fat:
        _check_low_carb_high_fat(spec)

    rng = np.random.default_rng(spec.seed)

    def draw(mean: float, jitter: float) -> Decimal:
        low, high = spec.bounds(mean, jitter)
        value = Decimal(str(round(rng.uniform(float(low), float(high)), 1)))
        return min(max(value, low), high)

    entries = []
    for offset in range(spec.num_days):
        day = spec.start + timedelta(days=offset)
        for meal in spec.meals:
            if (
                meal is MealType.BREAKFAST
                and spec.skip_breakfast_probability > 0
                and rng.random() < spec.skip_breakfast_probability
            ):
                continue

            carbs = draw(spec.carbs_mean, spec.effective_carbs_jitter)
            fat = draw(spec.fat_mean, spec.fat_jitter)
            protein = draw(spec.protein_mean, spec.protein_jitter)
            calories = atwater_energy(carbs, fat, protein)
            if spec.calories_mean is not None:
                calories = max(draw(spec.calories_mean, spec.calories_jitter), calories)

            choices = FOOD_CHOICES[meal]
            picked = rng.choice(len(choices), size=2, replace=False)
            foods = tuple(choices[i] for i in sorted(int(i) for i in picked))

            entries.append(MealEntry(day, meal, foods, NutrientVector(calories, carbs, fat, protein)))

    logger.info("Generated %d synthetic meals over %d days", len(entries), spec.num_days)
    return FoodLog(spec.user_id, tuple(entries))

"""
Time Series Summarization
=========================
Mines temporal dietary patterns from daily nutrient series.

Responsibilities:
- Classify each day with diet labels (low/high carb, low/high fat)
- Compute the coefficient of variation of a nutrient over a window
- Measure how often a label (or a pair of labels) holds in a window
- Tile a food log into weekly windows and collect every pattern
"""

import dataclasses
import logging
import warnings
from dataclasses import dataclass
from datetime import date, timedelta
from decimal import Decimal
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from config.settings import Settings, settings
from core.errors import DataInconsistencyError, InsufficientDataError, UndefinedCVError
from core.foodlog import (
    KCAL_PER_G_CARBOHYDRATE,
    KCAL_PER_G_FAT,
    DayNutrients,
    FoodLog,
    MealType,
    daily_totals,
)

logger = logging.getLogger(__name__)


class DietLabel(str, Enum):
    LOW_CARB = "LowCarbDiet"
    HIGH_CARB = "HighCarbDiet"
    LOW_FAT = "LowFatDiet"
    HIGH_FAT = "HighFatDiet"


EXCLUSIVE_LABELS = (
    (DietLabel.LOW_CARB, DietLabel.HIGH_CARB),
    (DietLabel.LOW_FAT, DietLabel.HIGH_FAT),
)
DEFAULT_GOAL = (DietLabel.LOW_CARB, DietLabel.HIGH_FAT)


class Nutrient(str, Enum):
    CARBOHYDRATES = "carbohydrates"
    FAT = "fat"
    PROTEIN = "protein"
    CALORIES = "calories"

    @property
    def field(self) -> str:
        """Attribute name on NutrientVector."""
        return "calories" if self is Nutrient.CALORIES else f"{self.value}_g"

    @property
    def label(self) -> str:
        return self.value.capitalize()


@dataclass(frozen=True)
class Thresholds:
    low_carb_max_g_per_day: float = 130.0
    high_carb_energy_fraction: float = 0.50
    low_fat_energy_fraction: float = 0.25
    high_fat_energy_fraction: float = 0.40
    cv_consistent_max: float = 0.25
    usually_fraction: float = 0.5

    def __post_init__(self):
        if self.low_carb_max_g_per_day <= 0:
            raise ValueError("low_carb_max_g_per_day must be positive")
        for name in (
            "high_carb_energy_fraction",
            "low_fat_energy_fraction",
            "high_fat_energy_fraction",
            "usually_fraction",
        ):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
        if self.high_fat_energy_fraction <= self.low_fat_energy_fraction:
            raise ValueError("high_fat_energy_fraction must exceed low_fat_energy_fraction")
        if self.cv_consistent_max <= 0:
            raise ValueError("cv_consistent_max must be positive")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_settings(cls, config: Optional[Settings] = None) -> "Thresholds":
        config = config or settings
        return cls(**{name: getattr(config, name.upper()) for name in cls.field_names()})

    def with_overrides(self, overrides: Mapping[str, object]) -> "Thresholds":
        """Copy with the named fields replaced; unknown names raise ValueError."""
        known = set(self.field_names())
        changes = {}
        for name, value in overrides.items():
            if name not in known:
                raise ValueError(f"unknown threshold {name!r}")
            if value is not None:
                changes[name] = float(value)
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


# -------------------------
# Windows and patterns
# -------------------------

@dataclass(frozen=True)
class Window:
    """Inclusive date range; `meal` set for per-meal granularity."""

    start: date
    end: date
    meal: Optional[MealType] = None
    partial: bool = False

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"window start {self.start} is after end {self.end}")

    @property
    def granularity(self) -> str:
        return self.meal.value if self.meal else "daily"

    @property
    def length_days(self) -> int:
        return (self.end - self.start).days + 1

    def contains(self, day: date) -> bool:
        return self.start <= day <= self.end

    def per_meal(self, meal: Optional[MealType]) -> "Window":
        return dataclasses.replace(self, meal=meal)

    def to_dict(self) -> dict:
        return {
            "start": self.start.isoformat(),
            "end": self.end.isoformat(),
            "granularity": self.granularity,
            "partial": self.partial,
        }


@dataclass(frozen=True)
class ConsistencyPattern:
    nutrient: Nutrient
    window: Window
    value: float
    consistent: bool
    statistic_kind: str = "coefficientOfVariation"

    @property
    def key(self) -> tuple:
        return ("consistency", self.nutrient.value, self.window)

    def to_dict(self) -> dict:
        return {
            "kind": "consistency",
            "nutrient": self.nutrient.value,
            "window": self.window.to_dict(),
            "statistic": self.statistic_kind,
            "value": self.value,
            "consistent": self.consistent,
        }


@dataclass(frozen=True)
class DietLabelFrequency:
    label: DietLabel
    window: Window
    frequency: float

    @property
    def key(self) -> tuple:
        return ("frequency", self.label.value, self.window)

    def to_dict(self) -> dict:
        return {
            "kind": "frequency",
            "label": self.label.value,
            "window": self.window.to_dict(),
            "frequency": self.frequency,
        }


@dataclass(frozen=True)
class CombinedGoal:
    participants: tuple[DietLabel, DietLabel]
    window: Window
    holds: bool
    co_occurrence_fraction: float

    @property
    def name(self) -> str:
        """e.g. LowCarbHighFat"""
        return "".join(label.value.removesuffix("Diet") for label in self.participants)

    @property
    def key(self) -> tuple:
        return ("goal", self.name, self.window)

    def to_dict(self) -> dict:
        return {
            "kind": "goal",
            "participants": [label.value for label in self.participants],
            "window": self.window.to_dict(),
            "holds": self.holds,
            "co_occurrence_fraction": self.co_occurrence_fraction,
        }


@dataclass(frozen=True)
class PredominantDiet:
    """Diet labels holding on more than `usually_fraction` of a window's data days."""

    window: Window
    labels: tuple[DietLabel, ...]

    @property
    def key(self) -> tuple:
        return ("diet", "predominant", self.window)

    def to_dict(self) -> dict:
        return {
            "kind": "diet",
            "labels": [label.value for label in self.labels],
            "window": self.window.to_dict(),
        }


Pattern = Union[ConsistencyPattern, DietLabelFrequency, CombinedGoal, PredominantDiet]


@dataclass(frozen=True)
class PatternSet:
    consistency: tuple[ConsistencyPattern, ...] = ()
    frequencies: tuple[DietLabelFrequency, ...] = ()
    goals: tuple[CombinedGoal, ...] = ()
    diets: tuple[PredominantDiet, ...] = ()

    def __post_init__(self):
        seen = set()
        for pattern in self:
            if pattern.key in seen:
                raise ValueError(f"duplicate pattern {pattern.key}")
            seen.add(pattern.key)

    def __iter__(self):
        yield from self.consistency
        yield from self.frequencies
        yield from self.goals
        yield from self.diets

    def __len__(self) -> int:
        return len(self.consistency) + len(self.frequencies) + len(self.goals) + len(self.diets)

    @property
    def windows(self) -> list[Window]:
        """Distinct daily windows, oldest first."""
        found = {p.window.per_meal(None) for p in self}
        return sorted(found, key=lambda w: w.start)

    def to_dict(self) -> dict:
        return {
            "windows": [w.to_dict() for w in self.windows],
            "consistency": [p.to_dict() for p in self.consistency],
            "frequencies": [p.to_dict() for p in self.frequencies],
            "goals": [p.to_dict() for p in self.goals],
            "diets": [p.to_dict() for p in self.diets],
        }


# -------------------------
# Statistics
# -------------------------

def coefficient_of_variation(series: Sequence[Union[float, Decimal]]) -> float:
    """
    Population standard deviation over mean.

    Raises InsufficientDataError for fewer than two points and
    UndefinedCVError when the mean is zero.
    """
    values = np.asarray([float(x) for x in series], dtype=np.float64)
    if values.size < 2:
        raise InsufficientDataError(
            f"coefficient of variation needs at least 2 points, got {values.size}"
        )
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ValueError("series values must be finite and non-negative")

    mean = values.mean()
    if mean == 0:
        raise UndefinedCVError("coefficient of variation is undefined for a zero mean")
    return float(values.std() / mean)


def _fraction(value: float) -> Decimal:
    return Decimal(str(value))


def classify_day(day: DayNutrients, thresholds: Thresholds) -> frozenset[DietLabel]:
    """
    Diet labels for one day: low-carb by grams, the rest by energy share.
    A day with nothing logged qualifies for no label.
    """
    total = day.total
    if total.is_zero:
        return frozenset()

    if total.calories == 0:
        raise DataInconsistencyError(
            f"{day.date.isoformat()}: zero calories with nonzero macronutrients"
        )

    labels = set()
    if total.carbohydrates_g < _fraction(thresholds.low_carb_max_g_per_day):
        labels.add(DietLabel.LOW_CARB)

    carb_share = KCAL_PER_G_CARBOHYDRATE * total.carbohydrates_g / total.calories
    fat_share = KCAL_PER_G_FAT * total.fat_g / total.calories

    if carb_share >= _fraction(thresholds.high_carb_energy_fraction):
        labels.add(DietLabel.HIGH_CARB)
    if fat_share <= _fraction(thresholds.low_fat_energy_fraction):
        labels.add(DietLabel.LOW_FAT)
    if fat_share >= _fraction(thresholds.high_fat_energy_fraction):
        labels.add(DietLabel.HIGH_FAT)

    for first, second in EXCLUSIVE_LABELS:
        if first in labels and second in labels:
            raise DataInconsistencyError(
                f"{day.date.isoformat()}: both {first.value} and {second.value} apply"
            )
    return frozenset(labels)


def _data_days(days: Iterable[DayNutrients], window: Window) -> list[DayNutrients]:
    return [d for d in days if window.contains(d.date) and d.meals_logged > 0]


def pattern_frequency(
    days: Sequence[DayNutrients],
    label: DietLabel,
    thresholds: Thresholds,
    window: Window,
) -> DietLabelFrequency:
    data = _data_days(days, window)
    if not data:
        raise InsufficientDataError(f"no logged days in window starting {window.start}")

    qualifying = sum(1 for d in data if label in classify_day(d, thresholds))
    return DietLabelFrequency(label, window, qualifying / len(data))


def detect_consistency(
    days: Sequence[DayNutrients],
    nutrient: Nutrient,
    window: Window,
    thresholds: Thresholds,
    meal: Optional[MealType] = None,
) -> ConsistencyPattern:
    """
    CV of the daily totals, or of one meal slot when `meal` (or the
    window's own meal) is given.
    """
    meal = meal or window.meal
    window = window.per_meal(meal)

    if meal is None:
        series = [d.total.get(nutrient.field) for d in _data_days(days, window)]
    else:
        series = [
            d.per_meal[meal].get(nutrient.field)
            for d in days
            if window.contains(d.date) and meal in d.per_meal
        ]

    value = coefficient_of_variation(series)
    return ConsistencyPattern(nutrient, window, value, value <= thresholds.cv_consistent_max)


def detect_combined_goal(
    days: Sequence[DayNutrients],
    labels: tuple[DietLabel, DietLabel],
    window: Window,
    thresholds: Thresholds,
) -> CombinedGoal:
    data = _data_days(days, window)
    if not data:
        raise InsufficientDataError(f"no logged days in window starting {window.start}")

    wanted = set(labels)
    together = sum(1 for d in data if wanted <= classify_day(d, thresholds))
    fraction = together / len(data)
    return CombinedGoal(tuple(labels), window, fraction > thresholds.usually_fraction, fraction)


def tile_windows(first: date, last: date, length_days: int) -> list[Window]:
    """
    Non-overlapping windows of `length_days` ending at `last`. The oldest
    window is cut at `first` and flagged partial when it comes up short.
    """
    if length_days < 1:
        raise ValueError("window length must be at least 1 day")

    windows = []
    end = last
    while end >= first:
        start = end - timedelta(days=length_days - 1)
        partial = start < first
        windows.append(Window(max(start, first), end, partial=partial))
        end = start - timedelta(days=1)
    return windows[::-1]


def _skip(reason: str, window: Window) -> None:
    logger.warning("Skipping %s pattern for window %s: insufficient data", reason, window.start)


def mine_patterns(
    log: FoodLog,
    thresholds: Optional[Thresholds] = None,
    window_length_days: int = 7,
) -> PatternSet:
    """
    Tile the log into windows and collect, per window, carbohydrate
    consistency (daily and per meal), all four label frequencies, the
    low-carb/high-fat goal and the predominant diet.
    """
    thresholds = thresholds or Thresholds.from_settings()
    days = daily_totals(log)
    if not days:
        raise InsufficientDataError("cannot mine patterns from an empty food log")

    consistency, frequencies, goals, diets = [], [], [], []

    for window in tile_windows(days[0].date, days[-1].date, window_length_days):
        if window.partial:
            logger.warning(
                "Window %s..%s is shorter than %d days; flagged partial",
                window.start, window.end, window_length_days,
            )
        if not _data_days(days, window):
            _skip("every", window)
            continue

        for meal in (None, *MealType):
            if meal and not any(window.contains(d.date) and meal in d.per_meal for d in days):
                continue
            try:
                consistency.append(
                    detect_consistency(days, Nutrient.CARBOHYDRATES, window, thresholds, meal)
                )
            except (InsufficientDataError, UndefinedCVError) as exc:
                _skip(f"{meal.value if meal else 'daily'} consistency", window)
                warnings.warn(str(exc), stacklevel=2)

        window_frequencies = [
            pattern_frequency(days, label, thresholds, window) for label in DietLabel
        ]
        frequencies.extend(window_frequencies)
        goals.append(detect_combined_goal(days, DEFAULT_GOAL, window, thresholds))

        predominant = tuple(
            f.label for f in window_frequencies if f.frequency > thresholds.usually_fraction
        )
        if predominant:
            diets.append(PredominantDiet(window, predominant))

    patterns = PatternSet(tuple(consistency), tuple(frequencies), tuple(goals), tuple(diets))
    logger.info("Mined %d patterns over %d windows", len(patterns), len(patterns.windows))
    return patterns


class TimeSeriesSummarizer:
    """
    Holds thresholds and window length so callers configure mining once.
    """

    def __init__(
        self,
        thresholds: Thresholds | None = None,
        window_length_days: int | None = None,
    ):
        self.thresholds = thresholds or Thresholds.from_settings()
        self.window_length_days = window_length_days or settings.WINDOW_LENGTH_DAYS

    def summarize(self, log: FoodLog) -> PatternSet:
        return mine_patterns(log, self.thresholds, self.window_length_days)

    def label_days(self, log: FoodLog) -> list[tuple[date, frozenset[DietLabel]]]:
        """Per-day labels, for reports."""
        return [(d.date, classify_day(d, self.thresholds)) for d in daily_totals(log)]

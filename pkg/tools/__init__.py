"""Tools module initialization."""

from tools.recipe_search import RecipeCatalog, RecipeSearchService, filter_recipes, load_catalog

__all__ = [
    "RecipeCatalog",
    "RecipeSearchService",
    "filter_recipes",
    "load_catalog",
]

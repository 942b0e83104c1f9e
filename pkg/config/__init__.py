"""Config module initialization."""
from config.settings import Settings, load_config_file, settings

__all__ = ["Settings", "load_config_file", "settings"]

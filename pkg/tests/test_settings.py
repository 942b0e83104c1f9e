"""Tests for runtime configuration."""

import pytest

from config.settings import Settings, get_setting, load_config_file


class TestSources:
    """Environment and config files."""

    def test_prefixed_environment_variable(self, monkeypatch):
        monkeypatch.setenv("PHKG_SEED", "11")
        assert get_setting("SEED", "7") == "11"

    def test_default_when_unset(self, monkeypatch):
        monkeypatch.delenv("PHKG_SEED", raising=False)
        assert get_setting("SEED", "7") == "7"

    def test_config_file_keys_lowercased(self, tmp_path):
        path = tmp_path / "phkg.env"
        path.write_text("WINDOW_LENGTH_DAYS = 5\nseed=3\nrules_dir=\n", encoding="utf-8")
        assert load_config_file(str(path)) == {"window_length_days": "5", "seed": "3"}


class TestOverrides:
    """Validated copies."""

    def test_values_coerced_to_field_type(self):
        updated = Settings().with_overrides({"window_length_days": "5", "cv_consistent_max": "0.3"})
        assert updated.WINDOW_LENGTH_DAYS == 5
        assert updated.CV_CONSISTENT_MAX == pytest.approx(0.3)

    def test_none_leaves_field(self):
        base = Settings()
        assert base.with_overrides({"seed": None}).SEED == base.SEED

    def test_original_unchanged(self):
        base = Settings()
        base.with_overrides({"seed": 99})
        assert base.SEED == Settings().SEED

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="Unknown setting"):
            Settings().with_overrides({"colour": "blue"})

    def test_uncoercible_value(self):
        with pytest.raises(ValueError, match="Invalid value"):
            Settings().with_overrides({"window_length_days": "a week"})


class TestValidation:
    """Rejected configurations."""

    def test_defaults_validate(self):
        assert Settings().validate()

    @pytest.mark.parametrize(
        "overrides, message",
        [
            ({"window_length_days": 0}, "WINDOW_LENGTH_DAYS"),
            ({"cv_consistent_max": -1}, "CV_CONSISTENT_MAX"),
            ({"usually_fraction": 1.5}, "USUALLY_FRACTION"),
            ({"low_fat_energy_fraction": 0.45}, "HIGH_FAT_ENERGY_FRACTION"),
            ({"progress_band": -0.1}, "PROGRESS_BAND"),
            ({"log_level": "LOUD"}, "LOG_LEVEL"),
            ({"user_namespace": "no-scheme"}, "USER_NAMESPACE"),
        ],
    )
    def test_invalid(self, overrides, message):
        with pytest.raises(ValueError, match=message):
            Settings().with_overrides(overrides)

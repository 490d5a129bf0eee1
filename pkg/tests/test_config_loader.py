import pytest

from config_loader import AppConfig, get_config, reload_config


def write_config(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestAppConfig:
    def test_shipped_defaults(self):
        config = get_config()
        assert config.TOL_IDENTITY == 1e-6
        assert config.TOL_FD_IDENTITY == 1e-4
        assert config.T_STEP == 1e-4
        assert config.OUTPUT_FORMAT == "json"

    def test_fallbacks_for_missing_sections(self, tmp_path):
        config = AppConfig(write_config(tmp_path / "config.ini", "[Application]\nversion = 9.9.9\n"))
        assert config.VERSION == "9.9.9"
        assert config.NODES == 16
        assert config.GRAM_CONDITION == 1e12

    def test_step_policy(self, tmp_path):
        config = AppConfig(write_config(tmp_path / "config.ini", "[Numerics]\nfd_step = 1e-4\nrichardson = false\n"))
        policy = config.step_policy()
        assert policy.step == 1e-4
        assert not policy.richardson

    def test_ledger_directory_is_created(self, tmp_path):
        ledger = tmp_path / "ledger" / "runs.db"
        AppConfig(write_config(tmp_path / "config.ini", f"[Output]\nledger_path = {ledger}\n"))
        assert ledger.parent.is_dir()

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            AppConfig(str(tmp_path / "absent.ini"))

    def test_info_dict_sections(self):
        assert list(get_config().get_info_dict()) == ["Application", "Numerics", "Tolerances", "Quadrature"]


def test_reload_returns_a_fresh_instance():
    before = get_config()
    after = reload_config()
    assert after is not before
    assert after is get_config()

from pathlib import Path

import pytest

import settings
from errors import ConfigError
from settings import PipelineConfig, Settings, find_solver, load_config, read_config_file


@pytest.fixture
def no_solver(monkeypatch):
    monkeypatch.delenv("STG_SOLVER", raising=False)
    monkeypatch.setattr(settings.shutil, "which", lambda name: None)
    monkeypatch.setattr(settings, "_packaged_z3", lambda: None)


class TestSettings:
    def test_from_env(self, monkeypatch):
        monkeypatch.setenv("STG_WORKERS", "3")
        monkeypatch.setenv("STG_SEED", "7")
        monkeypatch.setenv("DEBUG_MODE", "true")
        loaded = Settings.from_env()
        assert (loaded.workers, loaded.seed, loaded.debug) == (3, 7, True)

    def test_invalid_env(self, monkeypatch):
        monkeypatch.setenv("STG_WORKERS", "0")
        with pytest.raises(ConfigError):
            Settings.from_env()


class TestLoadConfig:
    def test_precedence(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("SEED=2\nALIGN_STEPS=10\n")
        env = Settings(seed=1, workers=2)
        assert load_config(path, {"seed": 3}, env).seed == 3
        from_file = load_config(path, {"seed": None}, env)
        assert from_file.seed == 2
        assert from_file.align_steps == 10
        assert from_file.workers == 2
        assert load_config(None, None, env).seed == 1

    def test_comma_lists(self):
        config = load_config(None, {"inputs": "a.json, b.json", "p_grid": "0.1,0.2", "k_values": "3,4"}, Settings())
        assert config.inputs == [Path("a.json"), Path("b.json")]
        assert config.p_grid == [0.1, 0.2]
        assert config.k_values == [3, 4]

    def test_defaults(self):
        config = PipelineConfig()
        assert config.align_schedule().steps == 2000
        assert config.nested_endpoints().steps_initial == 500
        assert len(config.p_grid) == 30
        assert config.k_values == list(range(3, 15))

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("ALIGN_STPES=10\n")
        with pytest.raises(ConfigError):
            load_config(path, None, Settings())

    def test_inverted_schedule(self):
        with pytest.raises(ConfigError):
            load_config(None, {"align_t_min": 3.0}, Settings())

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_config_file(tmp_path / "absent.env")

    def test_solver_required_for_repair(self, no_solver):
        with pytest.raises(ConfigError):
            load_config(None, {"pipeline": "repair"}, Settings())

    def test_solver_not_required_without_repair(self, no_solver):
        assert load_config(None, {"pipeline": "centroid", "repair": False}, Settings()).solver is None


class TestFindSolver:
    def test_absent(self, no_solver):
        assert find_solver() is None

    def test_explicit_path(self, no_solver, tmp_path):
        binary = tmp_path / "z3"
        binary.write_text("")
        assert find_solver(str(binary)) == str(binary)

    def test_environment(self, no_solver, monkeypatch, tmp_path):
        binary = tmp_path / "solver"
        binary.write_text("")
        monkeypatch.setenv("STG_SOLVER", str(binary))
        assert find_solver() == str(binary)

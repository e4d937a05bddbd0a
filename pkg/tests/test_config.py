import json

import pytest

from app.config import Config
from model.config import PipelineConfig, build_config
from utils.exceptions import ConfigurationError


class TestPipelineConfig:
    def test_defaults(self, cfg):
        assert cfg.scan_interval_s == 300
        assert cfg.min_dwell_s == 1200
        assert cfg.min_pts_poi == 4
        assert cfg.ap_low_count == 35
        assert (cfg.eps_low, cfg.eps_high) == (0.4, 0.6)
        assert cfg.gps_accuracy_max == 25.0
        assert cfg.visit_gap_s == 600

    def test_frozen(self, cfg):
        with pytest.raises(ValueError):
            cfg.min_pts_poi = 3

    def test_eps_order(self):
        with pytest.raises(ConfigurationError):
            build_config({"eps_low": 0.7, "eps_high": 0.6})

    @pytest.mark.parametrize("field,value", [("eps_low", 0), ("eps_high", 1.5), ("scan_interval_s", -1),
                                             ("min_pts_poi", 0)])
    def test_out_of_range(self, field, value):
        with pytest.raises(ConfigurationError):
            build_config({field: value})

    def test_unknown_field(self):
        with pytest.raises(ConfigurationError):
            build_config({"minpts": 4})

    def test_with_overrides_ignores_none(self, cfg):
        changed = cfg.with_overrides(min_pts_poi=3, eps_low=None)
        assert changed.min_pts_poi == 3
        assert changed.eps_low == cfg.eps_low
        assert cfg.min_pts_poi == 4

    def test_snapshot_is_plain_json(self, cfg):
        snapshot = cfg.snapshot()
        assert json.loads(json.dumps(snapshot)) == snapshot
        assert PipelineConfig(**snapshot) == cfg


class TestConfig:
    def test_environment(self, monkeypatch):
        monkeypatch.setenv("MTRACE_MIN_DWELL_S", "900")
        monkeypatch.setenv("MTRACE_LOG_LEVEL", "DEBUG")
        monkeypatch.setenv("MTRACE_STORE_DIR", "/tmp/store")
        config = Config()
        assert config.pipeline().min_dwell_s == 900
        assert config.log_level == "DEBUG"
        assert config.store_dir == "/tmp/store"
        assert config.get("pipeline.min_dwell_s") == "900"

    def test_defaults_without_environment(self):
        config = Config()
        assert config.pipeline() == PipelineConfig()
        assert config.log_level == "INFO"
        assert config.log_file is None

    def test_file(self, tmp_path):
        path = tmp_path / "mtrace.json"
        path.write_text(json.dumps({"log_level": "WARNING", "pipeline": {"min_pts_poi": 5}}))
        config = Config(str(path))
        assert config.pipeline().min_pts_poi == 5
        assert config.log_level == "WARNING"
        assert config.get("missing.key", "fallback") == "fallback"

    def test_overrides_win_over_file(self, tmp_path):
        path = tmp_path / "mtrace.json"
        path.write_text(json.dumps({"pipeline": {"min_pts_poi": 5}}))
        assert Config(str(path)).pipeline({"min_pts_poi": 2, "eps_low": None}).min_pts_poi == 2

    def test_unknown_pipeline_key(self, tmp_path):
        path = tmp_path / "mtrace.json"
        path.write_text(json.dumps({"pipeline": {"min_pts": 5}}))
        with pytest.raises(ConfigurationError, match="min_pts"):
            Config(str(path))

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            Config(str(tmp_path / "absent.json"))
        bad = tmp_path / "bad.json"
        bad.write_text("[1, 2]")
        with pytest.raises(ConfigurationError):
            Config(str(bad))

    def test_bad_environment_value(self, monkeypatch):
        monkeypatch.setenv("MTRACE_EPS_LOW", "lots")
        with pytest.raises(ConfigurationError):
            Config()

import json

import pytest

from config import RunConfig, load_run_config, read_config_file
from utils.exceptions import ConfigError

def _write_env(tmp_path, text):
    path = tmp_path / "run.env"
    path.write_text(text, encoding="utf-8")
    return str(path)

class TestRunConfig:
    def test_typed_parsing(self, tmp_path):
        path = _write_env(tmp_path, "SEED=7\nSIGMA_GRID=0.5,1,2\nLAMBDA=0.01\nSTANDARDIZE=true\nHAR_POSITIVE=1;2\n")
        cfg = load_run_config(path, {})
        assert cfg.seed == 7
        assert cfg.sigma_grid == [0.5, 1.0, 2.0]
        assert cfg.lam == 0.01
        assert cfg.standardize is True
        assert cfg.har_positive == [1, 2]

    def test_flags_override_file(self, tmp_path):
        path = _write_env(tmp_path, "SEED=7\nTRIALS=100\n")
        cfg = load_run_config(path, {"trials": "250", "n_max": None})
        assert cfg.trials == 250
        assert cfg.n_max == RunConfig().n_max

    def test_defaults_without_file(self):
        cfg = load_run_config(None, {"seed": "3"})
        assert (cfg.seed, cfg.method, cfg.target_pf, cfg.num_centers) == (3, "wkdrf", 0.1, 25)

    def test_missing_seed(self, tmp_path):
        with pytest.raises(ConfigError, match="seed"):
            load_run_config(_write_env(tmp_path, "TRIALS=10\n"), {})

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError, match="BOGUS"):
            load_run_config(_write_env(tmp_path, "SEED=1\nBOGUS=2\n"), {})

    def test_bad_value(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(_write_env(tmp_path, "SEED=1\nTRIALS=many\n"), {})

    def test_invalid_threads(self):
        with pytest.raises(ConfigError):
            load_run_config(None, {"seed": "1", "threads": "0"})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(str(tmp_path / "none.env"), {})

    def test_require(self):
        cfg = RunConfig(seed=1)
        with pytest.raises(ConfigError, match="lambda"):
            cfg.require("lam")
        with pytest.raises(ConfigError):
            RunConfig(seed=1, spec_file="/nonexistent/spec.json").require_file("spec_file")

class TestManifestAsConfig:
    def test_roundtrip_through_manifest(self, tmp_path):
        cfg = load_run_config(None, {"seed": "5", "lambda": "0.1", "targets": "0.05,0.1", "oracle": "yes"})
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({"command": "sweep", "config": cfg.to_mapping()}), encoding="utf-8")
        again = load_run_config(str(manifest), {})
        assert again == cfg

    def test_manifest_without_config(self, tmp_path):
        manifest = tmp_path / "manifest.json"
        manifest.write_text('{"command": "eval"}', encoding="utf-8")
        with pytest.raises(ConfigError):
            read_config_file(str(manifest))

    def test_mapping_uses_lambda_key(self):
        mapping = RunConfig(seed=1, lam=0.5).to_mapping()
        assert mapping["lambda"] == 0.5
        assert "lam" not in mapping

    def test_runtime_keys_not_in_mapping(self):
        mapping = RunConfig(seed=1, threads=4, out_dir="elsewhere").to_mapping()
        assert "threads" not in mapping and "out_dir" not in mapping
        assert mapping == RunConfig(seed=1).to_mapping()

"""Config precedence: defaults, file, environment variable, flags."""

import pytest

from cccpipe.config import CONFIG_ENV_VAR, PipelineConfig, load_config, parse_config_text


class TestDefaults:
    def test_paper_optima(self):
        cfg = PipelineConfig()
        assert cfg.tau == 0.15
        assert cfg.v_x == 140
        assert cfg.folds == 5
        assert cfg.size == 224

    def test_validation(self):
        with pytest.raises(ValueError):
            PipelineConfig(tau=0.0)
        with pytest.raises(ValueError):
            PipelineConfig(v_x=300)
        with pytest.raises(ValueError):
            PipelineConfig(folds=1)
        with pytest.raises(ValueError):
            PipelineConfig(threads=-1)


class TestParseText:
    def test_pairs_comments_blanks(self):
        text = "\n# full comment\ntau = 0.2\nv_x=170  # trailing comment\n\nbackend = oracle\n"
        assert parse_config_text(text) == {"tau": 0.2, "v_x": 170, "backend": "oracle"}

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown key"):
            parse_config_text("velocity = 9")

    def test_missing_equals(self):
        with pytest.raises(ValueError, match="expected key = value"):
            parse_config_text("tau 0.2")

    def test_bad_number(self):
        with pytest.raises(ValueError, match="bad value"):
            parse_config_text("folds = five")


class TestLoadPrecedence:
    def test_file_overrides_defaults(self, tmp_path):
        p = tmp_path / "pipeline.cfg"
        p.write_text("tau = 0.3\nseed = 9\n")
        cfg = load_config(p, env={})
        assert cfg.tau == 0.3
        assert cfg.seed == 9
        assert cfg.v_x == 140

    def test_flags_override_file(self, tmp_path):
        p = tmp_path / "pipeline.cfg"
        p.write_text("tau = 0.3\n")
        cfg = load_config(p, {"tau": 0.05}, env={})
        assert cfg.tau == 0.05

    def test_none_flags_ignored(self, tmp_path):
        p = tmp_path / "pipeline.cfg"
        p.write_text("tau = 0.3\n")
        cfg = load_config(p, {"tau": None, "seed": 4}, env={})
        assert cfg.tau == 0.3
        assert cfg.seed == 4

    def test_env_var_supplies_path(self, tmp_path):
        p = tmp_path / "pipeline.cfg"
        p.write_text("v_x = 100\n")
        cfg = load_config(env={CONFIG_ENV_VAR: str(p)})
        assert cfg.v_x == 100

    def test_explicit_path_beats_env(self, tmp_path):
        a = tmp_path / "a.cfg"
        a.write_text("v_x = 100\n")
        b = tmp_path / "b.cfg"
        b.write_text("v_x = 170\n")
        cfg = load_config(b, env={CONFIG_ENV_VAR: str(a)})
        assert cfg.v_x == 170

    def test_invalid_combination_rejected(self, tmp_path):
        p = tmp_path / "pipeline.cfg"
        p.write_text("folds = 0\n")
        with pytest.raises(ValueError):
            load_config(p, env={})

import json

import pytest

from siscorrect.config import (
    ConfigError,
    apply_overrides,
    load_config_file,
    parse_config,
)

AR1_RAW = {
    "model": "ar1", "n": 100, "seed": 7, "phi": 0.5, "sigma2": 1.0,
    "theta": 0.2, "steps": 10, "out": "runs/x",
}
INV_RAW = {
    "model": "invasion", "n": 100, "seed": 7, "cells": 5, "origin": 3,
    "theta_exp": 0.3, "phi_det": 0.5, "max_time": 4, "out": "runs/x",
}


class TestLoad:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config_file(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{model:")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config_file(path)

    def test_non_object(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="one JSON object"):
            load_config_file(path)

    def test_manifest_wrapper_is_unwrapped(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"version": "0", "command": "run",
                                    "config": AR1_RAW}))
        assert load_config_file(path) == AR1_RAW


class TestParse:
    def test_ar1_defaults(self):
        cfg = parse_config(dict(AR1_RAW))
        assert cfg.scheme == "u1"
        assert cfg.resampler == "multinomial"
        assert cfg.feed == "simulate"
        assert cfg.figures is True
        assert cfg.u1_bound_sds == 8.0
        assert cfg.ar1_params().phi == 0.5

    def test_invasion_parses(self):
        cfg = parse_config(dict(INV_RAW))
        params = cfg.invasion_params()
        assert params.cells == 5 and params.origin == 3

    @pytest.mark.parametrize("key", ["model", "n", "seed", "phi", "sigma2",
                                     "theta", "steps"])
    def test_missing_required_key(self, key):
        raw = dict(AR1_RAW)
        del raw[key]
        with pytest.raises(ConfigError):
            parse_config(raw)

    def test_unknown_keys_are_rejected(self):
        raw = dict(AR1_RAW, pih=0.5)
        with pytest.raises(ConfigError, match="pih"):
            parse_config(raw)

    def test_model_specific_keys_do_not_mix(self):
        raw = dict(AR1_RAW, cells=5)
        with pytest.raises(ConfigError, match="cells"):
            parse_config(raw)

    def test_type_and_range_checks(self):
        with pytest.raises(ConfigError, match="n >= 2"):
            parse_config(dict(AR1_RAW, n=1))
        with pytest.raises(ConfigError, match="integer"):
            parse_config(dict(AR1_RAW, n=True))
        with pytest.raises(ConfigError, match="seed"):
            parse_config(dict(AR1_RAW, seed=-1))
        with pytest.raises(ConfigError, match="phi"):
            parse_config(dict(AR1_RAW, phi=1.0))
        with pytest.raises(ConfigError, match="origin"):
            parse_config(dict(INV_RAW, origin=6))
        with pytest.raises(ConfigError, match="scheme"):
            parse_config(dict(AR1_RAW, scheme="u3"))
        with pytest.raises(ConfigError, match="resampler"):
            parse_config(dict(AR1_RAW, resampler="soft"))
        with pytest.raises(ConfigError, match="figures"):
            parse_config(dict(AR1_RAW, figures="yes"))
        with pytest.raises(ConfigError, match="u1_bound_sds"):
            parse_config(dict(AR1_RAW, u1_bound_sds=-1.0))

    def test_u2_is_ar1_only(self):
        with pytest.raises(ConfigError, match="ar1 model only"):
            parse_config(dict(INV_RAW, scheme="u2"))

    def test_run_configs_need_out_and_existing_feed(self, tmp_path):
        raw = dict(AR1_RAW)
        del raw["out"]
        with pytest.raises(ConfigError, match="'out'"):
            parse_config(raw)
        with pytest.raises(ConfigError, match="feed file not found"):
            parse_config(dict(AR1_RAW, feed=str(tmp_path / "gone.feed")))
        cfg = parse_config(dict(AR1_RAW, feed=str(tmp_path / "gone.feed")),
                           for_run=False)
        assert cfg.feed.endswith("gone.feed")

    def test_steps_optional_when_feed_is_a_file(self, tmp_path):
        feed = tmp_path / "a.feed"
        feed.write_text("1 1\n0.5\n")
        raw = dict(AR1_RAW, feed=str(feed))
        del raw["steps"]
        cfg = parse_config(raw)
        assert cfg.steps is None

    def test_as_dict_covers_the_active_model_only(self):
        d = parse_config(dict(AR1_RAW)).as_dict()
        assert "phi" in d and "cells" not in d and "out" in d
        d = parse_config(dict(INV_RAW)).as_dict()
        assert "cells" in d and "phi" not in d


def test_overrides_only_touch_given_flags():
    raw = dict(AR1_RAW)
    out = apply_overrides(raw, seed=99, particles=None, scheme="u2",
                          figures=False)
    assert out["seed"] == 99 and out["scheme"] == "u2"
    assert out["figures"] is False
    assert out["n"] == raw["n"]
    assert raw["seed"] == 7  # input mapping untouched

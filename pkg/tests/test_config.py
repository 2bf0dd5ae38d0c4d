import pytest

from streamsim import config as config_mod
from streamsim.provisioner import PolicyKind
from streamsim.workload import ConfigError


class TestDefaults:
    def test_repository_shape(self, repo):
        assert len(repo) == 16
        sizes = [spec.size_class.value for spec in repo.values()]
        assert sizes.count("small") == 8
        assert sizes.count("medium") == 5
        assert sizes.count("large") == 3

    def test_default_grid(self, cfg):
        assert cfg.levels == [400, 800, 1200]
        assert cfg.seeds == list(range(1, 11))
        assert set(cfg.policies) == {
            PolicyKind.DYNAMIC_DURABLE,
            PolicyKind.EPHEMERAL_ONLY,
            PolicyKind.STATIC_DURABLE,
        }

    def test_static_defaults_to_one_per_function(self, cfg):
        static = cfg.static_config()
        assert static.counts == {fid: 1 for fid in cfg.repository}

    def test_estimator_modes(self, cfg):
        assert cfg.make_estimator().estimate("f01") == cfg.repository["f01"].exec_time_s
        cfg.estimator_mode = "learning"
        learner = cfg.make_estimator()
        learner.observe("f01", "container", 9.0)
        assert learner.estimate("f01") == pytest.approx(9.0)

    def test_invalid_mode_rejected(self):
        with pytest.raises(ConfigError):
            config_mod.ExperimentConfig(estimator_mode="psychic")


class TestSerialization:
    def test_round_trip(self, cfg, tmp_path):
        path = tmp_path / "config.json"
        config_mod.save(cfg, path)
        loaded = config_mod.load(path)
        assert config_mod.to_dict(loaded) == config_mod.to_dict(cfg)
        assert loaded.digest() == cfg.digest()

    def test_digest_changes_with_content(self, cfg):
        before = cfg.digest()
        cfg.levels = [100]
        assert cfg.digest() != before

    def test_malformed_json_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            config_mod.load(path)

    def test_unknown_static_function_rejected(self):
        with pytest.raises(ConfigError):
            config_mod.from_dict({"static_counts": {"nope": 1}})

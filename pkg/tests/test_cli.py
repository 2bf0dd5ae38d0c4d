import json

import pytest

from streamsim import cli
from streamsim import config as config_mod
from streamsim.workload import load_trace


def write_config(tmp_path, levels=(60,), seeds=(1,), **overrides):
    cfg = config_mod.ExperimentConfig()
    cfg.levels = list(levels)
    cfg.seeds = list(seeds)
    for key, value in overrides.items():
        setattr(cfg, key, value)
    path = tmp_path / "config.json"
    config_mod.save(cfg, path)
    return path


class TestGenerate:
    def test_writes_loadable_trace(self, tmp_path, capsys):
        out = tmp_path / "trace.jsonl"
        code = cli.main(["generate", "--out", str(out), "--tasks", "50", "--seed", "3"])
        assert code == cli.EXIT_OK
        records = load_trace(out)
        assert len(records) == 50
        assert "50 records" in capsys.readouterr().out

    def test_defaults_come_from_config(self, tmp_path):
        cfg_path = write_config(tmp_path, levels=[40], seeds=[7])
        out = tmp_path / "trace.jsonl"
        cli.main(["generate", "--config", str(cfg_path), "--out", str(out)])
        assert len(load_trace(out)) == 40

    def test_missing_config_is_usage_error(self, tmp_path):
        code = cli.main(
            ["generate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "t")]
        )
        assert code == cli.EXIT_USAGE


class TestSimulate:
    def test_produces_report_and_plan_log(self, tmp_path):
        trace = tmp_path / "trace.jsonl"
        cli.main(["generate", "--out", str(trace), "--tasks", "40", "--seed", "2"])
        out = tmp_path / "run"
        code = cli.main(
            ["simulate", "--trace", str(trace), "--policy", "ephemeral",
             "--out", str(out), "--event-log"]
        )
        assert code == cli.EXIT_OK
        lines = (out / "report.csv").read_text().splitlines()
        assert lines[0] == "policy,level,seed,makespan_s,miss_rate,start_overhead_s,init_overhead_s"
        assert len(lines) == 2
        assert lines[1].startswith("ephemeral,40,")
        plan_entries = [
            json.loads(line) for line in (out / "plan_log.jsonl").read_text().splitlines()
        ]
        for entry in plan_entries:
            assert entry["allocations"] == {}  # ephemeral never promotes
        events = (out / "event_log.jsonl").read_text().splitlines()
        assert events and all(json.loads(e)["kind"] for e in events)

    def test_unknown_policy_is_usage_error(self, tmp_path):
        trace = tmp_path / "trace.jsonl"
        cli.main(["generate", "--out", str(trace), "--tasks", "10"])
        code = cli.main(
            ["simulate", "--trace", str(trace), "--policy", "psychic", "--out", str(tmp_path / "o")]
        )
        assert code == cli.EXIT_USAGE

    def test_missing_trace_is_usage_error(self, tmp_path):
        code = cli.main(
            ["simulate", "--trace", str(tmp_path / "nope.jsonl"), "--policy", "dynamic",
             "--out", str(tmp_path / "o")]
        )
        assert code == cli.EXIT_USAGE


class TestCompare:
    def test_full_artifact_set(self, tmp_path):
        cfg_path = write_config(tmp_path, levels=[60], seeds=[1, 2])
        out = tmp_path / "cmp"
        code = cli.main(["compare", "--config", str(cfg_path), "--out", str(out)])
        assert code == cli.EXIT_OK
        assert (out / "runs.csv").exists()
        assert (out / "comparison.csv").exists()
        assert (out / "makespan.png").stat().st_size > 0
        assert sorted(p.name for p in (out / "traces").iterdir()) == [
            "level60_seed1.jsonl",
            "level60_seed2.jsonl",
        ]
        # One plan log per (policy, level, seed).
        assert len(list((out / "runs").iterdir())) == 6
        runs_lines = (out / "runs.csv").read_text().splitlines()
        assert len(runs_lines) == 1 + 6
        cmp_lines = (out / "comparison.csv").read_text().splitlines()
        assert cmp_lines[0] == "policy,level,n_seeds,makespan_mean_s,ci95_half_width_s"
        assert len(cmp_lines) == 1 + 3
        assert not (tmp_path / "cmp.partial").exists()

    def test_refuses_nonempty_output_dir(self, tmp_path):
        cfg_path = write_config(tmp_path)
        out = tmp_path / "cmp"
        out.mkdir()
        (out / "stale.txt").write_text("x")
        assert cli.main(["compare", "--config", str(cfg_path), "--out", str(out)]) == cli.EXIT_USAGE

    def test_refuses_stale_staging_dir(self, tmp_path):
        cfg_path = write_config(tmp_path)
        out = tmp_path / "cmp"
        (tmp_path / "cmp.partial").mkdir()
        assert cli.main(["compare", "--config", str(cfg_path), "--out", str(out)]) == cli.EXIT_USAGE

    def test_requires_two_policies(self, tmp_path):
        from streamsim.provisioner import PolicyKind

        cfg_path = write_config(tmp_path, policies=[PolicyKind.EPHEMERAL_ONLY])
        out = tmp_path / "cmp"
        assert cli.main(["compare", "--config", str(cfg_path), "--out", str(out)]) == cli.EXIT_USAGE


class TestSeedMixing:
    def test_mix_seed_spreads_inputs(self):
        seen = {cli._mix_seed(0, s, lvl) for s in range(10) for lvl in (400, 800, 1200)}
        assert len(seen) == 30

import csv
import math

import pytest

from streamsim import metrics
from streamsim.domain import Priority
from streamsim.engine import HostConfig
from streamsim.estimator import TimeEstimator
from streamsim.provisioner import PolicyKind
from streamsim.workload import TraceRecord
from streamsim import engine
from tests.conftest import make_spec


def tiny_run(arrivals=(0.0, 1.0), deadline=100.0):
    spec = make_spec(fid="fx", exec_time_s=4.0, memory_mb=128.0)
    trace = [
        TraceRecord(t, f"s{i}", 0, "fx", deadline, Priority.NORMAL)
        for i, t in enumerate(arrivals)
    ]
    result = engine.run(
        trace,
        HostConfig(),
        {"fx": spec},
        PolicyKind.EPHEMERAL_ONLY,
        TimeEstimator.from_profile({"fx": 4.0}),
    )
    return trace, result


class TestTraceDigest:
    def test_stable_and_content_sensitive(self):
        a = [TraceRecord(0.0, "s1", 0, "fx", 5.0, Priority.HIGH)]
        b = [TraceRecord(0.0, "s1", 1, "fx", 5.0, Priority.HIGH)]
        assert metrics.trace_digest(a) == metrics.trace_digest(a)
        assert metrics.trace_digest(a) != metrics.trace_digest(b)


class TestSummarize:
    def test_basic_quantities(self):
        trace, result = tiny_run()
        rep = metrics.summarize(result, trace, policy="ephemeral", seed=3, level=2)
        # Two tasks, each start 1.0 + exec 4.0; second arrives at t=1.
        assert rep.makespan_s == pytest.approx(6.0)
        assert rep.deadline_miss_rate == 0.0
        assert rep.total_start_overhead_s == pytest.approx(2.0)
        assert rep.total_init_overhead_s == 0.0
        assert rep.mean_turnaround_s == pytest.approx(5.0)
        assert rep.level == 2 and rep.seed == 3 and rep.policy == "ephemeral"

    def test_missed_deadlines_counted(self):
        trace, result = tiny_run(deadline=3.0)
        rep = metrics.summarize(result, trace)
        assert rep.deadline_miss_count == 2
        assert rep.deadline_miss_rate == 1.0

    def test_incomplete_run_rejected(self):
        trace, result = tiny_run()
        result.completed -= 1
        with pytest.raises(metrics.MetricsError):
            metrics.summarize(result, trace)


class TestCompare:
    def _report(self, policy, seed, makespan, digest="d0", level=400):
        return metrics.RunReport(
            policy=policy,
            seed=seed,
            level=level,
            makespan_s=makespan,
            deadline_miss_count=0,
            deadline_miss_rate=0.0,
            total_start_overhead_s=0.0,
            total_init_overhead_s=0.0,
            mean_turnaround_s=1.0,
            p95_turnaround_s=1.0,
            trace_digest=digest,
        )

    def test_mean_and_t_interval(self):
        reports = [self._report("dynamic", s, m, digest=f"d{s}") for s, m in
                   [(1, 10.0), (2, 12.0), (3, 14.0)]]
        (row,) = metrics.compare(reports)
        assert row.makespan_mean_s == pytest.approx(12.0)
        # t(0.975, df=2) = 4.302652..., sd = 2, n = 3.
        assert row.ci95_half_width_s == pytest.approx(4.302652729911275 * 2 / math.sqrt(3))

    def test_single_seed_has_undefined_interval(self):
        (row,) = metrics.compare([self._report("dynamic", 1, 10.0)])
        assert math.isnan(row.ci95_half_width_s)

    def test_mismatched_traces_rejected(self):
        reports = [
            self._report("dynamic", 1, 10.0, digest="aa"),
            self._report("ephemeral", 1, 11.0, digest="bb"),
        ]
        with pytest.raises(metrics.MetricsError):
            metrics.compare(reports)


class TestCsvOutput:
    def test_report_header_and_rows(self, tmp_path):
        trace, result = tiny_run()
        rep = metrics.summarize(result, trace, policy="ephemeral", seed=3, level=2)
        path = tmp_path / "report.csv"
        metrics.write_report_csv([rep], path)
        lines = path.read_text().splitlines()
        assert lines[0] == "policy,level,seed,makespan_s,miss_rate,start_overhead_s,init_overhead_s"
        row = next(csv.DictReader(lines))
        assert row["policy"] == "ephemeral"
        assert float(row["makespan_s"]) == pytest.approx(6.0)

    def test_comparison_csv_handles_undefined_interval(self, tmp_path):
        rows = metrics.compare(
            [TestCompare()._report("dynamic", 1, 10.0)]
        )
        path = tmp_path / "comparison.csv"
        metrics.write_comparison_csv(rows, path)
        text = path.read_text()
        assert "n/a" in text
        assert "np.float64" not in text

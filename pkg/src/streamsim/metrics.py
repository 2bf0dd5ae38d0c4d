"""Per-run summaries and cross-policy comparison tables."""

from __future__ import annotations

import csv
import hashlib
import math
import statistics
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

from scipy import stats as scipy_stats

from .engine import RunResult
from .workload import TraceRecord

REPORT_HEADER = [
    "policy",
    "level",
    "seed",
    "makespan_s",
    "miss_rate",
    "start_overhead_s",
    "init_overhead_s",
]


class MetricsError(Exception):
    pass


def trace_digest(records: Sequence[TraceRecord]) -> str:
    h = hashlib.sha256()
    for rec in records:
        h.update(rec.to_json().encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


@dataclass
class RunReport:
    policy: str
    seed: int
    level: int
    makespan_s: float
    deadline_miss_count: int
    deadline_miss_rate: float
    total_start_overhead_s: float
    total_init_overhead_s: float
    mean_turnaround_s: float
    p95_turnaround_s: float
    trace_digest: str
    config_digest: str = ""


def summarize(
    result: RunResult,
    trace: Sequence[TraceRecord],
    policy: str = "",
    seed: int = 0,
    level: int = 0,
    config_digest: str = "",
) -> RunReport:
    """Reduce one finished run to its report row."""
    if result.completed != result.trace_size:
        unfinished = result.trace_size - result.completed
        raise MetricsError(f"run incomplete: {unfinished} tasks never completed")
    if not result.outcomes:
        return RunReport(
            policy=policy,
            seed=seed,
            level=level,
            makespan_s=0.0,
            deadline_miss_count=0,
            deadline_miss_rate=0.0,
            total_start_overhead_s=0.0,
            total_init_overhead_s=0.0,
            mean_turnaround_s=0.0,
            p95_turnaround_s=0.0,
            trace_digest=trace_digest(trace),
            config_digest=config_digest,
        )
    first_arrival = min(r.arrival_time_s for r in trace)
    last_completion = max(o.completion_time_s for o in result.outcomes)
    misses = sum(1 for o in result.outcomes if not o.met_deadline)
    turnarounds = sorted(o.completion_time_s - o.task.arrival_time for o in result.outcomes)
    p95_idx = max(0, math.ceil(0.95 * len(turnarounds)) - 1)
    return RunReport(
        policy=policy,
        seed=seed,
        level=level,
        makespan_s=last_completion - first_arrival,
        deadline_miss_count=misses,
        deadline_miss_rate=misses / len(result.outcomes),
        total_start_overhead_s=result.total_start_overhead_s,
        total_init_overhead_s=result.total_init_overhead_s,
        mean_turnaround_s=statistics.fmean(turnarounds),
        p95_turnaround_s=turnarounds[p95_idx],
        trace_digest=trace_digest(trace),
        config_digest=config_digest,
    )


@dataclass(frozen=True)
class ComparisonRow:
    policy: str
    level: int
    n_seeds: int
    makespan_mean_s: float
    ci95_half_width_s: float  # nan when undefined (single seed)


def compare(reports: Sequence[RunReport]) -> List[ComparisonRow]:
    """Aggregate per-(policy, level) makespan means with Student-t 95% CIs.

    All reports at a given level must share the same trace digest per seed,
    so every policy was measured on identical input.
    """
    by_key: Dict[tuple, List[RunReport]] = {}
    digests: Dict[tuple, str] = {}
    for rep in reports:
        by_key.setdefault((rep.policy, rep.level), []).append(rep)
        key = (rep.level, rep.seed)
        if key in digests and digests[key] != rep.trace_digest:
            raise MetricsError(
                f"mismatched trace digests at level={rep.level} seed={rep.seed}"
            )
        digests[key] = rep.trace_digest

    rows = []
    for (policy, level) in sorted(by_key):
        group = by_key[(policy, level)]
        makespans = [r.makespan_s for r in group]
        mean = statistics.fmean(makespans)
        n = len(makespans)
        if n < 2:
            half = float("nan")
        else:
            sd = statistics.stdev(makespans)
            tval = float(scipy_stats.t.ppf(0.975, n - 1))
            half = tval * sd / math.sqrt(n)
        rows.append(ComparisonRow(policy, level, n, mean, half))
    return rows


def write_report_csv(reports: Sequence[RunReport], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for rep in sorted(reports, key=lambda r: (r.policy, r.level, r.seed)):
            writer.writerow(
                [
                    rep.policy,
                    rep.level,
                    rep.seed,
                    repr(rep.makespan_s),
                    repr(rep.deadline_miss_rate),
                    repr(rep.total_start_overhead_s),
                    repr(rep.total_init_overhead_s),
                ]
            )


def write_comparison_csv(rows: Sequence[ComparisonRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["policy", "level", "n_seeds", "makespan_mean_s", "ci95_half_width_s"])
        for row in rows:
            half = "n/a" if math.isnan(row.ci95_half_width_s) else repr(row.ci95_half_width_s)
            writer.writerow([row.policy, row.level, row.n_seeds, repr(row.makespan_mean_s), half])

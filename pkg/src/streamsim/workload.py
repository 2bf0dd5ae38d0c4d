"""Synthetic workload traces: batched segment arrivals with lull/peak rate toggling."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import List, Sequence

from .domain import Priority, StreamRequest, derive_deadline, task_priority

DEFAULT_STREAM_SEGMENT_RANGE = (5, 110)


class ConfigError(Exception):
    pass


class TraceFormatError(Exception):
    """Raised when a trace file fails to parse or violates ordering invariants."""


@dataclass
class WorkloadConfig:
    total_tasks: int = 400
    experiment_window_s: float = 120.0
    batch_size_range: tuple = (5, 20)
    intra_batch_interarrival_s: float = 2.0
    base_peak_rate_ratio: float = 2.0
    base_period_multiple: float = 3.0
    peak_period_s: float = 30.0
    function_popularity: Sequence[float] = ()
    function_ids: Sequence[str] = ()
    hot_fraction: float = 0.05
    hot_mass: float = 0.8
    startup_allowance_s: float = 5.0
    high_priority_prefix: int = 3
    segment_duration_s: float = 2.0
    rng_seed: int = 1

    def __post_init__(self):
        lo, hi = self.batch_size_range
        if not (1 <= lo <= hi <= self.total_tasks):
            raise ConfigError(
                f"batch_size_range {self.batch_size_range} must lie within [1, {self.total_tasks}]"
            )
        if self.experiment_window_s <= 0 or self.peak_period_s <= 0:
            raise ConfigError("window and period lengths must be positive")
        if self.base_peak_rate_ratio <= 0 or self.base_period_multiple <= 0:
            raise ConfigError("rate and period ratios must be positive")
        if self.function_popularity:
            if abs(sum(self.function_popularity) - 1.0) > 1e-9:
                raise ConfigError("function_popularity weights must sum to 1")
            if len(self.function_popularity) != len(self.function_ids):
                raise ConfigError("function_popularity/function_ids length mismatch")
        if not self.function_ids:
            raise ConfigError("function_ids must be non-empty")

    def weights(self) -> List[float]:
        if self.function_popularity:
            return list(self.function_popularity)
        return popularity_weights(len(self.function_ids), self.hot_fraction, self.hot_mass)


@dataclass(frozen=True)
class TraceRecord:
    arrival_time_s: float
    stream_id: str
    segment_index: int
    function_id: str
    deadline_s: float
    priority: Priority

    def to_json(self) -> str:
        return json.dumps(
            {
                "arrival_time_s": self.arrival_time_s,
                "stream_id": self.stream_id,
                "segment_index": self.segment_index,
                "function_id": self.function_id,
                "deadline_s": self.deadline_s,
                "priority": self.priority.name.lower(),
            },
            sort_keys=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "TraceRecord":
        obj = json.loads(line)
        return cls(
            arrival_time_s=float(obj["arrival_time_s"]),
            stream_id=str(obj["stream_id"]),
            segment_index=int(obj["segment_index"]),
            function_id=str(obj["function_id"]),
            deadline_s=float(obj["deadline_s"]),
            priority=Priority[str(obj["priority"]).upper()],
        )


def popularity_weights(function_count: int, hot_fraction: float, hot_mass: float) -> List[float]:
    """Long-tail access weights: a few hot functions share most of the mass."""
    if not 0 < hot_fraction < 1 or not 0 < hot_mass < 1:
        raise ConfigError("hot_fraction and hot_mass must lie in (0, 1)")
    hot_count = math.ceil(hot_fraction * function_count)
    cold_count = function_count - hot_count
    if cold_count == 0:
        return [1.0 / function_count] * function_count
    hot_w = hot_mass / hot_count
    cold_w = (1.0 - hot_mass) / cold_count
    return [hot_w] * hot_count + [cold_w] * cold_count


def _phase_at(t: float, cfg: WorkloadConfig):
    """Return (is_peak, time remaining in current phase) for the toggling schedule.

    Each cycle starts with a lull of base_period_multiple x peak_period_s,
    followed by one peak period.
    """
    lull = cfg.base_period_multiple * cfg.peak_period_s
    cycle = lull + cfg.peak_period_s
    pos = t % cycle
    if pos < lull:
        return False, lull - pos
    return True, cycle - pos


def phase_of(t: float, cfg: WorkloadConfig) -> str:
    return "peak" if _phase_at(t, cfg)[0] else "lull"


def _batch_start_times(cfg: WorkloadConfig, rng: random.Random, needed_batches: int) -> List[float]:
    """Poisson batch starts whose rate doubles during peak phases.

    The base rate is solved so the expected task count over the experiment
    window matches total_tasks; generation continues past the window if the
    draw runs short of the requested batch count.
    """
    mean_batch = (cfg.batch_size_range[0] + cfg.batch_size_range[1]) / 2.0
    ratio = cfg.base_peak_rate_ratio
    m = cfg.base_period_multiple
    # Time-average rate over one cycle is (m + ratio) / (m + 1) times base.
    avg_factor = (m + ratio) / (m + 1.0)
    base_rate = cfg.total_tasks / (mean_batch * avg_factor * cfg.experiment_window_s)

    times = []
    t = 0.0
    # Thinning against the peak rate keeps the process exact across toggles.
    peak_rate = base_rate * ratio
    while len(times) < needed_batches:
        t += rng.expovariate(peak_rate)
        is_peak, _ = _phase_at(t, cfg)
        rate = peak_rate if is_peak else base_rate
        if rng.random() < rate / peak_rate:
            times.append(t)
    return times


def generate_trace(config: WorkloadConfig) -> List[TraceRecord]:
    """Deterministically generate a sorted trace matching the configured shape."""
    rng = random.Random(config.rng_seed)
    weights = config.weights()
    lo, hi = config.batch_size_range

    # Upper bound on batches; starts are drawn lazily below as needed.
    max_batches = math.ceil(config.total_tasks / lo) + 1
    starts = _batch_start_times(config, rng, max_batches)

    records = []
    remaining = config.total_tasks
    seq = 0
    for start in starts:
        if remaining <= 0:
            break
        size = min(rng.randint(lo, hi), remaining)
        function_id = rng.choices(config.function_ids, weights=weights)[0]
        seq += 1
        stream_id = f"s{seq:05d}"
        seg_lo, seg_hi = DEFAULT_STREAM_SEGMENT_RANGE
        stream_len = rng.randint(max(seg_lo, size), seg_hi)
        offset = rng.randint(0, stream_len - size)
        request = StreamRequest(
            stream_id=stream_id,
            request_time=start,
            segment_count=stream_len,
            function_id=function_id,
            segment_duration=config.segment_duration_s,
        )
        for r in range(size):
            y = offset + r
            arrival = start + r * config.intra_batch_interarrival_s
            deadline = derive_deadline(request, y, config.startup_allowance_s)
            deadline = max(deadline, arrival)
            records.append(
                TraceRecord(
                    arrival_time_s=arrival,
                    stream_id=stream_id,
                    segment_index=y,
                    function_id=function_id,
                    deadline_s=deadline,
                    priority=task_priority(y, False, config.high_priority_prefix),
                )
            )
        remaining -= size

    records.sort(key=lambda r: (r.arrival_time_s, r.stream_id, r.segment_index))
    return records


def save_trace(records: Sequence[TraceRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")


def load_trace(path) -> List[TraceRecord]:
    """Read a JSON Lines trace, rejecting unsorted or malformed input."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = TraceRecord.from_json(line)
            except (ValueError, KeyError) as exc:
                raise TraceFormatError(f"line {lineno}: {exc}") from exc
            if records and rec.arrival_time_s < records[-1].arrival_time_s:
                raise TraceFormatError(
                    f"line {lineno}: arrival_time_s decreases "
                    f"({rec.arrival_time_s} after {records[-1].arrival_time_s})"
                )
            records.append(rec)
    return records

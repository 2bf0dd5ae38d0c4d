"""Execution-time estimation matrix, in profile and learning modes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

DEFAULT_UNIT_CLASS = "container"


class EstimatorError(Exception):
    pass


@dataclass
class _Entry:
    mean_s: float
    sample_count: float  # math.inf marks an immutable profile entry


@dataclass
class TimeEstimator:
    """Matrix of expected execution time per (function, execution-unit class).

    Profile mode serves a fixed preconfigured matrix. Learning mode keeps a
    running mean of observed execution times, falling back to an optimistic
    per-function default before the first observation.
    """

    profile_mode: bool = True
    defaults: dict = field(default_factory=dict)  # function_id -> cold default
    _entries: dict = field(default_factory=dict)

    @classmethod
    def from_profile(cls, matrix: dict) -> "TimeEstimator":
        """matrix: {(function_id, unit_class): seconds} or {function_id: seconds}."""
        est = cls(profile_mode=True)
        for key, value in matrix.items():
            if not isinstance(key, tuple):
                key = (key, DEFAULT_UNIT_CLASS)
            if value <= 0:
                raise EstimatorError(f"profile estimate for {key} must be positive")
            est._entries[key] = _Entry(mean_s=float(value), sample_count=math.inf)
        return est

    @classmethod
    def learning(cls, defaults: dict) -> "TimeEstimator":
        return cls(profile_mode=False, defaults=dict(defaults))

    def estimate(self, function_id, unit_class=DEFAULT_UNIT_CLASS) -> float:
        entry = self._entries.get((function_id, unit_class))
        if self.profile_mode:
            if entry is None:
                raise EstimatorError(f"no profile entry for ({function_id}, {unit_class})")
            return entry.mean_s
        if entry is None or entry.sample_count == 0:
            try:
                return self.defaults[function_id]
            except KeyError:
                raise EstimatorError(f"no default estimate for {function_id}") from None
        return entry.mean_s

    def observe(self, function_id, unit_class, measured_s: float) -> None:
        if measured_s <= 0:
            raise EstimatorError(f"measurement must be positive, got {measured_s}")
        if self.profile_mode:
            return  # profile entries are immutable
        entry = self._entries.get((function_id, unit_class))
        if entry is None:
            self._entries[(function_id, unit_class)] = _Entry(mean_s=measured_s, sample_count=1)
            return
        entry.sample_count += 1
        entry.mean_s += (measured_s - entry.mean_s) / entry.sample_count

    def snapshot(self) -> dict:
        return {
            key: (entry.mean_s, entry.sample_count)
            for key, entry in self._entries.items()
        }

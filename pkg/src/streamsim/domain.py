"""Core data model: streams, tasks, functions, containers, and provisioning plans."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional


class Priority(enum.IntEnum):
    """Task priority; lower value sorts first (more urgent)."""

    URGENT = 0
    HIGH = 1
    NORMAL = 2


class TaskState(enum.Enum):
    UNMAPPED = "unmapped"
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"


# Legal forward transitions; no skips, no reversals.
_NEXT_STATE = {
    TaskState.UNMAPPED: TaskState.PENDING,
    TaskState.PENDING: TaskState.RUNNING,
    TaskState.RUNNING: TaskState.COMPLETED,
}


class SizeClass(enum.Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


class ContainerMode(enum.Enum):
    DURABLE = "durable"
    EPHEMERAL = "ephemeral"


class InvalidTransition(Exception):
    """Raised on a task lifecycle transition that is not the next linear state."""


@dataclass
class StreamRequest:
    """One end-user streaming request: a run of consecutive segments of a stream."""

    stream_id: str
    request_time: float
    segment_count: int
    function_id: str
    segment_duration: float = 2.0

    def __post_init__(self):
        if self.segment_count < 1:
            raise ValueError(f"segment_count must be >= 1, got {self.segment_count}")
        if self.segment_duration <= 0:
            raise ValueError("segment_duration must be positive")


@dataclass
class Task:
    """A (segment, function) pair moving through the four-state lifecycle."""

    stream_id: str
    segment_index: int
    function_id: str
    arrival_time: float
    deadline: float
    priority: Priority = Priority.NORMAL
    state: TaskState = TaskState.UNMAPPED
    completion_time: Optional[float] = None
    missed: bool = False

    def __post_init__(self):
        if self.deadline < self.arrival_time:
            raise ValueError(
                f"deadline {self.deadline} precedes arrival {self.arrival_time}"
            )

    @property
    def key(self):
        return (self.stream_id, self.segment_index, self.function_id)

    def advance(self, new_state: TaskState, now: Optional[float] = None):
        if _NEXT_STATE.get(self.state) is not new_state:
            raise InvalidTransition(f"{self.state.value} -> {new_state.value}")
        self.state = new_state
        if new_state is TaskState.COMPLETED:
            if now is None:
                raise ValueError("completion requires a timestamp")
            self.completion_time = now
            self.missed = now > self.deadline


@dataclass(frozen=True)
class FunctionSpec:
    """Service-repository entry: memory footprint and timing profile."""

    function_id: str
    memory_mb: float
    exec_time_s: float
    start_time_s: float
    init_time_s: float
    transfer_time_s: float
    size_class: SizeClass

    def __post_init__(self):
        if self.memory_mb <= 0:
            raise ValueError("memory_mb must be positive")
        for name in ("exec_time_s", "start_time_s", "init_time_s", "transfer_time_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class ContainerInstance:
    """A concrete container f_ij with its per-window monitoring counters."""

    function_id: str
    instance_index: int
    mode: ContainerMode
    created_at: float
    busy_time_window: float = 0.0
    trigger_count_window: int = 0
    local_queue: list = field(default_factory=list)


@dataclass(frozen=True)
class InstanceUsage:
    """Per-instance utilization and trigger count over one monitoring window."""

    function_id: str
    instance_index: int
    utilization: float
    trigger_count: int

    def __post_init__(self):
        if not 0.0 <= self.utilization <= 1.0:
            raise ValueError(f"utilization out of [0,1]: {self.utilization}")
        if self.trigger_count < 0:
            raise ValueError("trigger_count must be >= 0")


@dataclass(frozen=True)
class MonitorSnapshot:
    """Monitoring-window readout fed to the provisioning policy.

    ``usage`` covers the just-closed window; ``max_concurrency`` is the
    per-function maximum coexisting instance count over the last alpha windows.
    """

    window_id: int
    window_length_s: float
    usage: tuple
    max_concurrency: dict

    def usage_for(self, function_id):
        return [u for u in self.usage if u.function_id == function_id]


@dataclass
class ProvisioningPlan:
    """Durable-instance count per function plus memory bookkeeping."""

    allocations: dict
    allocated_memory_mb: float = 0.0
    reserved_memory_mb: float = 0.0
    produced_at_window: int = 0

    def count(self, function_id) -> int:
        return self.allocations.get(function_id, 0)


def derive_deadline(request: StreamRequest, segment_index: int, startup_allowance_s: float) -> float:
    """Absolute presentation-time deadline of one segment of a request."""
    if not 0 <= segment_index < request.segment_count:
        raise ValueError(
            f"segment_index {segment_index} out of range [0, {request.segment_count})"
        )
    return request.request_time + startup_allowance_s + segment_index * request.segment_duration


def task_priority(segment_index: int, urgent_flag: bool, high_priority_prefix: int) -> Priority:
    """Early segments get precedence; urgent resends trump everything."""
    if high_priority_prefix < 0:
        raise ValueError("high_priority_prefix must be >= 0")
    if urgent_flag:
        return Priority.URGENT
    if segment_index < high_priority_prefix:
        return Priority.HIGH
    return Priority.NORMAL

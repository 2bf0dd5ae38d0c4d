"""Shared task queue, admission, candidate selection, and the resend watchdog."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

from .domain import Priority, Task, TaskState, task_priority
from .workload import TraceRecord


class AdmissionError(Exception):
    pass


def order_key(task: Task):
    """Dequeue order: priority, then deadline, arrival, stream, segment."""
    return (
        task.priority.value,
        task.deadline,
        task.arrival_time,
        task.stream_id,
        task.segment_index,
    )


@dataclass
class SharedTaskQueue:
    """Holds only Unmapped tasks, dequeued in the documented total order."""

    _tasks: list = field(default_factory=list)

    def push(self, task: Task):
        if task.state is not TaskState.UNMAPPED:
            raise ValueError("only unmapped tasks may enter the shared queue")
        self._tasks.append(task)

    def remove(self, task: Task):
        self._tasks.remove(task)

    def ordered(self) -> List[Task]:
        return sorted(self._tasks, key=order_key)

    def __len__(self):
        return len(self._tasks)

    def __iter__(self):
        return iter(self._tasks)


@dataclass
class Admission:
    """Front gate of the task queue: builds prioritized tasks from trace records."""

    queue: SharedTaskQueue
    high_priority_prefix: int = 3
    _live: dict = field(default_factory=dict)

    def admit(self, record: TraceRecord, urgent: bool = False) -> Task:
        key = (record.stream_id, record.segment_index, record.function_id)
        if key in self._live:
            raise AdmissionError(f"duplicate live task {key}")
        priority = (
            Priority.URGENT
            if urgent
            else task_priority(record.segment_index, False, self.high_priority_prefix)
        )
        # Trace records may carry a precomputed priority; urgency and the
        # configured prefix still win at admission time.
        if not urgent and record.priority is Priority.URGENT:
            priority = Priority.URGENT
        task = Task(
            stream_id=record.stream_id,
            segment_index=record.segment_index,
            function_id=record.function_id,
            arrival_time=record.arrival_time_s,
            deadline=record.deadline_s,
            priority=priority,
        )
        self._live[key] = task
        self.queue.push(task)
        return task

    def retire(self, task: Task):
        self._live.pop(task.key, None)


@dataclass(frozen=True)
class CandidateUnit:
    """A potential assignment target for one task."""

    container: object  # None marks the ephemeral pool
    queue_length: int
    capability: Optional[str]  # function served, None = wildcard ephemeral slot
    estimated_completion_s: float


@dataclass(frozen=True)
class DurableView:
    """Engine-supplied view of one durable container for candidate scoring."""

    container: object
    function_id: str
    queue_length: int
    ready_time: float  # when a newly appended task would begin service
    fresh: bool  # first task still pays start + init


def schedule_round(
    queue: SharedTaskQueue,
    now: float,
    durable_views: Dict[str, Sequence[DurableView]],
    free_memory_mb: float,
    specs: dict,
    estimator,
    oversubscription_threshold: int = 5,
    ephemeral_slots: Optional[int] = None,
) -> List[tuple]:
    """Assign unmapped tasks to the cheapest candidate unit.

    Returns (task, CandidateUnit) pairs; assigned tasks move to Pending and
    leave the shared queue. Tasks with no viable candidate stay Unmapped.
    Within a round, a function that failed to map once cannot map later
    (its candidates only degrade), so its remaining tasks are skipped.
    """
    assignments = []
    blocked = set()
    extra_queued: Dict[int, int] = {}  # id(view) -> tasks assigned this round
    extra_ready: Dict[int, float] = {}

    for task in queue.ordered():
        fid = task.function_id
        if fid in blocked:
            continue
        spec = specs[fid]
        est_exec = estimator.estimate(fid)
        best = None

        for view in durable_views.get(fid, ()):
            qlen = view.queue_length + extra_queued.get(id(view), 0)
            if qlen >= oversubscription_threshold:
                continue
            ready = extra_ready.get(id(view), view.ready_time)
            overhead = (
                spec.start_time_s + spec.init_time_s
                if view.fresh and qlen == 0 and ready <= now
                else spec.transfer_time_s
            )
            est_done = max(ready, now) + overhead + est_exec
            cand = CandidateUnit(view.container, qlen, fid, est_done)
            if best is None or cand.estimated_completion_s < best.estimated_completion_s:
                best = cand

        if free_memory_mb >= spec.memory_mb and (
            ephemeral_slots is None or ephemeral_slots > 0
        ):
            eph = CandidateUnit(
                None, 0, None, now + spec.start_time_s + est_exec
            )
            if best is None or eph.estimated_completion_s < best.estimated_completion_s:
                best = eph

        if best is None:
            blocked.add(fid)
            continue

        task.advance(TaskState.PENDING)
        queue.remove(task)
        assignments.append((task, best))
        if best.capability is None:
            free_memory_mb -= spec.memory_mb
            if ephemeral_slots is not None:
                ephemeral_slots -= 1
        else:
            view = next(
                v for v in durable_views[fid] if v.container is best.container
            )
            extra_queued[id(view)] = extra_queued.get(id(view), 0) + 1
            extra_ready[id(view)] = best.estimated_completion_s

    return assignments


def watchdog_scan(now: float, tasks: Sequence[Task], resend_lead_s: float) -> List[Task]:
    """Promote still-unmapped tasks whose deadline is closer than the lead."""
    if resend_lead_s < 0:
        raise ValueError("resend_lead_s must be >= 0")
    promoted = []
    for task in tasks:
        if (
            task.state is TaskState.UNMAPPED
            and task.priority is not Priority.URGENT
            and task.deadline - now < resend_lead_s
        ):
            task.priority = Priority.URGENT
            promoted.append(task)
    return promoted

"""Deterministic discrete-event simulation of hosts, containers, and task execution."""

from __future__ import annotations

import enum
import heapq
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .domain import (
    ContainerMode,
    FunctionSpec,
    Priority,
    Task,
    TaskState,
)
from .estimator import TimeEstimator
from .provisioner import (
    PolicyKind,
    ProvisioningPlan,
    StaticPolicyConfig,
    policy_plan,
    snapshot_window,
)
from .scheduler import Admission, DurableView, SharedTaskQueue, schedule_round, watchdog_scan
from .workload import TraceRecord


class EngineError(Exception):
    """Internal invariant breach; always a bug, never a workload condition."""


@dataclass(frozen=True)
class HostConfig:
    total_memory_mb: float = 4096.0
    ephemeral_concurrency_cap: Optional[int] = None
    rng_seed: int = 0
    jitter_fraction: float = 0.0

    def __post_init__(self):
        if self.total_memory_mb <= 0:
            raise ValueError("total_memory_mb must be positive")
        if not 0 <= self.jitter_fraction < 1:
            raise ValueError("jitter_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class SimParams:
    oversubscription_threshold: int = 5
    provisioning_period_s: float = 30.0
    alpha: int = 3
    watchdog_period_s: float = 2.0
    resend_lead_s: float = 3.0
    high_priority_prefix: int = 3
    strict_paper_loop: bool = False


class EventKind(enum.Enum):
    ARRIVAL = "arrival"
    CONTAINER_STARTED = "container_started"
    CONTAINER_INITIALIZED = "container_initialized"
    TASK_COMPLETED = "task_completed"
    PROVISIONING_TICK = "provisioning_tick"
    WATCHDOG_TICK = "watchdog_tick"


@dataclass(frozen=True)
class SimEvent:
    time_s: float
    sequence_number: int
    kind: EventKind
    payload: object = None


@dataclass
class ExecutionOutcome:
    task: Task
    queue_wait_s: float
    start_overhead_s: float
    init_overhead_s: float
    transfer_s: float
    exec_s: float
    dispatch_time_s: float
    completion_time_s: float
    met_deadline: bool
    mode: ContainerMode


@dataclass
class _Container:
    function_id: str
    instance_index: int
    mode: ContainerMode
    created_at: float
    fresh: bool = True
    draining: bool = False
    local_queue: list = field(default_factory=list)  # (insertion_seq, task)
    current: Optional[Task] = None
    busy_until: float = 0.0
    busy_mark: float = 0.0
    _overheads: tuple = (0.0, 0.0, 0.0)  # start, init, transfer of current service
    _exec: float = 0.0
    _dispatch: float = 0.0

    @property
    def cid(self) -> str:
        return f"{self.function_id}#{self.instance_index}{'e' if self.mode is ContainerMode.EPHEMERAL else 'd'}"


def sample_exec_time(spec: FunctionSpec, jitter_fraction: float, rng: random.Random) -> float:
    """Uniform draw around the nominal execution time."""
    if not 0 <= jitter_fraction < 1:
        raise ValueError("jitter_fraction must lie in [0, 1)")
    if jitter_fraction == 0:
        return spec.exec_time_s
    lo = spec.exec_time_s * (1 - jitter_fraction)
    hi = spec.exec_time_s * (1 + jitter_fraction)
    return rng.uniform(lo, hi)


@dataclass
class RunResult:
    outcomes: List[ExecutionOutcome]
    event_log: List[dict]
    plan_log: List[dict]
    snapshots: list
    total_start_overhead_s: float
    total_init_overhead_s: float
    completed: int
    trace_size: int


class Simulation:
    """Single-threaded deterministic event loop over one host."""

    def __init__(
        self,
        trace: Sequence[TraceRecord],
        host: HostConfig,
        specs: Dict[str, FunctionSpec],
        policy: PolicyKind,
        estimator: TimeEstimator,
        params: SimParams = SimParams(),
        static_config: Optional[StaticPolicyConfig] = None,
    ):
        self.trace = list(trace)
        self.host = host
        self.specs = specs
        self.policy = policy
        self.estimator = estimator
        self.params = params
        self.static_config = static_config

        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self.queue = SharedTaskQueue()
        self.admission = Admission(self.queue, high_priority_prefix=params.high_priority_prefix)
        self.tasks: List[Task] = []
        self.outcomes: List[ExecutionOutcome] = []
        self.event_log: List[dict] = []
        self.plan_log: List[dict] = []
        self.snapshots: list = []

        self.durable: Dict[str, List[_Container]] = {fid: [] for fid in specs}
        self.ephemeral: List[_Container] = []
        self.used_memory = 0.0
        self._slots: Dict[str, dict] = {fid: {} for fid in specs}
        self._insert_seq = 0

        # Monitoring-window accumulators.
        self._window_id = 0
        self._window_start = 0.0
        self._busy: Dict[tuple, float] = {}
        self._triggers: Dict[tuple, int] = {}
        self._window_max_conc: Dict[str, int] = {fid: 0 for fid in specs}
        self._conc_history: Dict[str, List[int]] = {fid: [] for fid in specs}

        self.total_start_overhead = 0.0
        self.total_init_overhead = 0.0
        self._completed = 0
        self._plan_targets: Dict[str, int] = {fid: 0 for fid in specs}

    # -- event queue ----------------------------------------------------

    def _push(self, time_s: float, kind: EventKind, payload=None):
        if time_s < self.now - 1e-9:
            raise EngineError(f"event {kind} scheduled in the past: {time_s} < {self.now}")
        self._seq += 1
        heapq.heappush(self._heap, (time_s, self._seq, SimEvent(time_s, self._seq, kind, payload)))

    def _log(self, kind: EventKind, task: Optional[Task] = None, container: Optional[_Container] = None):
        self.event_log.append(
            {
                "time_s": round(self.now, 9),
                "kind": kind.value,
                "task": "%s/%d" % (task.stream_id, task.segment_index) if task else None,
                "container": container.cid if container else None,
            }
        )

    # -- container/slot management --------------------------------------

    def _acquire_slot(self, fid: str) -> int:
        slots = self._slots[fid]
        j = 1
        while j in slots:
            j += 1
        slots[j] = True
        occ = len(slots)
        if occ > self._window_max_conc[fid]:
            self._window_max_conc[fid] = occ
        return j

    def _release_slot(self, fid: str, j: int):
        del self._slots[fid][j]

    def free_memory(self) -> float:
        return self.host.total_memory_mb - self.used_memory

    def _spawn(self, fid: str, mode: ContainerMode) -> _Container:
        spec = self.specs[fid]
        if self.used_memory + spec.memory_mb > self.host.total_memory_mb + 1e-9:
            raise EngineError(f"memory overcommit spawning {fid}")
        j = self._acquire_slot(fid)
        container = _Container(fid, j, mode, created_at=self.now)
        self.used_memory += spec.memory_mb
        if mode is ContainerMode.DURABLE:
            self.durable[fid].append(container)
        else:
            self.ephemeral.append(container)
        return container

    def _destroy(self, container: _Container):
        spec = self.specs[container.function_id]
        self.used_memory -= spec.memory_mb
        self._release_slot(container.function_id, container.instance_index)
        if container.mode is ContainerMode.DURABLE:
            self.durable[container.function_id].remove(container)
        else:
            self.ephemeral.remove(container)

    # -- execution -------------------------------------------------------

    def _exec_time_for(self, task: Task) -> float:
        # Keyed off task identity so the same task draws the same execution
        # time under every policy, making policy comparisons paired.
        seed = f"{self.host.rng_seed}:{task.stream_id}:{task.segment_index}:{task.function_id}"
        rng = random.Random(seed)
        return sample_exec_time(self.specs[task.function_id], self.host.jitter_fraction, rng)

    def _begin_service(self, container: _Container):
        """Dequeue the next local task (urgent first, else FCFS) and run it."""
        if container.current is not None or not container.local_queue:
            return
        container.local_queue.sort(key=lambda item: (item[1].priority is not Priority.URGENT, item[0]))
        _, task = container.local_queue.pop(0)
        task.advance(TaskState.RUNNING)
        spec = self.specs[container.function_id]
        if container.mode is ContainerMode.EPHEMERAL:
            start_ov, init_ov, transfer = spec.start_time_s, 0.0, 0.0
        elif container.fresh:
            start_ov, init_ov, transfer = spec.start_time_s, spec.init_time_s, 0.0
            container.fresh = False
        else:
            start_ov, init_ov, transfer = 0.0, 0.0, spec.transfer_time_s
        exec_s = self._exec_time_for(task)
        done = self.now + start_ov + init_ov + transfer + exec_s

        container.current = task
        # Utilization counts only time spent executing tasks, so the busy
        # accrual marker starts where the overheads end.
        container.busy_mark = done - exec_s
        container.busy_until = done
        container._overheads = (start_ov, init_ov, transfer)
        container._exec = exec_s
        container._dispatch = self.now
        key = (container.function_id, container.instance_index)
        self._triggers[key] = self._triggers.get(key, 0) + 1

        if start_ov > 0:
            self._push(self.now + start_ov, EventKind.CONTAINER_STARTED, container)
        if init_ov > 0:
            self._push(self.now + start_ov + init_ov, EventKind.CONTAINER_INITIALIZED, container)
        self._push(done, EventKind.TASK_COMPLETED, container)

    def _assign(self, task: Task, container: _Container):
        self._insert_seq += 1
        container.local_queue.append((self._insert_seq, task))
        self._begin_service(container)

    def _complete(self, container: _Container):
        task = container.current
        if task is None:
            raise EngineError("completion event for idle container")
        start_ov, init_ov, transfer = container._overheads
        task.advance(TaskState.COMPLETED, now=self.now)
        self.admission.retire(task)
        self._completed += 1
        self.total_start_overhead += start_ov
        self.total_init_overhead += init_ov
        self.outcomes.append(
            ExecutionOutcome(
                task=task,
                queue_wait_s=container._dispatch - task.arrival_time,
                start_overhead_s=start_ov,
                init_overhead_s=init_ov,
                transfer_s=transfer,
                exec_s=container._exec,
                dispatch_time_s=container._dispatch,
                completion_time_s=self.now,
                met_deadline=not task.missed,
                mode=container.mode,
            )
        )
        self.estimator.observe(task.function_id, "container", container._exec)
        key = (container.function_id, container.instance_index)
        self._busy[key] = self._busy.get(key, 0.0) + max(0.0, self.now - container.busy_mark)
        container.current = None
        self._log(EventKind.TASK_COMPLETED, task, container)

        if container.mode is ContainerMode.EPHEMERAL:
            self._destroy(container)
        elif container.local_queue:
            self._begin_service(container)
        elif container.draining:
            self._destroy(container)

    # -- scheduling ------------------------------------------------------

    def _durable_views(self) -> Dict[str, List[DurableView]]:
        views: Dict[str, List[DurableView]] = {}
        for fid, containers in self.durable.items():
            spec = self.specs[fid]
            lst = []
            for c in containers:
                if c.draining:
                    continue
                if c.current is None:
                    ready = self.now
                else:
                    ready = c.busy_until
                    for _, queued in c.local_queue:
                        ready += spec.transfer_time_s + self.estimator.estimate(fid)
                lst.append(
                    DurableView(
                        container=c,
                        function_id=fid,
                        queue_length=len(c.local_queue),
                        ready_time=ready,
                        fresh=c.fresh,
                    )
                )
            if lst:
                views[fid] = lst
        return views

    def _schedule(self):
        cap = self.host.ephemeral_concurrency_cap
        slots = None if cap is None else max(0, cap - len(self.ephemeral))
        assignments = schedule_round(
            self.queue,
            self.now,
            self._durable_views(),
            self.free_memory(),
            self.specs,
            self.estimator,
            oversubscription_threshold=self.params.oversubscription_threshold,
            ephemeral_slots=slots,
        )
        for task, unit in assignments:
            if unit.capability is None:
                container = self._spawn(task.function_id, ContainerMode.EPHEMERAL)
                self._assign(task, container)
            else:
                self._assign(task, unit.container)

    # -- provisioning ----------------------------------------------------

    def _close_window(self):
        window_len = self.now - self._window_start
        if window_len <= 0:
            window_len = self.params.provisioning_period_s
        for containers in self.durable.values():
            for c in containers:
                self._accrue_running(c)
        for c in self.ephemeral:
            self._accrue_running(c)
        usage = [
            (fid, j, busy, self._triggers.get((fid, j), 0))
            for (fid, j), busy in sorted(self._busy.items())
        ]
        for (fid, j), trig in sorted(self._triggers.items()):
            if (fid, j) not in self._busy:
                usage.append((fid, j, 0.0, trig))
        for fid in self.specs:
            self._conc_history[fid].append(self._window_max_conc[fid])
            self._window_max_conc[fid] = len(self._slots[fid])
        self._window_id += 1
        snapshot = snapshot_window(
            self._window_id, window_len, usage, self._conc_history, self.params.alpha
        )
        self.snapshots.append(snapshot)
        self._busy = {}
        self._triggers = {}
        self._window_start = self.now
        return snapshot

    def _accrue_running(self, container: _Container):
        if container.current is not None:
            key = (container.function_id, container.instance_index)
            self._busy[key] = self._busy.get(key, 0.0) + max(0.0, self.now - container.busy_mark)
            container.busy_mark = max(container.busy_mark, self.now)

    def apply_plan(self, plan: ProvisioningPlan):
        """Adopt the plan's durable counts as targets and reconcile immediately."""
        if plan.allocated_memory_mb > self.host.total_memory_mb + 1e-9:
            raise EngineError("plan exceeds host memory")
        self._plan_targets = {fid: plan.count(fid) for fid in self.specs}
        self._reconcile()

    def _reconcile(self):
        """Drive the durable container set toward the plan targets.

        Launches blocked on memory are retried whenever memory frees up;
        surplus containers drain gracefully (finish their queues first).
        """
        for fid in sorted(self.specs):
            target = self._plan_targets.get(fid, 0)
            containers = self.durable[fid]
            active = [c for c in containers if not c.draining]
            if len(active) < target:
                # Reuse draining containers before launching cold ones.
                for c in containers:
                    if c.draining and len(active) < target:
                        c.draining = False
                        active.append(c)
                spec = self.specs[fid]
                while len(active) < target and self.free_memory() >= spec.memory_mb:
                    active.append(self._spawn(fid, ContainerMode.DURABLE))
            elif len(active) > target:
                surplus = len(active) - target
                idle_first = sorted(
                    active,
                    key=lambda c: (c.current is not None or bool(c.local_queue), -c.instance_index),
                )
                for c in idle_first[:surplus]:
                    c.draining = True
                    if c.current is None and not c.local_queue:
                        self._destroy(c)

    def _provision(self):
        snapshot = self._close_window()
        selections: list = []
        plan = policy_plan(
            self.policy,
            snapshot,
            self.specs,
            self.host.total_memory_mb,
            static_config=self.static_config,
            strict_paper_loop=self.params.strict_paper_loop,
            selection_log=selections,
        )
        self.apply_plan(plan)
        self.plan_log.append(
            {
                "window_id": snapshot.window_id,
                "allocations": {f: c for f, c in sorted(plan.allocations.items()) if c},
                "allocated_memory_mb": round(plan.allocated_memory_mb, 6),
                "reserved_memory_mb": round(plan.reserved_memory_mb, 6),
                "selections": [
                    {
                        "function_id": s.function_id,
                        "instance_index": s.instance_index,
                        "bcr": "inf" if s.bcr == float("inf") else round(s.bcr, 9),
                        "benefit": round(s.benefit, 9),
                        "cost": round(s.cost, 9),
                    }
                    for s in selections
                ],
            }
        )

    # -- main loop --------------------------------------------------------

    def _active(self) -> bool:
        return self._completed < len(self.trace)

    def run(self) -> RunResult:
        for rec in self.trace:
            self._push(rec.arrival_time_s, EventKind.ARRIVAL, rec)
        if self.trace:
            if self.policy is PolicyKind.STATIC_DURABLE:
                # Warm start from the beginning.
                plan = policy_plan(
                    self.policy,
                    snapshot_window(0, self.params.provisioning_period_s, [], self._conc_history, self.params.alpha),
                    self.specs,
                    self.host.total_memory_mb,
                    static_config=self.static_config,
                )
                self.apply_plan(plan)
            self._push(self.params.provisioning_period_s, EventKind.PROVISIONING_TICK)
            self._push(self.params.watchdog_period_s, EventKind.WATCHDOG_TICK)

        while self._heap:
            _, _, event = heapq.heappop(self._heap)
            if event.time_s < self.now - 1e-9:
                raise EngineError("event-time regression")
            self.now = event.time_s

            if event.kind is EventKind.ARRIVAL:
                task = self.admission.admit(event.payload)
                self.tasks.append(task)
                self._log(EventKind.ARRIVAL, task)
                self._schedule()
            elif event.kind is EventKind.TASK_COMPLETED:
                self._complete(event.payload)
                self._reconcile()
                self._schedule()
            elif event.kind is EventKind.PROVISIONING_TICK:
                if self._active():
                    self._provision()
                    self._schedule()
                    self._push(self.now + self.params.provisioning_period_s, EventKind.PROVISIONING_TICK)
            elif event.kind is EventKind.WATCHDOG_TICK:
                if self._active():
                    promoted = watchdog_scan(self.now, list(self.queue), self.params.resend_lead_s)
                    if promoted:
                        self._schedule()
                    self._push(self.now + self.params.watchdog_period_s, EventKind.WATCHDOG_TICK)
            else:
                self._log(event.kind, container=event.payload)

        if self._completed != len(self.trace):
            raise EngineError(
                f"quiescence with {len(self.trace) - self._completed} unfinished tasks"
            )
        return RunResult(
            outcomes=self.outcomes,
            event_log=self.event_log,
            plan_log=self.plan_log,
            snapshots=self.snapshots,
            total_start_overhead_s=self.total_start_overhead,
            total_init_overhead_s=self.total_init_overhead,
            completed=self._completed,
            trace_size=len(self.trace),
        )


def run(
    trace: Sequence[TraceRecord],
    host: HostConfig,
    specs: Dict[str, FunctionSpec],
    policy: PolicyKind,
    estimator: TimeEstimator,
    params: SimParams = SimParams(),
    static_config: Optional[StaticPolicyConfig] = None,
) -> RunResult:
    sim = Simulation(trace, host, specs, policy, estimator, params, static_config)
    return sim.run()

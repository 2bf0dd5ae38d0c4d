import pytest

from streamsim.domain import Priority, Task, TaskState
from streamsim.estimator import TimeEstimator
from streamsim.scheduler import (
    Admission,
    AdmissionError,
    DurableView,
    SharedTaskQueue,
    order_key,
    schedule_round,
    watchdog_scan,
)
from streamsim.workload import TraceRecord
from tests.conftest import make_spec


def make_task(stream="s1", seg=0, fid="f01", arrival=0.0, deadline=100.0, prio=Priority.NORMAL):
    return Task(
        stream_id=stream,
        segment_index=seg,
        function_id=fid,
        arrival_time=arrival,
        deadline=deadline,
        priority=prio,
    )


class TestOrdering:
    def test_priority_dominates_deadline(self):
        urgent_late = make_task(deadline=500.0, prio=Priority.URGENT)
        normal_soon = make_task(stream="s2", deadline=1.0)
        assert order_key(urgent_late) < order_key(normal_soon)

    def test_deadline_then_arrival_then_identity(self):
        a = make_task(stream="s1", deadline=10.0, arrival=1.0)
        b = make_task(stream="s1", seg=1, deadline=10.0, arrival=2.0)
        c = make_task(stream="s2", deadline=12.0, arrival=0.0)
        queue = SharedTaskQueue()
        for t in (c, b, a):
            queue.push(t)
        assert queue.ordered() == [a, b, c]

    def test_only_unmapped_tasks_enter(self):
        queue = SharedTaskQueue()
        task = make_task()
        task.advance(TaskState.PENDING)
        with pytest.raises(ValueError):
            queue.push(task)


class TestAdmission:
    def record(self, stream="s1", seg=5, prio=Priority.NORMAL):
        return TraceRecord(1.0, stream, seg, "f01", 50.0, prio)

    def test_admit_builds_prioritized_task(self):
        adm = Admission(SharedTaskQueue(), high_priority_prefix=3)
        task = adm.admit(self.record(seg=1))
        assert task.priority is Priority.HIGH
        assert task.state is TaskState.UNMAPPED
        assert len(adm.queue) == 1

    def test_duplicate_live_task_rejected_until_retired(self):
        adm = Admission(SharedTaskQueue())
        task = adm.admit(self.record())
        with pytest.raises(AdmissionError):
            adm.admit(self.record())
        adm.retire(task)
        adm.queue.remove(task)
        adm.admit(self.record())  # re-admission after retirement is fine

    def test_urgent_flag_and_record_urgency_win(self):
        adm = Admission(SharedTaskQueue())
        assert adm.admit(self.record(stream="a"), urgent=True).priority is Priority.URGENT
        assert (
            adm.admit(self.record(stream="b", prio=Priority.URGENT)).priority
            is Priority.URGENT
        )


class TestScheduleRound:
    def setup_method(self):
        self.spec = make_spec(fid="f01", memory_mb=256.0, exec_time_s=4.0)
        self.specs = {"f01": self.spec}
        self.estimator = TimeEstimator.from_profile({"f01": 4.0})

    def test_ephemeral_chosen_when_memory_free_and_faster(self):
        queue = SharedTaskQueue()
        task = make_task()
        queue.push(task)
        # A fresh durable container pays start+init; ephemeral pays start only.
        views = {"f01": [DurableView(object(), "f01", 0, 0.0, True)]}
        assignments = schedule_round(queue, 0.0, views, 1024.0, self.specs, self.estimator)
        assert len(assignments) == 1
        assert assignments[0][1].capability is None
        assert task.state is TaskState.PENDING
        assert len(queue) == 0

    def test_durable_chosen_when_memory_exhausted(self):
        queue = SharedTaskQueue()
        queue.push(make_task())
        container = object()
        views = {"f01": [DurableView(container, "f01", 0, 0.0, False)]}
        assignments = schedule_round(queue, 0.0, views, 0.0, self.specs, self.estimator)
        assert assignments[0][1].container is container

    def test_warm_durable_beats_ephemeral(self):
        queue = SharedTaskQueue()
        queue.push(make_task())
        # Warm and idle: transfer (0.02 s) beats a fresh start (1.0 s).
        views = {"f01": [DurableView(object(), "f01", 0, 0.0, False)]}
        assignments = schedule_round(queue, 0.0, views, 1024.0, self.specs, self.estimator)
        assert assignments[0][1].capability == "f01"

    def test_oversubscription_threshold_blocks_long_queues(self):
        queue = SharedTaskQueue()
        queue.push(make_task())
        views = {"f01": [DurableView(object(), "f01", 5, 0.0, False)]}
        assignments = schedule_round(
            queue, 0.0, views, 0.0, self.specs, self.estimator, oversubscription_threshold=5
        )
        assert assignments == []
        assert len(queue) == 1

    def test_round_spreads_load_and_tracks_virtual_queue(self):
        queue = SharedTaskQueue()
        tasks = [make_task(stream=f"s{i}", deadline=50.0 + i) for i in range(6)]
        for t in tasks:
            queue.push(t)
        views = {"f01": [DurableView(object(), "f01", 0, 0.0, False)]}
        assignments = schedule_round(
            queue, 0.0, views, 0.0, self.specs, self.estimator, oversubscription_threshold=5
        )
        # The single durable unit absorbs up to the threshold; the rest wait.
        assert len(assignments) == 5
        assert len(queue) == 1

    def test_blocked_function_skips_later_tasks(self):
        other = make_spec(fid="f02", memory_mb=128.0)
        specs = {"f01": self.spec, "f02": other}
        est = TimeEstimator.from_profile({"f01": 4.0, "f02": 4.0})
        queue = SharedTaskQueue()
        first = make_task(stream="a", fid="f01", deadline=10.0)
        second = make_task(stream="b", fid="f02", deadline=20.0)
        third = make_task(stream="c", fid="f01", deadline=30.0)
        for t in (first, second, third):
            queue.push(t)
        # 130 MB free: f01 (256 MB) cannot map, f02 (128 MB) can.
        assignments = schedule_round(queue, 0.0, {}, 130.0, specs, est)
        assert [t.function_id for t, _ in assignments] == ["f02"]
        assert first.state is TaskState.UNMAPPED
        assert third.state is TaskState.UNMAPPED

    def test_ephemeral_slot_cap_respected(self):
        queue = SharedTaskQueue()
        for i in range(3):
            queue.push(make_task(stream=f"s{i}"))
        assignments = schedule_round(
            queue, 0.0, {}, 4096.0, self.specs, self.estimator, ephemeral_slots=2
        )
        assert len(assignments) == 2


class TestWatchdog:
    def test_promotes_only_unmapped_near_deadline(self):
        near = make_task(stream="a", deadline=4.0)
        far = make_task(stream="b", deadline=50.0)
        pending = make_task(stream="c", deadline=4.0)
        pending.advance(TaskState.PENDING)
        promoted = watchdog_scan(2.0, [near, far, pending], resend_lead_s=3.0)
        assert promoted == [near]
        assert near.priority is Priority.URGENT
        assert far.priority is Priority.NORMAL

    def test_promotion_is_idempotent(self):
        near = make_task(deadline=4.0)
        watchdog_scan(2.0, [near], 3.0)
        assert watchdog_scan(2.5, [near], 3.0) == []

    def test_negative_lead_rejected(self):
        with pytest.raises(ValueError):
            watchdog_scan(0.0, [], -1.0)

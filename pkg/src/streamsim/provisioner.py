"""Monitoring-window accounting and the benefit-per-cost greedy durable allocation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence

from .domain import FunctionSpec, InstanceUsage, MonitorSnapshot, ProvisioningPlan


class PlanError(Exception):
    pass


@dataclass(frozen=True)
class CandidateScore:
    """Scored durable-promotion candidate for container instance (function, j)."""

    function_id: str
    instance_index: int
    utilization: float
    trigger_count: int
    delta_s: float
    memory_mb: float
    reserved_mb: float
    benefit: float
    cost: float
    bcr: float


@dataclass(frozen=True)
class StaticPolicyConfig:
    counts: Dict[str, int]


class PolicyKind(enum.Enum):
    DYNAMIC_DURABLE = "dynamic"
    STATIC_DURABLE = "static"
    EPHEMERAL_ONLY = "ephemeral"


def compute_delta(spec: FunctionSpec) -> float:
    """Per-task turnaround saving of a warm durable run over an ephemeral one."""
    return max(0.0, spec.start_time_s - spec.transfer_time_s)


def snapshot_window(
    window_id: int,
    window_length_s: float,
    usage: Sequence[tuple],
    concurrency_history: Dict[str, Sequence[int]],
    alpha: int,
) -> MonitorSnapshot:
    """Close a monitoring window.

    usage: (function_id, instance_index, busy_seconds, trigger_count) per
    instance slot active during the window. concurrency_history holds the
    per-window max coexisting instance counts, most recent last.
    """
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    if window_length_s <= 0:
        raise ValueError("window length must be positive")
    records = tuple(
        InstanceUsage(
            function_id=fid,
            instance_index=j,
            utilization=min(1.0, max(0.0, busy / window_length_s)),
            trigger_count=triggers,
        )
        for fid, j, busy, triggers in usage
    )
    max_conc = {
        fid: max(history[-alpha:], default=0)
        for fid, history in concurrency_history.items()
    }
    return MonitorSnapshot(
        window_id=window_id,
        window_length_s=window_length_s,
        usage=records,
        max_concurrency=max_conc,
    )


def score_candidates(
    snapshot: MonitorSnapshot, specs: Dict[str, FunctionSpec]
) -> List[CandidateScore]:
    """One candidate per (function, j) up to the function's max concurrency degree."""
    usage_map = {(u.function_id, u.instance_index): u for u in snapshot.usage}
    scores = []
    for fid in sorted(snapshot.max_concurrency):
        degree = snapshot.max_concurrency[fid]
        spec = specs[fid]
        delta = compute_delta(spec)
        for j in range(1, degree + 1):
            rec = usage_map.get((fid, j))
            util = rec.utilization if rec else 0.0
            triggers = rec.trigger_count if rec else 0
            benefit = triggers * delta
            reserved = spec.memory_mb * util
            cost = spec.memory_mb - reserved
            if benefit == 0.0:
                bcr = 0.0
            elif cost == 0.0:
                bcr = math.inf
            else:
                bcr = benefit / cost
            scores.append(
                CandidateScore(
                    function_id=fid,
                    instance_index=j,
                    utilization=util,
                    trigger_count=triggers,
                    delta_s=delta,
                    memory_mb=spec.memory_mb,
                    reserved_mb=reserved,
                    benefit=benefit,
                    cost=cost,
                    bcr=bcr,
                )
            )
    return scores


def _selection_key(score: CandidateScore):
    # Highest BCR first; among infinite-BCR peers, highest benefit; then
    # lowest function_id / instance_index for a total deterministic order.
    return (-score.bcr, -score.benefit, score.function_id, score.instance_index)


def allocate(
    scores: Sequence[CandidateScore],
    total_memory_mb: float,
    produced_at_window: int = 0,
    strict_paper_loop: bool = False,
    selection_log: list = None,
) -> ProvisioningPlan:
    """Greedy durable allocation by descending benefit-per-cost ratio.

    Unless strict_paper_loop is set, a candidate whose footprint exceeds the
    remaining headroom (after reclaiming its own ephemeral reservation) is
    skipped so that allocated + reserved memory never exceeds the total.
    """
    if total_memory_mb <= 0:
        raise PlanError("total memory must be positive")
    allocations = {s.function_id: 0 for s in scores}
    m_alloc = 0.0
    m_reserved = sum(s.reserved_mb for s in scores)
    remaining = sorted(scores, key=_selection_key)

    while remaining and total_memory_mb - m_reserved - m_alloc > 0 and remaining[0].bcr > 0:
        chosen = None
        for idx, cand in enumerate(remaining):
            if cand.bcr <= 0:
                break
            headroom_after = total_memory_mb - (m_reserved - cand.reserved_mb) - (
                m_alloc + cand.memory_mb
            )
            if strict_paper_loop or headroom_after >= 0:
                chosen = idx
                break
        if chosen is None:
            break
        cand = remaining.pop(chosen)
        allocations[cand.function_id] += 1
        m_alloc += cand.memory_mb
        m_reserved -= cand.reserved_mb
        if selection_log is not None:
            selection_log.append(cand)

    return ProvisioningPlan(
        allocations=allocations,
        allocated_memory_mb=m_alloc,
        reserved_memory_mb=m_reserved,
        produced_at_window=produced_at_window,
    )


def policy_plan(
    kind: PolicyKind,
    snapshot: MonitorSnapshot,
    specs: Dict[str, FunctionSpec],
    total_memory_mb: float,
    static_config: StaticPolicyConfig = None,
    strict_paper_loop: bool = False,
    selection_log: list = None,
) -> ProvisioningPlan:
    """Produce the durable plan for the next provisioning slot under a policy."""
    if kind is PolicyKind.EPHEMERAL_ONLY:
        return ProvisioningPlan(
            allocations={fid: 0 for fid in specs},
            reserved_memory_mb=0.0,
            produced_at_window=snapshot.window_id,
        )
    if kind is PolicyKind.STATIC_DURABLE:
        if static_config is None:
            raise PlanError("static policy requires configured per-function counts")
        m_alloc = sum(
            specs[fid].memory_mb * count for fid, count in static_config.counts.items()
        )
        if m_alloc > total_memory_mb:
            raise PlanError(
                f"static allocation {m_alloc} MB exceeds host memory {total_memory_mb} MB"
            )
        return ProvisioningPlan(
            allocations=dict(static_config.counts),
            allocated_memory_mb=m_alloc,
            produced_at_window=snapshot.window_id,
        )
    scores = score_candidates(snapshot, specs)
    return allocate(
        scores,
        total_memory_mb,
        produced_at_window=snapshot.window_id,
        strict_paper_loop=strict_paper_loop,
        selection_log=selection_log,
    )

"""Independent brute-force reference for the greedy durable allocation.

Deliberately naive: re-scans for the maximum-ratio candidate on every
iteration instead of presorting, so it shares no code path with the
optimized implementation it checks.
"""

import math


def _better(a, b):
    """True if candidate a precedes b under the documented tie-break."""
    if a.bcr != b.bcr:
        return a.bcr > b.bcr
    if a.benefit != b.benefit:
        return a.benefit > b.benefit
    if a.function_id != b.function_id:
        return a.function_id < b.function_id
    return a.instance_index < b.instance_index


def naive_allocate(scores, total_memory_mb, fit_check=True):
    """Returns (allocations dict, allocated_mb, reserved_mb)."""
    pool = list(scores)
    allocations = {s.function_id: 0 for s in scores}
    m_alloc = 0.0
    m_reserved = math.fsum(s.reserved_mb for s in scores)

    while True:
        if total_memory_mb - m_reserved - m_alloc <= 0:
            break
        if not any(s.bcr > 0 for s in pool):
            break
        candidates = [s for s in pool if s.bcr > 0]
        if fit_check:
            candidates = [
                s
                for s in candidates
                if s.memory_mb <= total_memory_mb - m_reserved - m_alloc + s.reserved_mb
            ]
        if not candidates:
            break
        best = candidates[0]
        for cand in candidates[1:]:
            if _better(cand, best):
                best = cand
        pool.remove(best)
        allocations[best.function_id] += 1
        m_alloc += best.memory_mb
        m_reserved -= best.reserved_mb

    return allocations, m_alloc, m_reserved

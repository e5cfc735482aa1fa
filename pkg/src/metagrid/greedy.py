"""Greedy whole-job scheduler used as the comparison baseline.

Jobs are taken most-urgent-first (``qos_index`` descending — high budget
per unit of deadline-time and PE demand goes first) and each is placed
whole on the cheapest-rate real resource that has enough free PEs and
meets the job's deadline and budget.  Jobs with no such resource are
parked on the dummy.
"""

from __future__ import annotations

from collections.abc import Sequence

from .model import (
    AllocationMatrix,
    DEFAULT_CONFIG,
    JobRequest,
    ResourceInfo,
    Schedule,
    SchedulerConfig,
    build_schedule,
    ensure_dummy,
    placement_feasible,
    qos_index,
)


def greedy_schedule(
    jobs: Sequence[JobRequest],
    resources: Sequence[ResourceInfo],
    config: SchedulerConfig = DEFAULT_CONFIG,
) -> Schedule:
    """Cheapest-feasible-resource-first assignment, one job at a time."""
    if not jobs:
        return Schedule.empty()
    pool, dummy_id = ensure_dummy(jobs, resources)
    res_by_id = {r.resource_id: r for r in pool}
    real = [r for r in pool if not r.is_dummy]
    available = {r.resource_id: r.free_pes for r in real}

    entries: dict[tuple[str, str], int] = {}
    order = sorted(jobs, key=lambda j: (-qos_index(j), j.job_id))
    for job in order:
        ranked = sorted(
            real,
            key=lambda r: (r.rate_for(job.job_id), r.resource_id),
        )
        placed = None
        for res in ranked:
            if available[res.resource_id] < job.pe_count:
                continue
            if not placement_feasible(job, res, config):
                continue
            placed = res.resource_id
            break
        if placed is None:
            entries[(dummy_id, job.job_id)] = job.pe_count
        else:
            available[placed] -= job.pe_count
            entries[(placed, job.job_id)] = job.pe_count

    return build_schedule(AllocationMatrix(entries), jobs, pool, config)

"""Periodic-scheduling simulator.

Jobs arrive over time; every ``interval_s`` the chosen scheduler is handed
the queue of released-but-unplaced jobs and a snapshot of currently free
PEs.  Each queued job is presented with its *remaining* deadline
(submission time plus deadline minus now), so waiting erodes slack and a
tight job can become unplaceable while it queues.  Placements run to
completion and release their PEs; jobs the scheduler parks stay queued;
jobs whose remaining deadline hits zero are recorded as missed.

Time is integer milliseconds throughout: boundaries fall at exact
multiples of the interval, execution times are truncated to whole
milliseconds, and all event ordering is deterministic — events at the same
timestamp sort by kind (complete, release, miss, schedule) and then job
id, which is the order this module emits them in.
"""

from __future__ import annotations

import heapq
import json
import logging
import time as _time
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, replace

from .ga import GaParams, hga, lpga
from .greedy import greedy_schedule
from .mmc import mappings_from_allocation, modified_min_cost
from .model import (
    AllocationMatrix,
    DEFAULT_CONFIG,
    JobRequest,
    ResourceInfo,
    Schedule,
    SchedulerConfig,
    build_schedule,
    ensure_dummy,
    exec_time,
)
from .relaxed import InfeasibleError, build_relaxed, solve_relaxed
from .workload import ScenarioConfig, generate_grid, generate_jobs

logger = logging.getLogger(__name__)

GA_PERIOD_SEED_STRIDE = 1_000_003


class UnknownSchedulerError(ValueError):
    """Raised when a scheduler name is not in the registry."""


@dataclass(frozen=True)
class SimEvent:
    time_ms: int
    kind: str  # "complete" | "release" | "miss" | "schedule"
    job_id: str
    resource_id: str | None = None
    detail: str = ""


@dataclass(frozen=True)
class ScenarioMetrics:
    scheduler: str
    jobs_submitted: int
    jobs_completed: int
    jobs_missed: int
    tasks_submitted: int
    tasks_completed: int
    tasks_missed: int
    total_cost_gd: float
    ga_iterations: int
    periods: int
    rollovers_per_period: tuple[int, ...]
    wall_time_s: float  # time spent inside the scheduler itself


def jsonl_sink(stream) -> Callable[[SimEvent], None]:
    """Event sink writing one JSON object per event line to ``stream``."""

    def sink(event: SimEvent) -> None:
        stream.write(json.dumps(asdict(event), sort_keys=True) + "\n")

    return sink


def _solve_with_fallback(
    jobs: Sequence[JobRequest],
    resources: Sequence[ResourceInfo],
    config: SchedulerConfig,
) -> tuple[AllocationMatrix, tuple[ResourceInfo, ...]]:
    """Exact split-allowed solve; on infeasibility retry with the dummy
    present so overflow jobs can park instead of failing the whole batch."""
    try:
        model = build_relaxed(jobs, resources, config)
        return solve_relaxed(model), model.resources
    except InfeasibleError:
        model = build_relaxed(jobs, resources, config, force_dummy=True)
        return solve_relaxed(model), model.resources


def _run_greedy(jobs, resources, config, params):
    return greedy_schedule(jobs, resources, config), 0


def _run_mmc(jobs, resources, config, params):
    alloc, pool = _solve_with_fallback(jobs, resources, config)
    pool, _ = ensure_dummy(jobs, pool)
    schedule = modified_min_cost(
        mappings_from_allocation(alloc), jobs, pool, config
    )
    return schedule, 0


def _run_relaxed_mgn(jobs, resources, config, params):
    alloc, pool = _solve_with_fallback(jobs, resources, config)
    return build_schedule(alloc, jobs, pool, config), 0


def _run_lpga(jobs, resources, config, params):
    schedule, result = lpga(jobs, resources, params, config)
    return schedule, result.iterations_used


def _run_hga(jobs, resources, config, params):
    schedule, result = hga(jobs, resources, params, config)
    return schedule, result.iterations_used


SCHEDULERS: dict[str, Callable] = {
    "greedy": _run_greedy,
    "mmc": _run_mmc,
    "relaxed-mgn": _run_relaxed_mgn,
    "lpga": _run_lpga,
    "hga": _run_hga,
}


def list_schedulers() -> list[str]:
    return sorted(SCHEDULERS)


def rollover(
    queue: Sequence[JobRequest], schedule: Schedule, now_s: float = 0.0
) -> list[JobRequest]:
    """Jobs from ``queue`` that must carry over to the next period: those
    the schedule parked on the dummy, or did not mention at all."""
    placed_ids = set(schedule.assignments.job_ids()) - set(schedule.dummy_jobs)
    carried = [j for j in queue if j.job_id not in placed_ids]
    if carried:
        logger.debug(
            "t=%.3fs: %d job(s) carried to the next period", now_s, len(carried)
        )
    return carried


def run_scenario(
    config: ScenarioConfig,
    scheduler: str,
    ga_params: GaParams | None = None,
    sched_config: SchedulerConfig = DEFAULT_CONFIG,
    event_sink: Callable[[SimEvent], None] | None = None,
    grid: Sequence[ResourceInfo] | None = None,
    jobs: Sequence[JobRequest] | None = None,
) -> ScenarioMetrics:
    """Simulate one scenario under one scheduler and return its metrics.

    ``grid`` and ``jobs`` default to the generated workload for ``config``;
    pass them explicitly to replay a serialized fixture instead.
    """
    if scheduler not in SCHEDULERS:
        raise UnknownSchedulerError(
            f"unknown scheduler {scheduler!r}; choose from {', '.join(list_schedulers())}"
        )
    adapter = SCHEDULERS[scheduler]
    base_params = ga_params if ga_params is not None else GaParams()

    resources = list(grid) if grid is not None else generate_grid(config)
    jobs = list(jobs) if jobs is not None else generate_jobs(config)
    res_by_id = {r.resource_id: r for r in resources}

    interval_ms = max(1, int(round(config.interval_s * 1000)))
    submit_ms = {j.job_id: int(round(j.submit_time_s * 1000)) for j in jobs}
    deadline_ms = {j.job_id: int(round(j.deadline_s * 1000)) for j in jobs}

    def emit(event: SimEvent) -> None:
        if event_sink is not None:
            event_sink(event)

    releases = sorted(jobs, key=lambda j: (submit_ms[j.job_id], j.job_id))
    release_i = 0
    pending: list[JobRequest] = []
    free = {r.resource_id: r.free_pes for r in resources}
    running: list[tuple[int, int, str, str, int]] = []  # (end, seq, rid, jid, pes)
    seq = 0
    fragments_left: dict[str, int] = {}

    completed: set[str] = set()
    missed: set[str] = set()
    total_cost = 0.0
    ga_iterations = 0
    sched_time = 0.0
    period = 0
    rollovers: list[int] = []

    def sweep_completions(now: int | None) -> None:
        while running and (now is None or running[0][0] <= now):
            end, _, rid, jid, pes = heapq.heappop(running)
            free[rid] += pes
            fragments_left[jid] -= 1
            if fragments_left[jid] == 0:
                completed.add(jid)
                emit(SimEvent(end, "complete", jid, rid))

    while release_i < len(releases) or pending:
        now = period * interval_ms
        sweep_completions(now)

        while release_i < len(releases) and submit_ms[releases[release_i].job_id] <= now:
            job = releases[release_i]
            release_i += 1
            pending.append(job)
            emit(SimEvent(submit_ms[job.job_id], "release", job.job_id))

        still: list[JobRequest] = []
        for job in sorted(pending, key=lambda j: j.job_id):
            remaining = submit_ms[job.job_id] + deadline_ms[job.job_id] - now
            if remaining <= 0:
                missed.add(job.job_id)
                emit(SimEvent(now, "miss", job.job_id))
            else:
                still.append(job)
        pending = still

        carried_count = 0
        if pending:
            snapshot = [
                replace(r, free_pes=free[r.resource_id]) for r in resources
            ]
            presented = [
                replace(
                    j,
                    deadline_s=(submit_ms[j.job_id] + deadline_ms[j.job_id] - now)
                    / 1000.0,
                )
                for j in pending
            ]
            params = replace(
                base_params,
                rng_seed=config.rng_seed * GA_PERIOD_SEED_STRIDE + period,
            )
            t0 = _time.perf_counter()
            schedule, iters = adapter(presented, snapshot, sched_config, params)
            sched_time += _time.perf_counter() - t0
            ga_iterations += iters

            carried = rollover(pending, schedule, now / 1000.0)
            carried_ids = {j.job_id for j in carried}
            placed = [j for j in pending if j.job_id not in carried_ids]
            pending = carried
            carried_count = len(carried)

            by_job = schedule.assignments.by_job()
            for job in sorted(placed, key=lambda j: j.job_id):
                jid = job.job_id
                fragments = sorted(by_job[jid].items())
                fragments_left[jid] = len(fragments)
                for rid, pes in fragments:
                    res = res_by_id[rid]
                    exec_s = exec_time(job, res)
                    end = now + int(exec_s * 1000)
                    assert end <= submit_ms[jid] + deadline_ms[jid], (
                        f"{scheduler} placed {jid} on {rid} past its deadline"
                    )
                    assert free[rid] >= pes, f"{scheduler} overcommitted {rid}"
                    free[rid] -= pes
                    seq += 1
                    heapq.heappush(running, (end, seq, rid, jid, pes))
                    total_cost += res.rate_for(jid) * pes * exec_s
                    emit(SimEvent(now, "schedule", jid, rid, detail=f"pes={pes}"))
            leftover = (
                set(by_job) - {j.job_id for j in placed} - set(schedule.dummy_jobs)
            )
            assert not leftover, f"schedule mentions unknown jobs: {leftover}"
        rollovers.append(carried_count)
        period += 1

    sweep_completions(None)

    done_tasks = sum(j.pe_count for j in jobs if j.job_id in completed)
    missed_tasks = sum(j.pe_count for j in jobs if j.job_id in missed)
    assert len(completed) + len(missed) == len(jobs), "job conservation violated"
    assert not running and not pending, "simulation ended with work in flight"

    return ScenarioMetrics(
        scheduler=scheduler,
        jobs_submitted=len(jobs),
        jobs_completed=len(completed),
        jobs_missed=len(missed),
        tasks_submitted=sum(j.pe_count for j in jobs),
        tasks_completed=done_tasks,
        tasks_missed=missed_tasks,
        total_cost_gd=total_cost,
        ga_iterations=ga_iterations,
        periods=period,
        rollovers_per_period=tuple(rollovers),
        wall_time_s=sched_time,
    )

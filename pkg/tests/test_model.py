"""Core model: execution time, cost, feasibility checks, dummy plumbing."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from metagrid.model import (
    AllocationMatrix,
    BudgetSemantics,
    JobKind,
    JobRequest,
    ResourceInfo,
    SchedulerConfig,
    UnknownIdError,
    ViolationKind,
    build_schedule,
    budget_charge,
    ensure_dummy,
    exec_time,
    make_dummy_resource,
    placement_cost,
    placement_feasible,
    qos_index,
    schedule_cost,
    validate,
)

from conftest import S1_OPTIMAL_ALLOC, S1_OPTIMAL_COST


def test_exec_time_two_equal_tasks():
    job = JobRequest("U", "J", 10.0, 100.0, (1000.0, 1000.0), 2)
    res = ResourceInfo("R", 4, 1.0, 100.0)
    assert exec_time(job, res) == 10.0


def test_exec_time_identity_scale():
    job = JobRequest("U", "J", 10.0, 100.0, (1000.0,), 1)
    res = ResourceInfo("R", 4, 1.0, 1000.0)
    assert exec_time(job, res) == 1.0


def test_exec_time_max_task_dominates():
    job = JobRequest("U", "J", 10.0, 100.0, (1000.0, 2000.0), 2)
    res = ResourceInfo("R", 4, 1.0, 200.0)
    assert exec_time(job, res) == 10.0


def test_schedule_cost_empty_allocation_is_zero(s1_jobs, s1_resources):
    assert schedule_cost(AllocationMatrix.empty(), s1_jobs, s1_resources) == 0.0


def test_schedule_cost_single_entry():
    job = JobRequest("U", "J", 1000.0, 100.0, (1000.0, 1000.0), 2)
    res = ResourceInfo("R", 4, 1.0, 100.0)
    alloc = AllocationMatrix({("R", "J"): 2})
    # 1 G$/PE/s x 2 PEs x 10 s
    assert schedule_cost(alloc, [job], [res]) == 20.0


def test_schedule_cost_s1_optimum(s1_jobs, s1_resources):
    alloc = AllocationMatrix(S1_OPTIMAL_ALLOC)
    assert schedule_cost(alloc, s1_jobs, s1_resources) == S1_OPTIMAL_COST


def test_schedule_cost_ignores_dummy_entries(s1_jobs, s1_resources):
    pool, dummy_id = ensure_dummy(s1_jobs, s1_resources)
    alloc = AllocationMatrix({("R1", "A"): 2, (dummy_id, "B"): 3})
    assert schedule_cost(alloc, s1_jobs, pool) == 20.0


def test_schedule_cost_unknown_resource_raises(s1_jobs, s1_resources):
    alloc = AllocationMatrix({("NOPE", "A"): 2})
    with pytest.raises(UnknownIdError):
        schedule_cost(alloc, s1_jobs, s1_resources)


def test_validate_s1_optimum_clean_in_sgn_mode(s1_jobs, s1_resources):
    alloc = AllocationMatrix(S1_OPTIMAL_ALLOC)
    assert validate(alloc, s1_jobs, s1_resources, JobKind.SGN) == []


def test_validate_reports_pe_requirement_shortfall(s1_jobs, s1_resources):
    alloc = AllocationMatrix({("R1", "A"): 2, ("R2", "B"): 2})
    kinds = {v.kind for v in validate(alloc, s1_jobs, s1_resources, JobKind.SGN)}
    assert ViolationKind.PE_REQUIREMENT in kinds


def test_validate_reports_split_sgn_job(s1_jobs, s1_resources):
    # B split 2+1 across the grid: multiple resources and partial blocks
    alloc = AllocationMatrix({("R1", "A"): 2, ("R1", "B"): 1, ("R2", "B"): 2})
    violations = validate(alloc, s1_jobs, s1_resources, JobKind.SGN)
    kinds = {v.kind for v in violations}
    assert ViolationKind.MULTIPLE_RESOURCES in kinds
    assert ViolationKind.SPLIT_SGN_JOB in kinds


def test_validate_mgn_mode_allows_splits(s1_jobs, s1_resources):
    alloc = AllocationMatrix({("R1", "A"): 1, ("R2", "A"): 1, ("R2", "B"): 3})
    violations = validate(alloc, s1_jobs, s1_resources, JobKind.MGN)
    assert violations == []


def test_validate_reports_capacity_overflow(s1_jobs, s1_resources):
    alloc = AllocationMatrix({("R2", "A"): 2, ("R2", "B"): 3})  # 5 PEs on 4
    kinds = {v.kind for v in validate(alloc, s1_jobs, s1_resources, JobKind.SGN)}
    assert ViolationKind.CAPACITY in kinds


def test_validate_reports_deadline_breach(s1_jobs, s1_resources):
    # B on R1 needs 20 s against a 15 s deadline
    alloc = AllocationMatrix({("R1", "B"): 3, ("R2", "A"): 2})
    kinds = {v.kind for v in validate(alloc, s1_jobs, s1_resources, JobKind.SGN)}
    assert ViolationKind.DEADLINE in kinds


def test_validate_reports_budget_breach():
    job = JobRequest("U", "J", 10.0, 100.0, (1000.0,), 1)
    res = ResourceInfo("R", 4, 2.0, 100.0)  # spend = 2 x 1 x 10 = 20 > 10
    alloc = AllocationMatrix({("R", "J"): 1})
    kinds = {v.kind for v in validate(alloc, [job], [res], JobKind.SGN)}
    assert kinds == {ViolationKind.BUDGET}


def test_validate_budget_semantics_flag():
    # literal semantics drops the time factor: 2 G$/PE x 1 PE = 2 <= 10
    job = JobRequest("U", "J", 10.0, 100.0, (1000.0,), 1)
    res = ResourceInfo("R", 4, 2.0, 100.0)
    alloc = AllocationMatrix({("R", "J"): 1})
    literal = SchedulerConfig(budget_semantics=BudgetSemantics.LITERAL)
    assert validate(alloc, [job], [res], JobKind.SGN, literal) == []


def test_validate_reports_negative_entries(s1_jobs, s1_resources):
    alloc = AllocationMatrix({("R1", "A"): -2, ("R2", "B"): 3})
    kinds = {v.kind for v in validate(alloc, s1_jobs, s1_resources, JobKind.SGN)}
    assert ViolationKind.NEGATIVE in kinds


def test_validate_dummy_placement_skips_budget_and_deadline(s1_jobs, s1_resources):
    pool, dummy_id = ensure_dummy(s1_jobs, s1_resources)
    alloc = AllocationMatrix({(dummy_id, "A"): 2, (dummy_id, "B"): 3})
    assert validate(alloc, s1_jobs, pool, JobKind.SGN) == []


@given(st.permutations([400.0, 900.0, 1500.0, 2200.0]))
def test_cost_invariant_under_task_permutation(sizes):
    job = JobRequest("U", "J", 1e6, 1e6, tuple(sizes), 4)
    res = ResourceInfo("R", 8, 2.0, 150.0)
    alloc = AllocationMatrix({("R", "J"): 4})
    baseline = JobRequest("U", "J", 1e6, 1e6, (400.0, 900.0, 1500.0, 2200.0), 4)
    assert schedule_cost(alloc, [job], [res]) == schedule_cost(
        alloc, [baseline], [res]
    )


@given(st.floats(min_value=0.1, max_value=50.0))
def test_cost_scales_linearly_with_rates(factor):
    job = JobRequest("U", "J", 1e9, 1e9, (1000.0, 500.0), 2)
    base = ResourceInfo("R", 4, 2.0, 100.0)
    scaled = ResourceInfo("R", 4, 2.0 * factor, 100.0)
    alloc = AllocationMatrix({("R", "J"): 2})
    assert schedule_cost(alloc, [job], [scaled]) == pytest.approx(
        factor * schedule_cost(alloc, [job], [base])
    )
    # capacity/requirement/deadline findings do not depend on the rate
    for res in (base, scaled):
        kinds = {v.kind for v in validate(alloc, [job], [res], JobKind.SGN)}
        assert ViolationKind.CAPACITY not in kinds
        assert ViolationKind.DEADLINE not in kinds


def test_placement_cost_and_budget_charge_agree(s1_jobs, s1_resources):
    job = s1_jobs[0]
    res = s1_resources[0]
    whole = placement_cost(job, res)
    charged = budget_charge(
        job, {res.resource_id: job.pe_count}, {res.resource_id: res},
        BudgetSemantics.TIME_INCLUSIVE,
    )
    assert whole == charged == 20.0


def test_placement_feasible_checks_deadline_and_budget(s1_jobs, s1_resources):
    a, b = s1_jobs
    r1, r2 = s1_resources
    assert placement_feasible(a, r1)
    assert not placement_feasible(b, r1)  # 20 s > 15 s deadline
    assert placement_feasible(b, r2)
    broke = JobRequest("U", "P", 1.0, 20.0, (1000.0, 1000.0), 2)
    assert not placement_feasible(broke, r1)  # costs 20 on a 1 G$ budget


def test_qos_index_formula():
    job = JobRequest("U", "J", 100.0, 20.0, (1.0, 1.0), 2)
    assert qos_index(job) == 100.0 / (20.0 * 2)


def test_make_dummy_resource_parameters(s1_jobs, s1_resources):
    dummy = make_dummy_resource(s1_jobs, s1_resources)
    assert dummy.is_dummy
    assert dummy.free_pes == 5  # total demanded PEs
    assert dummy.cost_per_pe_second == 30.0  # 10 x the max real rate
    assert dummy.pe_speed_mips == 200.0  # fastest real speed
    # strictly pricier than every real rate, deadline-feasible for every job
    for job in s1_jobs:
        assert placement_feasible(job, dummy)
        assert exec_time(job, dummy) <= job.deadline_s


def test_ensure_dummy_is_idempotent(s1_jobs, s1_resources):
    pool, dummy_id = ensure_dummy(s1_jobs, s1_resources)
    again, same_id = ensure_dummy(s1_jobs, pool)
    assert same_id == dummy_id
    assert len(again) == len(pool)


def test_build_schedule_parks_dummy_touched_jobs_whole(s1_jobs, s1_resources):
    pool, dummy_id = ensure_dummy(s1_jobs, s1_resources)
    # B half-placed for real, half parked: the real fragment must be dropped
    alloc = AllocationMatrix(
        {("R1", "A"): 2, ("R2", "B"): 1, (dummy_id, "B"): 2}
    )
    schedule = build_schedule(alloc, s1_jobs, pool)
    assert schedule.dummy_jobs == {"B"}
    assert schedule.assignments.pes("R2", "B") == 0
    assert schedule.assignments.pes(dummy_id, "B") == 3
    assert schedule.total_cost_gd == 20.0
    assert schedule.per_job_cost_gd == {"A": 20.0}
    assert schedule.per_job_time_s == {"A": 10.0}


def test_invalid_records_are_rejected():
    with pytest.raises(ValueError):
        ResourceInfo("R", -1, 1.0, 100.0)
    with pytest.raises(ValueError):
        ResourceInfo("R", 4, 0.0, 100.0)
    with pytest.raises(ValueError):
        ResourceInfo("R", 4, 1.0, 0.0)
    with pytest.raises(ValueError):
        JobRequest("U", "J", 10.0, 10.0, (100.0, 100.0), 3)  # 2 tasks != 3 PEs
    with pytest.raises(ValueError):
        JobRequest("U", "J", 0.0, 10.0, (100.0,), 1)
    with pytest.raises(ValueError):
        JobRequest("U", "J", 10.0, -1.0, (100.0,), 1)


def test_allocation_matrix_drops_zero_entries():
    alloc = AllocationMatrix({("R", "J"): 0, ("R", "K"): 2})
    assert ("R", "J") not in alloc.entries
    assert alloc.pes("R", "K") == 2
    assert alloc.job_ids() == {"K"}

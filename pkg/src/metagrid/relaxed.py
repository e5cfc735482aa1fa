"""Exact solver for the split-allowed (MGN) scheduling relaxation.

The relaxation treats every job as splittable: choose nonnegative integer
PE counts r[i, j] minimizing total money subject to resource capacities,
exact per-job PE demands, and per-job budget caps.  Pairs whose execution
time misses the job's deadline are excluded up front; a dummy parking
resource (always pair-eligible, budget-exempt) absorbs demand the real
grid cannot host.

``solve_relaxed`` hands the integer program to the HiGHS branch-and-cut
engine (via scipy) at zero optimality gap and re-checks the rounded
answer exactly in pure Python.  ``brute_force_relaxed`` is an independent
pure-Python enumerator used as a cross-check oracle on small instances.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .model import (
    AllocationMatrix,
    BudgetSemantics,
    DEFAULT_CONFIG,
    JobRequest,
    ResourceInfo,
    SchedulerConfig,
    exec_time,
    make_dummy_resource,
)


class EmptyGridError(ValueError):
    """No resources were given and dummy insertion is not permitted."""


class InfeasibleError(RuntimeError):
    """The PE demands cannot all be met, even using every admissible pair."""


class TooLargeError(ValueError):
    """Instance exceeds the brute-force enumeration guard."""


@dataclass(frozen=True)
class RelaxedModel:
    """The built relaxation: admissible pairs and their cost coefficients.

    ``cost_coeff[(rid, jid)]`` is the money per PE of placing one PE of job
    jid on resource rid (rate x execution time).  ``budget_weight`` is the
    per-PE amount counted against the job's budget (zero-weight dummy pairs
    are omitted).  ``pair_order`` fixes the deterministic variable order:
    job-major, resource-minor.
    """

    jobs: tuple[JobRequest, ...]
    resources: tuple[ResourceInfo, ...]
    feasible_pairs: frozenset[tuple[str, str]]
    cost_coeff: Mapping[tuple[str, str], float]
    budget_weight: Mapping[tuple[str, str], float]
    pair_order: tuple[tuple[str, str], ...]
    dummy_id: str | None

    def upper_bound(self, rid: str, jid: str) -> int:
        job = next(j for j in self.jobs if j.job_id == jid)
        res = next(r for r in self.resources if r.resource_id == rid)
        return _pair_upper_bound(job, res, self.budget_weight.get((rid, jid), 0.0))


def _pair_upper_bound(job: JobRequest, res: ResourceInfo, weight: float) -> int:
    """Largest PE count this single pair could ever carry."""
    ub = min(res.free_pes, job.pe_count)
    if weight > 0.0:
        # no feasible solution puts more than budget/weight PEs here
        ub = min(ub, int((job.budget_gd + 1e-9 * max(1.0, job.budget_gd)) / weight))
    return max(ub, 0)


def build_relaxed(
    jobs: Sequence[JobRequest],
    resources: Sequence[ResourceInfo],
    config: SchedulerConfig = DEFAULT_CONFIG,
    force_dummy: bool = False,
) -> RelaxedModel:
    """Assemble the relaxation for one batch.

    Keeps a (resource, job) pair iff the job finishes within its deadline
    there and a single PE is affordable; dummy pairs are always kept.  A
    dummy resource is appended when the admissible real capacity cannot
    cover some job (or aggregate demand), so the model stays feasible
    whenever parking is allowed.
    """
    jobs = tuple(sorted(jobs, key=lambda j: j.job_id))
    res_list = sorted(resources, key=lambda r: r.resource_id)
    if not res_list and not (config.allow_dummy or force_dummy):
        raise EmptyGridError("no resources and dummy parking disabled")

    eps = config.epsilon

    def admissible(job: JobRequest, res: ResourceInfo) -> bool:
        if res.is_dummy:
            return True
        if exec_time(job, res) > job.deadline_s + eps:
            return False
        if config.budget_semantics is BudgetSemantics.LITERAL:
            one_pe = res.rate_for(job.job_id)
        else:
            one_pe = res.rate_for(job.job_id) * exec_time(job, res)
        return one_pe <= job.budget_gd + eps

    def pair_weight(job: JobRequest, res: ResourceInfo) -> float:
        if res.is_dummy:
            return 0.0
        if config.budget_semantics is BudgetSemantics.LITERAL:
            return res.rate_for(job.job_id)
        return res.rate_for(job.job_id) * exec_time(job, res)

    have_dummy = any(r.is_dummy for r in res_list)
    if not have_dummy and (config.allow_dummy or force_dummy) and jobs:
        need = force_dummy
        if not need:
            total_real = sum(r.free_pes for r in res_list)
            if sum(j.pe_count for j in jobs) > total_real:
                need = True
        if not need:
            # a job's budget binds jointly across resources, so count the
            # PEs it can afford taking the cheapest per-PE charges first
            for job in jobs:
                offers = sorted(
                    (pair_weight(job, res), min(res.free_pes, job.pe_count))
                    for res in res_list
                    if admissible(job, res)
                )
                affordable = 0
                left = job.budget_gd + eps * max(1.0, job.budget_gd)
                for w, cap in offers:
                    if affordable >= job.pe_count:
                        break
                    if w <= 0.0:
                        affordable += cap
                    else:
                        take = min(cap, int(left / w))
                        affordable += take
                        left -= take * w
                if affordable < job.pe_count:
                    need = True
                    break
        if need:
            res_list = res_list + [make_dummy_resource(jobs, res_list)]
            res_list.sort(key=lambda r: r.resource_id)

    pairs: set[tuple[str, str]] = set()
    coeff: dict[tuple[str, str], float] = {}
    weight: dict[tuple[str, str], float] = {}
    for job in jobs:
        for res in res_list:
            if not admissible(job, res):
                continue
            key = (res.resource_id, job.job_id)
            pairs.add(key)
            coeff[key] = res.rate_for(job.job_id) * exec_time(job, res)
            w = pair_weight(job, res)
            if w > 0.0:
                weight[key] = w

    order = tuple(sorted(pairs, key=lambda p: (p[1], p[0])))
    dummies = sorted(r.resource_id for r in res_list if r.is_dummy)
    return RelaxedModel(
        jobs=jobs,
        resources=tuple(res_list),
        feasible_pairs=frozenset(pairs),
        cost_coeff=coeff,
        budget_weight=weight,
        pair_order=order,
        dummy_id=dummies[0] if dummies else None,
    )


def relaxed_objective(model: RelaxedModel, alloc: AllocationMatrix) -> float:
    """Canonical objective: coefficient-weighted PE counts summed in the
    model's fixed pair order (so equal allocations give identical floats).
    Includes dummy pairs at their deterrent price."""
    total = 0.0
    for key in model.pair_order:
        pes = alloc.pes(*key)
        if pes:
            total += model.cost_coeff[key] * pes
    return total


def _model_arrays(model: RelaxedModel):
    """LP ingredients shared by every branch-and-bound node."""
    pair_index = {p: k for k, p in enumerate(model.pair_order)}
    n_vars = len(model.pair_order)
    c = np.array([model.cost_coeff[p] for p in model.pair_order])

    jobs = model.jobs
    res_by_id = {r.resource_id: r for r in model.resources}

    # demand rows: one per job, sum of its pairs == pe_count
    a_eq_rows, a_eq_cols, a_eq_vals, b_eq = [], [], [], []
    for row, job in enumerate(jobs):
        b_eq.append(job.pe_count)
        for (rid, jid), k in pair_index.items():
            if jid == job.job_id:
                a_eq_rows.append(row)
                a_eq_cols.append(k)
                a_eq_vals.append(1.0)

    # inequality rows: capacity per resource, then budget per job
    a_ub_rows, a_ub_cols, a_ub_vals, b_ub = [], [], [], []
    row = 0
    for rid in sorted(res_by_id):
        cols = [k for (r, j), k in pair_index.items() if r == rid]
        if not cols:
            continue
        for k in cols:
            a_ub_rows.append(row)
            a_ub_cols.append(k)
            a_ub_vals.append(1.0)
        b_ub.append(float(res_by_id[rid].free_pes))
        row += 1
    for job in jobs:
        terms = [
            (k, model.budget_weight[(rid, jid)])
            for (rid, jid), k in pair_index.items()
            if jid == job.job_id and (rid, jid) in model.budget_weight
        ]
        if not terms:
            continue
        ubs = {}
        for (rid, jid), k in pair_index.items():
            if jid == job.job_id:
                ubs[k] = _pair_upper_bound(job, res_by_id[rid],
                                           model.budget_weight.get((rid, jid), 0.0))
        if sum(w * ubs[k] for k, w in terms) <= job.budget_gd + 1e-9:
            continue  # row can never bind given the bounds
        for k, w in terms:
            a_ub_rows.append(row)
            a_ub_cols.append(k)
            a_ub_vals.append(w)
        b_ub.append(job.budget_gd)
        row += 1

    jobs_by_id = {j.job_id: j for j in jobs}
    base_ub = np.zeros(n_vars)
    for p, k in pair_index.items():
        rid, jid = p
        base_ub[k] = _pair_upper_bound(
            jobs_by_id[jid], res_by_id[rid], model.budget_weight.get(p, 0.0)
        )

    a_eq = sparse.csr_matrix(
        (a_eq_vals, (a_eq_rows, a_eq_cols)), shape=(len(jobs), n_vars)
    )
    n_ub = row
    a_ub = sparse.csr_matrix(
        (a_ub_vals, (a_ub_rows, a_ub_cols)), shape=(n_ub, n_vars)
    ) if n_ub else None
    return c, a_ub, (np.array(b_ub) if n_ub else None), a_eq, np.array(b_eq, float), base_ub


def _check_integer_solution(model: RelaxedModel, counts: dict, config_eps: float = 1e-9) -> bool:
    """Exact feasibility re-check of a rounded candidate."""
    jobs_by_id = {j.job_id: j for j in model.jobs}
    res_by_id = {r.resource_id: r for r in model.resources}
    load: dict[str, int] = {}
    demand: dict[str, int] = {}
    spend: dict[str, float] = {}
    for (rid, jid), v in counts.items():
        if v < 0:
            return False
        load[rid] = load.get(rid, 0) + v
        demand[jid] = demand.get(jid, 0) + v
        w = model.budget_weight.get((rid, jid), 0.0)
        if w:
            spend[jid] = spend.get(jid, 0.0) + w * v
    for rid, used in load.items():
        if used > res_by_id[rid].free_pes:
            return False
    for job in model.jobs:
        if demand.get(job.job_id, 0) != job.pe_count:
            return False
        if spend.get(job.job_id, 0.0) > job.budget_gd + config_eps * max(1.0, job.budget_gd):
            return False
    return True


def solve_relaxed(model: RelaxedModel) -> AllocationMatrix:
    """Optimal integer solution of the relaxation.

    The integer program goes straight to the HiGHS branch-and-cut engine
    at zero optimality gap, and the rounded answer is re-checked exactly
    in pure Python before we trust it (once more with tightened solver
    tolerances if the first pass is numerically off).  Deterministic for
    a fixed environment; ties between equal-cost optima resolve by the
    engine's fixed search order.  Raises InfeasibleError when the demands
    cannot be met (only possible without a dummy resource).
    """
    if not model.jobs:
        return AllocationMatrix.empty()
    for job in model.jobs:
        if not any(jid == job.job_id for (_, jid) in model.feasible_pairs):
            raise InfeasibleError(f"job {job.job_id} has no admissible pair")

    c, a_ub, b_ub, a_eq, b_eq, base_ub = _model_arrays(model)
    n = len(model.pair_order)
    bounds = np.column_stack([np.zeros(n), base_ub])
    exact = {"mip_rel_gap": 0.0}
    tightened = {
        **exact,
        "primal_feasibility_tolerance": 1e-10,
        "dual_feasibility_tolerance": 1e-10,
    }
    for options in (exact, tightened):
        res = linprog(
            c,
            A_ub=a_ub,
            b_ub=b_ub,
            A_eq=a_eq,
            b_eq=b_eq,
            bounds=bounds,
            method="highs",
            integrality=np.ones(n),
            options=options,
        )
        if res.status == 2:  # infeasible
            raise InfeasibleError("no integer allocation satisfies the demands")
        if res.status != 0:
            raise RuntimeError(
                f"MILP solve failed with status {res.status}: {res.message}"
            )
        counts = {
            model.pair_order[k]: int(round(res.x[k]))
            for k in range(n)
            if int(round(res.x[k])) != 0
        }
        if _check_integer_solution(model, counts):
            return AllocationMatrix(counts)
    raise RuntimeError("MILP optimum failed the exact feasibility recheck")


def brute_force_relaxed(model: RelaxedModel) -> AllocationMatrix:
    """Reference oracle: exhaustive search over all integer allocations.

    Guarded to small instances (total PEs <= 20, at most 4 resources).
    Enumerates jobs in id order and, per job, PE splits over its admissible
    resources in id order with counts ascending, keeping the first optimum
    found -- i.e. the lexicographically smallest optimal vector in
    job-major order.
    """
    total_pes = sum(j.pe_count for j in model.jobs)
    if total_pes > 20 or len(model.resources) > 4:
        raise TooLargeError(
            f"brute force limited to 20 total PEs / 4 resources, "
            f"got {total_pes} PEs / {len(model.resources)} resources"
        )
    jobs = sorted(model.jobs, key=lambda j: j.job_id)
    res_by_id = {r.resource_id: r for r in model.resources}

    # admissible resources and cheapest per-PE coefficient per job
    arcs: dict[str, list[str]] = {}
    cheapest: dict[str, float] = {}
    for job in jobs:
        rids = sorted(rid for (rid, jid) in model.feasible_pairs if jid == job.job_id)
        if not rids:
            raise InfeasibleError(f"job {job.job_id} has no admissible pair")
        arcs[job.job_id] = rids
        cheapest[job.job_id] = min(model.cost_coeff[(rid, job.job_id)] for rid in rids)

    remaining_lb = [0.0] * (len(jobs) + 1)
    for i in range(len(jobs) - 1, -1, -1):
        remaining_lb[i] = remaining_lb[i + 1] + cheapest[jobs[i].job_id] * jobs[i].pe_count

    best_obj = float("inf")
    best: dict[tuple[str, str], int] | None = None
    capacity = {r.resource_id: r.free_pes for r in model.resources}
    current: dict[tuple[str, str], int] = {}

    def place_job(ji: int, partial_cost: float) -> None:
        nonlocal best_obj, best
        if partial_cost + remaining_lb[ji] > best_obj + 1e-12:
            return
        if ji == len(jobs):
            if partial_cost < best_obj - 1e-12:
                best_obj = partial_cost
                best = dict(current)
            return
        job = jobs[ji]
        rids = arcs[job.job_id]

        def split(ai: int, left: int, cost_so_far: float, spent: float) -> None:
            # optimistic completion: rest of this job at its cheapest rate,
            # every later job at its own cheapest rate
            if cost_so_far + cheapest[job.job_id] * left + remaining_lb[ji + 1] > best_obj + 1e-12:
                return
            if ai == len(rids):
                if left == 0:
                    place_job(ji + 1, cost_so_far)
                return
            rid = rids[ai]
            key = (rid, job.job_id)
            cap = min(capacity[rid], left)
            w = model.budget_weight.get(key, 0.0)
            for take in range(0, cap + 1):
                new_spent = spent + w * take
                if new_spent > job.budget_gd + 1e-9 * max(1.0, job.budget_gd):
                    break
                if take:
                    current[key] = take
                    capacity[rid] -= take
                split(ai + 1, left - take,
                      cost_so_far + model.cost_coeff[key] * take, new_spent)
                if take:
                    del current[key]
                    capacity[rid] += take

        split(0, job.pe_count, partial_cost, 0.0)

    place_job(0, 0.0)
    if best is None:
        raise InfeasibleError("no integer allocation satisfies the demands")
    return AllocationMatrix(best)


def brute_force_sgn(
    jobs: Sequence[JobRequest],
    resources: Sequence[ResourceInfo],
    config: SchedulerConfig = DEFAULT_CONFIG,
) -> AllocationMatrix | None:
    """Optimal whole-job-per-resource assignment by exhaustive search.

    Real resources only (no parking): returns None when some job cannot be
    placed in any arrangement.  Same size guard as brute_force_relaxed.
    """
    total_pes = sum(j.pe_count for j in jobs)
    real = sorted((r for r in resources if not r.is_dummy), key=lambda r: r.resource_id)
    if total_pes > 20 or len(real) > 4:
        raise TooLargeError("SGN brute force limited to 20 total PEs / 4 resources")
    job_list = sorted(jobs, key=lambda j: j.job_id)
    eps = config.epsilon

    options: list[list[tuple[str, float]]] = []
    for job in job_list:
        opts = []
        for res in real:
            if exec_time(job, res) > job.deadline_s + eps:
                continue
            if config.budget_semantics is BudgetSemantics.LITERAL:
                charge = res.rate_for(job.job_id) * job.pe_count
            else:
                charge = res.rate_for(job.job_id) * job.pe_count * exec_time(job, res)
            if charge > job.budget_gd + eps:
                continue
            cost = res.rate_for(job.job_id) * job.pe_count * exec_time(job, res)
            opts.append((res.resource_id, cost))
        if not opts:
            return None
        options.append(opts)

    capacity = {r.resource_id: r.free_pes for r in real}
    best_obj = float("inf")
    best: dict[tuple[str, str], int] | None = None
    current: dict[tuple[str, str], int] = {}

    def assign(ji: int, cost: float) -> None:
        nonlocal best_obj, best
        if cost > best_obj + 1e-12:
            return
        if ji == len(job_list):
            if cost < best_obj - 1e-12:
                best_obj = cost
                best = dict(current)
            return
        job = job_list[ji]
        for rid, pair_cost in options[ji]:
            if capacity[rid] < job.pe_count:
                continue
            capacity[rid] -= job.pe_count
            current[(rid, job.job_id)] = job.pe_count
            assign(ji + 1, cost + pair_cost)
            del current[(rid, job.job_id)]
            capacity[rid] += job.pe_count

    assign(0, 0.0)
    if best is None:
        return None
    return AllocationMatrix(best)


def dump_lp(model: RelaxedModel) -> str:
    """Debug dump of the model as one LP-ish text line per row."""
    def var(rid: str, jid: str) -> str:
        return f"x[{rid},{jid}]"

    terms = " + ".join(
        f"{model.cost_coeff[p]:.6g} {var(*p)}" for p in model.pair_order
    )
    rows: list[str] = []
    by_res: dict[str, list[tuple[str, str]]] = {}
    for p in model.pair_order:
        by_res.setdefault(p[0], []).append(p)
    for res in model.resources:
        rid = res.resource_id
        if rid not in by_res:
            continue
        lhs = " + ".join(var(*p) for p in sorted(by_res[rid], key=lambda p: p[1]))
        rows.append(f"cap[{rid}]: {lhs} <= {res.free_pes}")
    for job in model.jobs:
        mine = [p for p in model.pair_order if p[1] == job.job_id]
        lhs = " + ".join(var(*p) for p in mine)
        rows.append(f"dem[{job.job_id}]: {lhs} = {job.pe_count}")
    for job in model.jobs:
        mine = [p for p in model.pair_order if p[1] == job.job_id and p in model.budget_weight]
        if not mine:
            continue
        lhs = " + ".join(f"{model.budget_weight[p]:.6g} {var(*p)}" for p in mine)
        rows.append(f"bud[{job.job_id}]: {lhs} <= {job.budget_gd:.6g}")
    return f"min: {terms}; st: " + "; ".join(rows) + ";"

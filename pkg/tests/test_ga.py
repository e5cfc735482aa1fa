"""GA operators, penalty fitness, and the two seeded meta-schedulers."""

from __future__ import annotations

import random

import pytest
from conftest import S1_OPTIMAL_COST, fuzz_instance, tiny_instance
from metagrid.ga import (
    Chromosome,
    GaParams,
    chromosome_from_schedule,
    crossover,
    decode_schedule,
    default_penalty_weight,
    fitness,
    hga,
    lpga,
    mutate,
    roulette_select,
    run_ga,
)
from metagrid.model import (
    AllocationMatrix,
    JobKind,
    JobRequest,
    ResourceInfo,
    build_schedule,
    ensure_dummy,
    validate,
)


class _FixedCut:
    """rng stand-in whose randint always lands on one crossover point."""

    def __init__(self, cut: int) -> None:
        self.cut = cut

    def randint(self, lo: int, hi: int) -> int:
        assert lo <= self.cut <= hi
        return self.cut


# ---------------------------------------------------------------- fitness


def test_default_penalty_weight_s1(s1_jobs, s1_resources):
    # 10 * max rate 3 * max exec time 20 s * max PE request 3
    assert default_penalty_weight(s1_jobs, s1_resources) == 1800.0


def test_fitness_of_feasible_genes_is_plain_cost(s1_jobs, s1_resources):
    assert fitness({"A": "R1", "B": "R2"}, s1_jobs, s1_resources) == 110.0


def test_fitness_charges_capacity_overflow(s1_jobs, s1_resources):
    # both jobs on R2: base 30 + 90, one PE over the 4 available
    got = fitness({"A": "R2", "B": "R2"}, s1_jobs, s1_resources)
    assert got == 120.0 + 1800.0


def test_fitness_charges_each_deferred_job(s1_jobs, s1_resources):
    pool, dummy_id = ensure_dummy(s1_jobs, s1_resources)
    got = fitness({"A": dummy_id, "B": dummy_id}, s1_jobs, pool)
    assert got == 2 * 1800.0


def test_fitness_counts_deadline_and_budget_breaches(s1_jobs, s1_resources):
    # B on R1 runs 20 s against a 15 s deadline: one breach
    got = fitness({"A": "R2", "B": "R1"}, s1_jobs, s1_resources)
    assert got == (30.0 + 60.0) + 1800.0


def test_fitness_accepts_chromosome_and_custom_weight(s1_jobs, s1_resources):
    chrom = Chromosome({"A": "R2", "B": "R2"})
    assert fitness(chrom, s1_jobs, s1_resources, penalty_weight=7.0) == 127.0


# ------------------------------------------------------------- selection


def test_roulette_singleton_population_returns_it_twice():
    only = Chromosome({"A": "R1"}, 5.0)
    p1, p2 = roulette_select([only], random.Random(0))
    assert p1 is only and p2 is only


def test_roulette_requires_evaluated_population():
    with pytest.raises(ValueError):
        roulette_select([Chromosome({"A": "R1"})], random.Random(0))


def test_roulette_equal_fitness_degrades_to_uniform():
    pop = [Chromosome({"A": "R1"}, 10.0), Chromosome({"A": "R2"}, 10.0)]
    rng = random.Random(42)
    hits = 0
    draws = 10_000
    for _ in range(draws):
        p1, p2 = roulette_select(pop, rng)
        hits += (p1 is pop[0]) + (p2 is pop[0])
    freq = hits / (2 * draws)
    assert abs(freq - 0.5) < 0.02


def test_roulette_weights_follow_fitness_gap():
    # weights (30-10)+1 : (30-30)+1, so the better one wins 21/22 of picks
    pop = [Chromosome({"A": "R1"}, 10.0), Chromosome({"A": "R2"}, 30.0)]
    rng = random.Random(7)
    hits = 0
    draws = 100_000
    for _ in range(draws):
        p1, p2 = roulette_select(pop, rng, floor=1.0)
        hits += (p1 is pop[0]) + (p2 is pop[0])
    freq = hits / (2 * draws)
    assert abs(freq - 21 / 22) < 0.01


# ------------------------------------------------------------- crossover


def test_crossover_cut_zero_swaps_parents_whole():
    a = Chromosome({"A": "R1", "B": "R1"})
    b = Chromosome({"A": "R2", "B": "R2"})
    c1, c2 = crossover(a, b, _FixedCut(0))
    assert c1.genes == b.genes
    assert c2.genes == a.genes


def test_crossover_cut_one_splits_on_sorted_job_ids():
    a = Chromosome({"A": "R1", "B": "R1"})
    b = Chromosome({"A": "R2", "B": "R2"})
    c1, c2 = crossover(a, b, _FixedCut(1))
    assert c1.genes == {"A": "R1", "B": "R2"}
    assert c2.genes == {"A": "R2", "B": "R1"}


def test_crossover_of_identical_parents_is_identity():
    a = Chromosome({"A": "R1", "B": "R2"})
    for seed in range(5):
        c1, c2 = crossover(a, a.copy(), random.Random(seed))
        assert c1.genes == a.genes
        assert c2.genes == a.genes


def test_crossover_children_start_unevaluated():
    a = Chromosome({"A": "R1"}, 1.0)
    b = Chromosome({"A": "R2"}, 2.0)
    c1, c2 = crossover(a, b, random.Random(0))
    assert c1.cached_fitness is None
    assert c2.cached_fitness is None


# -------------------------------------------------------------- mutation


def test_mutate_rate_zero_is_identity_and_keeps_cache():
    chrom = Chromosome({"A": "R1", "B": "R2"}, 55.0)
    out = mutate(chrom, random.Random(0), 0.0, [ResourceInfo("R9", 1, 1.0, 100.0)])
    assert out.genes == chrom.genes
    assert out.cached_fitness == 55.0


def test_mutate_rate_one_redraws_every_gene():
    chrom = Chromosome({"A": "R1", "B": "R1"}, 55.0)
    only = ResourceInfo("R2", 4, 1.0, 100.0)
    out = mutate(chrom, random.Random(0), 1.0, [only])
    assert out.genes == {"A": "R2", "B": "R2"}
    assert out.cached_fitness is None


def test_mutate_is_seed_deterministic():
    chrom = Chromosome({f"J{i}": "R1" for i in range(12)})
    pool = [ResourceInfo(f"R{i}", 4, 1.0, 100.0) for i in range(4)]
    a = mutate(chrom, random.Random(9), 0.5, pool)
    b = mutate(chrom, random.Random(9), 0.5, pool)
    assert a.genes == b.genes


def test_mutate_does_not_touch_the_input():
    chrom = Chromosome({"A": "R1"}, 55.0)
    mutate(chrom, random.Random(0), 1.0, [ResourceInfo("R2", 4, 1.0, 100.0)])
    assert chrom.genes == {"A": "R1"}
    assert chrom.cached_fitness == 55.0


# ------------------------------------------------------ decode / encode


def test_decode_parks_infeasible_gene(s1_jobs, s1_resources):
    # B on R1 misses its deadline, so decoding defers it
    schedule = decode_schedule({"A": "R1", "B": "R1"}, s1_jobs, s1_resources)
    assert schedule.dummy_jobs == {"B"}
    assert schedule.assignments.pes("R1", "A") == 2
    assert schedule.total_cost_gd == 20.0


def test_decode_sheds_largest_job_first_on_overflow():
    jobs = [
        JobRequest("U", "J1", 1000.0, 50.0, (1000.0,) * 3, 3),
        JobRequest("U", "J2", 1000.0, 50.0, (1000.0,) * 2, 2),
    ]
    res = [ResourceInfo("R", 4, 1.0, 100.0)]
    schedule = decode_schedule({"J1": "R", "J2": "R"}, jobs, res)
    assert schedule.dummy_jobs == {"J1"}
    assert schedule.assignments.pes("R", "J2") == 2


def test_decode_output_is_always_sgn_feasible():
    for seed in range(80):
        jobs, resources = fuzz_instance(seed)
        pool, dummy_id = ensure_dummy(jobs, resources)
        rng = random.Random(seed)
        rids = sorted(r.resource_id for r in pool)
        genes = {j.job_id: rng.choice(rids) for j in jobs}
        schedule = decode_schedule(genes, jobs, resources)
        violations = validate(schedule.assignments, jobs, pool, JobKind.SGN)
        assert violations == [], f"instance seed {seed}: {violations}"


def test_chromosome_from_schedule_roundtrip(s1_jobs, s1_resources):
    schedule = decode_schedule({"A": "R1", "B": "R2"}, s1_jobs, s1_resources)
    chrom = chromosome_from_schedule(schedule, s1_jobs, s1_resources)
    assert chrom.genes == {"A": "R1", "B": "R2"}


def test_chromosome_from_schedule_rejects_split_jobs(s1_jobs, s1_resources):
    pool, _ = ensure_dummy(s1_jobs, s1_resources)
    alloc = AllocationMatrix({("R1", "A"): 1, ("R2", "A"): 1, ("R2", "B"): 3})
    schedule = build_schedule(alloc, s1_jobs, pool)
    with pytest.raises(ValueError, match="not placed whole"):
        chromosome_from_schedule(schedule, s1_jobs, s1_resources)


# ---------------------------------------------------------------- run_ga


def test_run_ga_rejects_oversized_seed_list(s1_jobs, s1_resources):
    seeds = [Chromosome({"A": "R1", "B": "R2"}) for _ in range(3)]
    with pytest.raises(ValueError):
        run_ga(seeds, s1_jobs, s1_resources, GaParams(population_size=2))


def test_run_ga_empty_jobs_short_circuits(s1_resources):
    result = run_ga([], [], s1_resources)
    assert result.iterations_used == 0
    assert result.best_fitness_trace == (0.0,)
    assert result.converged


def test_run_ga_single_iteration_reports_initial_best(s1_jobs, s1_resources):
    params = GaParams(population_size=30, max_iterations=1, rng_seed=2)
    result = run_ga([], s1_jobs, s1_resources, params)
    assert result.iterations_used == 1
    assert len(result.best_fitness_trace) == 1
    assert not result.converged


def test_run_ga_seeded_with_optimum_stays_there(s1_jobs, s1_resources):
    params = GaParams(
        population_size=20, convergence_window=10, max_iterations=500, rng_seed=5
    )
    seed = Chromosome({"A": "R1", "B": "R2"})
    result = run_ga([seed], s1_jobs, s1_resources, params)
    assert result.seed_fitness == S1_OPTIMAL_COST
    assert result.best_fitness == S1_OPTIMAL_COST
    assert set(result.best_fitness_trace) == {S1_OPTIMAL_COST}
    assert result.converged
    assert result.iterations_used == params.convergence_window + 1


def test_run_ga_finds_s1_optimum_from_random_start(s1_jobs, s1_resources):
    params = GaParams(
        population_size=40, convergence_window=15, max_iterations=300, rng_seed=11
    )
    result = run_ga([], s1_jobs, s1_resources, params)
    assert result.best_fitness == S1_OPTIMAL_COST
    assert result.best.genes == {"A": "R1", "B": "R2"}


def test_run_ga_trace_never_worsens():
    for seed in range(25):
        jobs, resources = tiny_instance(seed)
        params = GaParams(
            population_size=12,
            convergence_window=8,
            max_iterations=40,
            rng_seed=seed,
        )
        result = run_ga([], jobs, resources, params)
        trace = result.best_fitness_trace
        assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))
        assert len(trace) == result.iterations_used


def test_run_ga_is_deterministic(s1_jobs, s1_resources):
    params = GaParams(population_size=16, max_iterations=30, rng_seed=77)
    a = run_ga([], s1_jobs, s1_resources, params)
    b = run_ga([], s1_jobs, s1_resources, params)
    assert a == b


# ------------------------------------------------------ seeded pipelines


def test_lpga_s1(s1_jobs, s1_resources):
    params = GaParams(
        population_size=16, convergence_window=5, max_iterations=100, rng_seed=3
    )
    schedule, result = lpga(s1_jobs, s1_resources, params)
    assert schedule.total_cost_gd == S1_OPTIMAL_COST
    assert schedule.dummy_jobs == frozenset()
    assert result.seed_fitness == S1_OPTIMAL_COST
    assert result.best_fitness == S1_OPTIMAL_COST
    assert result.converged
    assert result.iterations_used == params.convergence_window + 1


def test_hga_s1(s1_jobs, s1_resources):
    params = GaParams(
        population_size=16, convergence_window=5, max_iterations=100, rng_seed=3
    )
    schedule, result = hga(s1_jobs, s1_resources, params)
    assert schedule.total_cost_gd == S1_OPTIMAL_COST
    assert result.seed_fitness == S1_OPTIMAL_COST


def test_lpga_empty_jobs(s1_resources):
    schedule, result = lpga([], s1_resources)
    assert schedule.assignments.entries == {}
    assert result.iterations_used == 0


def test_hga_repeat_runs_match_exactly(s1_jobs, s1_resources):
    params = GaParams(population_size=12, max_iterations=25, rng_seed=9)
    s_a, r_a = hga(s1_jobs, s1_resources, params)
    s_b, r_b = hga(s1_jobs, s1_resources, params)
    assert r_a == r_b
    assert s_a.assignments.entries == s_b.assignments.entries


def test_refinement_never_loses_to_its_seed():
    params = GaParams(
        population_size=14, convergence_window=6, max_iterations=60, rng_seed=1
    )
    for seed in range(15):
        jobs, resources = fuzz_instance(seed)
        for pipeline in (lpga, hga):
            _, result = pipeline(jobs, resources, params)
            assert result.best_fitness <= result.seed_fitness + 1e-9

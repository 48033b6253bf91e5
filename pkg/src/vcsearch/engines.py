"""The three candidate-generation engines: NSGA-II, random search, and a
mutation-based fuzzer with windowed range/count adaptation.

Each engine draws all randomness from one seeded generator on the
coordinator, so a (config, context) pair maps to exactly one archive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .characteristics import CharacteristicTable
from .objectives import EvaluationContext, EvaluationRecord
from .operators import (
    crowding_distance,
    fast_non_dominated_sort,
    polynomial_mutation,
    sbx_crossover,
)
from .quality import FrontSet, extract_pareto_front

ALGORITHMS = ("nsga2", "random", "safefuzzer")

FUZZER_WEIGHTS = (6.0, 1.0, 1.0)
FUZZER_WINDOW_GENERATIONS = 5
FUZZER_CONVERGENCE_MIN_EVALS = 500
FUZZER_FROZEN_GENERATIONS = 5


@dataclass(frozen=True)
class SearchConfig:
    algorithm: str
    population_size: int = 50
    max_evaluations: int = 5000
    crossover_rate: float = 0.9
    crossover_distribution_index: float = 20.0
    mutation_rate: float | None = None  # None -> 1/n at run time
    mutation_distribution_index: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm: {self.algorithm}")
        if self.population_size <= 0:
            raise ValueError("population_size must be positive")
        if self.max_evaluations < self.population_size:
            raise ValueError("max_evaluations must cover one population")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must be in [0, 1]")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must be in [0, 1]")


@dataclass
class RunArchive:
    config: SearchConfig
    evaluations: list[EvaluationRecord]
    final_front_indices: list[int] = field(default_factory=list)
    converged_early: bool = False

    def final_front(self) -> FrontSet:
        return FrontSet(
            points=tuple(
                self.evaluations[i].objectives.as_tuple()
                for i in self.final_front_indices
            ),
            provenance=tuple(
                (self.config.algorithm, self.config.seed)
                for _ in self.final_front_indices
            ),
        )


Evaluator = Callable[[Sequence[float], int], EvaluationRecord]


def _finish_archive(
    config: SearchConfig,
    records: list[EvaluationRecord],
    result_indices: Sequence[int] | None = None,
) -> RunArchive:
    """Close a run: the archived front is the nondominated subset of the
    algorithm's result set (final population, full random sample, or
    top-scored set), not of every evaluation ever made."""
    if result_indices is None:
        result_indices = range(len(records))
    result_indices = sorted(result_indices)
    points = [records[i].objectives.as_tuple() for i in result_indices]
    front = extract_pareto_front(points)
    kept = set(front.points)
    seen: set[tuple[float, ...]] = set()
    indices = []
    for i, p in zip(result_indices, points):
        if p in kept and p not in seen:
            indices.append(i)
            seen.add(p)
    return RunArchive(config=config, evaluations=records, final_front_indices=indices)


def _uniform_assignment(table: CharacteristicTable, rng: np.random.Generator):
    return tuple(
        rng.uniform(s.lower, s.upper) for s in table.specs
    )


def run_random_search(
    config: SearchConfig, ctx: EvaluationContext, evaluate: Evaluator | None = None
) -> RunArchive:
    if config.algorithm != "random":
        raise ValueError("config.algorithm must be 'random'")
    evaluate = evaluate or ctx.evaluate
    rng = np.random.default_rng(config.seed)
    records = []
    for i in range(config.max_evaluations):
        raw = _uniform_assignment(ctx.table, rng)
        records.append(evaluate(raw, i // config.population_size))
    return _finish_archive(config, records)


def _tournament(
    rng: np.random.Generator, ranks: list[int], crowding: list[float]
) -> int:
    """Binary tournament on (rank, crowding); equal pairs fall back to the
    lower population index for determinism."""
    n = len(ranks)
    i = int(rng.integers(0, n))
    j = int(rng.integers(0, n))
    if ranks[i] != ranks[j]:
        return i if ranks[i] < ranks[j] else j
    if crowding[i] != crowding[j]:
        return i if crowding[i] > crowding[j] else j
    return min(i, j)


def run_nsga2(
    config: SearchConfig, ctx: EvaluationContext, evaluate: Evaluator | None = None
) -> RunArchive:
    if config.algorithm != "nsga2":
        raise ValueError("config.algorithm must be 'nsga2'")
    evaluate = evaluate or ctx.evaluate
    rng = np.random.default_rng(config.seed)
    table = ctx.table
    lowers, uppers = table.lowers, table.uppers
    n_vars = len(table)
    mutation_rate = (
        config.mutation_rate if config.mutation_rate is not None else 1.0 / n_vars
    )
    pop_size = config.population_size
    budget = config.max_evaluations
    records: list[EvaluationRecord] = []

    def score(raw, generation):
        rec = evaluate(raw, generation)
        records.append(rec)
        return rec

    # population: list of (genotype, record)
    population = [
        (_uniform_assignment(table, rng), None) for _ in range(pop_size)
    ]
    population = [(g, score(g, 0)) for g, _ in population]

    generation = 0
    while len(records) < budget:
        generation += 1
        objectives = [rec.objectives.as_tuple() for _, rec in population]
        fronts = fast_non_dominated_sort(objectives)
        ranks = [0] * len(population)
        crowd = [0.0] * len(population)
        for rank, front in enumerate(fronts):
            dists = crowding_distance([objectives[i] for i in front])
            for i, d in zip(front, dists):
                ranks[i] = rank
                crowd[i] = d

        n_offspring = min(pop_size, budget - len(records))
        offspring_genotypes = []
        while len(offspring_genotypes) < n_offspring:
            p1 = population[_tournament(rng, ranks, crowd)][0]
            p2 = population[_tournament(rng, ranks, crowd)][0]
            c1, c2 = sbx_crossover(
                p1,
                p2,
                lowers,
                uppers,
                config.crossover_rate,
                config.crossover_distribution_index,
                rng,
            )
            for child in (c1, c2):
                child = polynomial_mutation(
                    child,
                    lowers,
                    uppers,
                    mutation_rate,
                    config.mutation_distribution_index,
                    rng,
                )
                offspring_genotypes.append(child)
        offspring_genotypes = offspring_genotypes[:n_offspring]
        offspring = [(g, score(g, generation)) for g in offspring_genotypes]

        # (mu + lambda) environmental selection by rank, then crowding.
        combined = population + offspring
        combined_obj = [rec.objectives.as_tuple() for _, rec in combined]
        fronts = fast_non_dominated_sort(combined_obj)
        survivors: list[int] = []
        for front in fronts:
            if len(survivors) + len(front) <= pop_size:
                survivors.extend(front)
            else:
                dists = crowding_distance([combined_obj[i] for i in front])
                by_crowding = sorted(
                    zip(front, dists), key=lambda t: (-t[1], t[0])
                )
                survivors.extend(
                    i for i, _ in by_crowding[: pop_size - len(survivors)]
                )
                break
        population = [combined[i] for i in survivors]

    # result set: the final population (its nondominated subset is the front)
    index_of = {id(rec): i for i, rec in enumerate(records)}
    return _finish_archive(
        config, records, [index_of[id(rec)] for _, rec in population]
    )


def fuzzer_fitness_score(
    records: Sequence[EvaluationRecord],
    weights: tuple[float, float, float] = FUZZER_WEIGHTS,
) -> list[float]:
    """Weighted min-max normalized score in [0, 1]; higher = better candidate.

    Every objective is oriented so that smaller raw values (more dangerous,
    smaller variation, fewer changes) score higher.  A zero-span objective
    contributes the neutral 0.5.
    """
    total = sum(weights)
    w = tuple(x / total for x in weights)
    columns = [
        [r.objectives.f_safe for r in records],
        [r.objectives.f_diff for r in records],
        [float(r.objectives.f_num_diff) for r in records],
    ]
    scores = [0.0] * len(records)
    for col, weight in zip(columns, w):
        lo, hi = min(col), max(col)
        span = hi - lo
        for i, v in enumerate(col):
            component = 0.5 if span == 0.0 else (hi - v) / span
            scores[i] += weight * component
    return scores


def fuzzer_update_window(
    table: CharacteristicTable,
    unsafe: Sequence[EvaluationRecord],
    ranges: list[tuple[float, float]],
    max_num: int,
) -> tuple[list[tuple[float, float]], int]:
    """Range and change-count update from one window's unsafe records.

    Per characteristic, the mean of increased filtered values becomes the
    next upper bound and the mean of decreased ones the next lower bound;
    a side with no observed change keeps the original domain bound.  The
    change-count cap becomes the mean number of changed characteristics.
    """
    if not unsafe:
        return list(ranges), max_num
    new_ranges = []
    for i, spec in enumerate(table.specs):
        increased = [r.filtered[i] for r in unsafe if r.filtered[i] > spec.original]
        decreased = [r.filtered[i] for r in unsafe if r.filtered[i] < spec.original]
        upper = sum(increased) / len(increased) if increased else spec.upper
        lower = sum(decreased) / len(decreased) if decreased else spec.lower
        new_ranges.append((lower, upper))
    mean_count = sum(r.objectives.f_num_diff for r in unsafe) / len(unsafe)
    new_max = max(1, int(round(mean_count)))
    return new_ranges, new_max


def run_safefuzzer(
    config: SearchConfig, ctx: EvaluationContext, evaluate: Evaluator | None = None
) -> RunArchive:
    if config.algorithm != "safefuzzer":
        raise ValueError("config.algorithm must be 'safefuzzer'")
    evaluate = evaluate or ctx.evaluate
    rng = np.random.default_rng(config.seed)
    table = ctx.table
    n_vars = len(table)
    originals = table.originals
    baseline = ctx.evaluate_original().safety.safety_degree

    ranges = [(s.lower, s.upper) for s in table.specs]
    max_num = n_vars
    pop_size = config.population_size
    budget = config.max_evaluations

    records: list[EvaluationRecord] = []
    window: list[EvaluationRecord] = []
    top_set: frozenset[int] | None = None
    frozen = 0
    converged = False
    generation = 0

    while len(records) < budget and not converged:
        n_this_gen = min(pop_size, budget - len(records))
        for _ in range(n_this_gen):
            if generation == 0:
                raw = _uniform_assignment(table, rng)
            else:
                count = int(rng.integers(1, max_num + 1))
                chosen = rng.choice(n_vars, size=count, replace=False)
                values = list(originals)
                for i in sorted(int(c) for c in chosen):
                    lo, hi = ranges[i]
                    values[i] = float(rng.uniform(lo, hi))
                raw = tuple(values)
            rec = evaluate(raw, generation)
            records.append(rec)
            window.append(rec)

        if len(records) > FUZZER_CONVERGENCE_MIN_EVALS:
            scores = fuzzer_fitness_score(records)
            order = sorted(range(len(records)), key=lambda i: (-scores[i], i))
            current_top = frozenset(order[:pop_size])
            if top_set is not None and current_top == top_set:
                frozen += 1
            else:
                frozen = 0
            top_set = current_top
            if frozen >= FUZZER_FROZEN_GENERATIONS:
                converged = True

        generation += 1
        if generation % FUZZER_WINDOW_GENERATIONS == 0:
            unsafe = [
                r for r in window if r.safety.safety_degree < baseline
            ]
            ranges, max_num = fuzzer_update_window(table, unsafe, ranges, max_num)
            window = []

    # result set: the population-size best by weighted fitness score
    scores = fuzzer_fitness_score(records)
    order = sorted(range(len(records)), key=lambda i: (-scores[i], i))
    archive = _finish_archive(config, records, order[:pop_size])
    archive.converged_early = converged
    return archive


ENGINES = {
    "nsga2": run_nsga2,
    "random": run_random_search,
    "safefuzzer": run_safefuzzer,
}


def run_engine(
    config: SearchConfig, ctx: EvaluationContext, evaluate: Evaluator | None = None
) -> RunArchive:
    return ENGINES[config.algorithm](config, ctx, evaluate)

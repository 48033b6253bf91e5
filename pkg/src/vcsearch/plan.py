"""Experiment plans: parse, run (algorithms x seeds) and report.

A plan is an INI file naming a characteristic table, a scenario, a seed
list and one section per algorithm.  Running it yields one JSONL archive
per (algorithm, seed), a baseline record and a manifest; reporting turns a
set of archives into the quality and characteristic-rank tables.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .analysis import (
    changed_count_histogram,
    pooled_histogram,
    select_unsafe,
    selection_rank_table,
    top_combinations,
    value_change_table,
    write_combinations_csv,
    write_histogram_csv,
    write_rank_table_csv,
    write_value_change_csv,
)
from .archive import (
    LoadedArchive,
    load_archive,
    save_archive,
    table_hash,
    write_manifest,
)
from .bridge import run_external
from .characteristics import (
    CharacteristicTable,
    builtin_table,
    clamp_assignment,
    load_table,
    validate_table,
)
from .engines import ALGORITHMS, RunArchive, SearchConfig, run_engine
from .objectives import EvaluationContext, EvaluationRecord
from .quality import build_reference_front, igd, mann_whitney_u, vargha_delaney_a12
from .simulator import ScenarioConfig


class PlanError(ValueError):
    """Parse or semantic problem in an experiment plan."""


class ReportError(RuntimeError):
    """Archives cannot be reported together (or are unreadable)."""


_PLAN_KEYS = {
    "table",
    "scenario",
    "weather",
    "seeds",
    "output_dir",
    "backend",
    "th_safe",
    "ttc_star",
    "horizon",
    "time_step",
}
_ALGO_KEYS = {
    "population_size",
    "max_evaluations",
    "crossover_rate",
    "crossover_distribution_index",
    "mutation_rate",
    "mutation_distribution_index",
}


@dataclass
class ExperimentPlan:
    table: CharacteristicTable
    scenario: ScenarioConfig
    algorithms: list[SearchConfig]  # seed field is a placeholder (0)
    seeds: list[int]
    backend: str = "internal"  # "internal" or "external:HOST:PORT"
    output_dir: Path = Path("runs")
    th_safe: float | str = "baseline"


def _get_float(section, key, plan_path, default=None):
    if key not in section:
        return default
    try:
        return float(section[key])
    except ValueError as exc:
        raise PlanError(f"{plan_path} [{section.name}] {key}: {exc}") from exc


def parse_plan(path: str | Path) -> ExperimentPlan:
    path = Path(path)
    if not path.exists():
        raise PlanError(f"plan file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(str(path))
    except configparser.Error as exc:
        raise PlanError(f"{path}: {exc}") from exc

    if "plan" not in parser:
        raise PlanError(f"{path}: missing [plan] section")
    plan_sec = parser["plan"]
    unknown = sorted(set(plan_sec) - _PLAN_KEYS)
    if unknown:
        raise PlanError(f"{path} [plan]: unknown keys {unknown}")
    for key in ("table", "scenario", "seeds"):
        if key not in plan_sec:
            raise PlanError(f"{path} [plan]: missing key {key!r}")

    table_ref = plan_sec["table"]
    if table_ref.endswith(".ini"):
        table_path = Path(table_ref)
        if not table_path.is_absolute():
            table_path = path.parent / table_path
        table = load_table(table_path)
    else:
        table = builtin_table(table_ref)
    issues = validate_table(table)
    if issues:
        raise PlanError(f"{path}: invalid table: " + "; ".join(map(str, issues)))

    kind = plan_sec["scenario"]
    weather = plan_sec.get("weather", "sun")
    overrides = {}
    for key in ("ttc_star", "horizon", "time_step"):
        value = _get_float(plan_sec, key, path)
        if value is not None:
            overrides[key] = value
    try:
        if kind == "pedestrian-crossing":
            scenario = ScenarioConfig.pedestrian_crossing(weather, **overrides)
        elif kind == "lead-vehicle-stopped":
            scenario = ScenarioConfig.lead_vehicle_stopped(weather, **overrides)
        else:
            raise PlanError(f"{path} [plan] scenario: unknown kind {kind!r}")
    except ValueError as exc:
        raise PlanError(f"{path} [plan]: {exc}") from exc

    try:
        seeds = [int(s) for s in plan_sec["seeds"].replace(",", " ").split()]
    except ValueError as exc:
        raise PlanError(f"{path} [plan] seeds: {exc}") from exc
    if not seeds:
        raise PlanError(f"{path} [plan] seeds: at least one seed required")
    if len(set(seeds)) != len(seeds):
        raise PlanError(f"{path} [plan] seeds: seeds must be unique")

    backend = plan_sec.get("backend", "internal")
    if backend != "internal" and not backend.startswith("external:"):
        raise PlanError(
            f"{path} [plan] backend: must be 'internal' or 'external:HOST:PORT'"
        )

    th_raw = plan_sec.get("th_safe", "baseline")
    th_safe: float | str = "baseline"
    if th_raw != "baseline":
        try:
            th_safe = float(th_raw)
        except ValueError as exc:
            raise PlanError(f"{path} [plan] th_safe: {exc}") from exc

    algorithms = []
    for section in parser.sections():
        if section == "plan":
            continue
        if not section.startswith("algorithm."):
            raise PlanError(f"{path}: unknown section [{section}]")
        name = section.removeprefix("algorithm.")
        if name not in ALGORITHMS:
            raise PlanError(
                f"{path} [{section}]: unknown algorithm {name!r} "
                f"(expected one of {sorted(ALGORITHMS)})"
            )
        sec = parser[section]
        unknown = sorted(set(sec) - _ALGO_KEYS)
        if unknown:
            raise PlanError(f"{path} [{section}]: unknown keys {unknown}")
        kwargs = {}
        for key in ("population_size", "max_evaluations"):
            if key in sec:
                try:
                    kwargs[key] = int(sec[key])
                except ValueError as exc:
                    raise PlanError(f"{path} [{section}] {key}: {exc}") from exc
                if kwargs[key] <= 0:
                    raise PlanError(
                        f"{path} [{section}] {key}: must be positive"
                    )
        for key in (
            "crossover_rate",
            "crossover_distribution_index",
            "mutation_rate",
            "mutation_distribution_index",
        ):
            value = _get_float(sec, key, path)
            if value is not None:
                kwargs[key] = value
        try:
            algorithms.append(SearchConfig(algorithm=name, seed=0, **kwargs))
        except ValueError as exc:
            raise PlanError(f"{path} [{section}]: {exc}") from exc
    if not algorithms:
        raise PlanError(f"{path}: at least one [algorithm.*] section required")

    output_dir = Path(plan_sec.get("output_dir", "runs"))
    if not output_dir.is_absolute():
        output_dir = path.parent / output_dir
    return ExperimentPlan(
        table=table,
        scenario=scenario,
        algorithms=algorithms,
        seeds=seeds,
        backend=backend,
        output_dir=output_dir,
        th_safe=th_safe,
    )


class _ExternalBackend:
    """Picklable simulate() replacement that talks to a bridge endpoint."""

    def __init__(self, endpoint: str):
        self.endpoint = endpoint

    def __call__(self, params, scenario):
        return run_external(self.endpoint, params, scenario)


def _make_context(
    table: CharacteristicTable, scenario: ScenarioConfig, backend: str
) -> EvaluationContext:
    if backend == "internal":
        return EvaluationContext(table=table, scenario=scenario)
    endpoint = backend.removeprefix("external:")
    return EvaluationContext(
        table=table, scenario=scenario, backend=_ExternalBackend(endpoint)
    )


def _replay_evaluator(ctx: EvaluationContext, cached: list[EvaluationRecord]):
    """Evaluator that serves the cached record for each call as long as the
    genotype matches, falling back to real evaluation afterwards."""
    state = {"i": 0}

    def evaluate(raw, generation=0):
        i = state["i"]
        state["i"] += 1
        if i < len(cached):
            rec = cached[i]
            if (
                tuple(clamp_assignment(raw, ctx.table)) == rec.raw
                and rec.generation == generation
            ):
                return rec
        return ctx.evaluate(raw, generation)

    return evaluate


def _execute_run(args) -> tuple[str, int, str, str | None]:
    """Worker: run one (algorithm, seed) and write its archive.

    Returns (algorithm, seed, path, error-or-None).
    """
    table, scenario, backend, config, out_path = args
    out_path = Path(out_path)
    try:
        ctx = _make_context(table, scenario, backend)
        evaluate = None
        if out_path.exists():
            try:
                loaded = load_archive(out_path, allow_partial=True)
                same = (
                    loaded.table_hash == table_hash(table)
                    and loaded.archive.config == config
                )
                if same and loaded.complete:
                    return (config.algorithm, config.seed, str(out_path), None)
                if same and loaded.archive.evaluations:
                    evaluate = _replay_evaluator(ctx, loaded.archive.evaluations)
            except Exception:
                evaluate = None  # unreadable: recompute from scratch
        archive = run_engine(config, ctx, evaluate)
        save_archive(archive, out_path, table, scenario)
        return (config.algorithm, config.seed, str(out_path), None)
    except Exception as exc:
        return (config.algorithm, config.seed, str(out_path), f"{type(exc).__name__}: {exc}")


@dataclass
class PlanResult:
    archive_paths: list[Path]
    baseline_path: Path
    manifest_path: Path
    failures: dict[tuple[str, int], str] = field(default_factory=dict)


def run_plan(
    plan: ExperimentPlan, parallel: int = 1, seed_offset: int = 0
) -> PlanResult:
    out = plan.output_dir
    out.mkdir(parents=True, exist_ok=True)

    # One baseline simulation per plan.
    ctx = _make_context(plan.table, plan.scenario, plan.backend)
    baseline = ctx.evaluate_original()
    baseline_path = out / "baseline.json"
    baseline_path.write_text(
        json.dumps(
            {
                "table_hash": table_hash(plan.table),
                "objectives": list(baseline.objectives.as_tuple()),
                "safety": dataclasses.asdict(baseline.safety),
                "trace_digest": baseline.trace_digest,
            },
            indent=2,
        )
        + "\n"
    )

    jobs = []
    for template in plan.algorithms:
        for seed in plan.seeds:
            config = replace(template, seed=seed + seed_offset)
            name = f"{config.algorithm}-seed{config.seed}.jsonl"
            jobs.append(
                (plan.table, plan.scenario, plan.backend, config, str(out / name))
            )

    failures: dict[tuple[str, int], str] = {}
    paths: list[Path] = []
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_execute_run, jobs))
    else:
        results = [_execute_run(job) for job in jobs]
    for algorithm, seed, pathname, error in results:
        if error is None:
            paths.append(Path(pathname))
        else:
            failures[(algorithm, seed)] = error

    manifest_path = write_manifest(out, paths + [baseline_path])
    return PlanResult(
        archive_paths=paths,
        baseline_path=baseline_path,
        manifest_path=manifest_path,
        failures=failures,
    )


# ---------------------------------------------------------------------------
# Reporting

#: Orientation of each safety metric when picking a run's most dangerous
#: solution: safety_degree is minimized, the exposure metrics are maximized.
_METRIC_WORST = {
    "safety_degree": min,
    "tet": max,
    "tit": max,
    "ave_dece": max,
}


def report(
    archive_paths: Sequence[str | Path],
    th_safe: float | str = "baseline",
    output_dir: str | Path = "report",
) -> dict[str, Path]:
    """Emit the quality and characteristic-rank tables for a set of archives."""
    if not archive_paths:
        raise ReportError("no archives to report")
    loaded: list[LoadedArchive] = []
    for p in sorted(str(p) for p in archive_paths):
        try:
            loaded.append(load_archive(p))
        except Exception as exc:
            raise ReportError(f"cannot load archive {p}: {exc}") from exc
    hashes = {la.table_hash for la in loaded}
    if len(hashes) > 1:
        raise ReportError(
            "archives use different characteristic tables; report them separately"
        )
    table = loaded[0].table
    scenario = loaded[0].scenario
    archives = [la.archive for la in loaded]

    ctx = EvaluationContext(table=table, scenario=scenario)
    baseline = ctx.evaluate_original()
    if th_safe == "baseline":
        th_value = baseline.safety.safety_degree
    else:
        th_value = float(th_safe)

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    emitted: dict[str, Path] = {}

    # IGD per run against the merged reference front.
    reference = build_reference_front([a.final_front() for a in archives])
    igd_rows = [
        (a.config.algorithm, a.config.seed, igd(a.final_front(), reference))
        for a in archives
    ]
    igd_path = out / "igd_per_run.csv"
    with open(igd_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algorithm", "seed", "igd"])
        for algorithm, seed, value in igd_rows:
            writer.writerow([algorithm, seed, f"{value:.12g}"])
    emitted["igd_per_run"] = igd_path

    by_algorithm: dict[str, list[float]] = {}
    for algorithm, _, value in igd_rows:
        by_algorithm.setdefault(algorithm, []).append(value)

    # Pairwise algorithm comparison on IGD.
    pair_path = out / "igd_comparison.csv"
    with open(pair_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algorithm_a", "algorithm_b", "p_value", "a12"])
        names = sorted(by_algorithm)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                _, p = mann_whitney_u(by_algorithm[a], by_algorithm[b])
                a12 = vargha_delaney_a12(by_algorithm[a], by_algorithm[b])
                writer.writerow([a, b, f"{p:.6g}", f"{a12:.6g}"])
    emitted["igd_comparison"] = pair_path

    # Per-run most dangerous value of each safety metric vs. the baseline.
    metrics_path = out / "metrics_vs_baseline.csv"
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["algorithm", "metric", "baseline", "median_worst", "p_value", "a12"]
        )
        for algorithm in sorted(by_algorithm):
            runs = [a for a in archives if a.config.algorithm == algorithm]
            for metric, worst in _METRIC_WORST.items():
                values = [
                    worst(getattr(r.safety, metric) for r in a.evaluations)
                    for a in runs
                ]
                base_value = getattr(baseline.safety, metric)
                base_sample = [base_value] * len(values)
                _, p = mann_whitney_u(values, base_sample)
                a12 = vargha_delaney_a12(values, base_sample)
                values_sorted = sorted(values)
                mid = len(values_sorted) // 2
                median = (
                    values_sorted[mid]
                    if len(values_sorted) % 2
                    else 0.5 * (values_sorted[mid - 1] + values_sorted[mid])
                )
                writer.writerow(
                    [
                        algorithm,
                        metric,
                        f"{base_value:.6g}",
                        f"{median:.6g}",
                        f"{p:.6g}",
                        f"{a12:.6g}",
                    ]
                )
    emitted["metrics_vs_baseline"] = metrics_path

    # Characteristic-rank analyses over the unsafe front solutions.
    unsafe = select_unsafe(archives, th_value)
    n = len(table)
    rank = selection_rank_table(unsafe, table)
    write_rank_table_csv(rank, out / "selection_ranks.csv")
    emitted["selection_ranks"] = out / "selection_ranks.csv"

    hist = changed_count_histogram(unsafe, n)
    write_histogram_csv(hist, out / "changed_count_histogram.csv")
    emitted["changed_count_histogram"] = out / "changed_count_histogram.csv"

    combo_path = out / "top_combinations.csv"
    with open(combo_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bucket", "combination", "count", "percentage"])
        for j in range(1, n + 1):
            for combo, count, pct in top_combinations(unsafe, table, j, 3):
                writer.writerow([j, "+".join(combo), count, f"{pct:.2f}"])
    emitted["top_combinations"] = combo_path

    stats = value_change_table(unsafe, table, baseline.safety)
    write_value_change_csv(stats, out / "value_changes.csv")
    emitted["value_changes"] = out / "value_changes.csv"

    summary = {
        "archives": len(archives),
        "table": table.label,
        "scenario": scenario.kind,
        "weather": scenario.weather,
        "th_safe": th_value,
        "baseline_safety_degree": baseline.safety.safety_degree,
        "unsafe_solutions": len(unsafe.records),
        "pooled_histogram": pooled_histogram(unsafe, n),
        "median_igd": {
            name: sorted(vals)[len(vals) // 2]
            for name, vals in by_algorithm.items()
        },
    }
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    emitted["summary"] = summary_path
    return emitted

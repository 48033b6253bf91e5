"""Post-hoc analyses over run archives: unsafe-solution selection,
changed-count histograms, characteristic selection ranks, top combinations
and value-change statistics.

All aggregation is plain recounting over evaluation records; every
percentage can be re-derived with a brute-force loop (the tests do).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .characteristics import CharacteristicTable
from .engines import RunArchive
from .metrics import SafetyRecord
from .objectives import EvaluationRecord

RunTag = tuple[str, int]  # (algorithm, seed)


@dataclass
class UnsafeSet:
    """Evaluation records with safety_degree strictly below th_safe."""

    records: list[EvaluationRecord]
    tags: list[RunTag]  # parallel to records
    th_safe: float


def select_unsafe(
    archives: Sequence[RunArchive], th_safe: float, fronts_only: bool = True
) -> UnsafeSet:
    """Collect unsafe solutions from the archives.

    With fronts_only the scan is restricted to each run's final Pareto
    front (the unsafe part of the front is what the characteristic-rank
    analyses are defined over); otherwise every evaluation is scanned.
    Duplicates (same filtered assignment) collapse within a run but are
    kept across runs.
    """
    records: list[EvaluationRecord] = []
    tags: list[RunTag] = []
    for archive in archives:
        tag = (archive.config.algorithm, archive.config.seed)
        indices = (
            archive.final_front_indices
            if fronts_only
            else range(len(archive.evaluations))
        )
        seen: set[tuple[float, ...]] = set()
        for i in indices:
            rec = archive.evaluations[i]
            if rec.safety.safety_degree >= th_safe:
                continue
            if rec.filtered in seen:
                continue
            seen.add(rec.filtered)
            records.append(rec)
            tags.append(tag)
    return UnsafeSet(records=records, tags=tags, th_safe=th_safe)


def changed_count_histogram(
    unsafe: UnsafeSet, n_chars: int
) -> dict[RunTag, dict[int, int]]:
    """Per run: count of unsafe solutions with exactly j changes, j = 1..n."""
    hist: dict[RunTag, dict[int, int]] = {}
    for rec, tag in zip(unsafe.records, unsafe.tags):
        per_run = hist.setdefault(tag, {j: 0 for j in range(1, n_chars + 1)})
        j = rec.objectives.f_num_diff
        if 1 <= j <= n_chars:
            per_run[j] += 1
    return hist


def pooled_histogram(unsafe: UnsafeSet, n_chars: int) -> dict[int, int]:
    pooled = {j: 0 for j in range(1, n_chars + 1)}
    for rec in unsafe.records:
        j = rec.objectives.f_num_diff
        if 1 <= j <= n_chars:
            pooled[j] += 1
    return pooled


def modal_bucket(histogram: dict[int, int]) -> int | None:
    """Bucket with the highest count; lowest j wins ties; None when empty."""
    best = None
    for j in sorted(histogram):
        if histogram[j] > 0 and (best is None or histogram[j] > histogram[best]):
            best = j
    return best


def _selected_names(rec: EvaluationRecord, table: CharacteristicTable):
    return tuple(
        table.names[i]
        for i, (o, f) in enumerate(zip(table.originals, rec.filtered))
        if o != f
    )


@dataclass
class RankRow:
    name: str
    per_bucket: dict[int, float]  # j -> percentage within the j bucket
    any_pct: float
    rank: int


@dataclass
class RankTable:
    rows: list[RankRow]  # in table order
    bucket_sizes: dict[int, int]
    total: int


def selection_rank_table(unsafe: UnsafeSet, table: CharacteristicTable) -> RankTable:
    """Percentage of unsafe solutions selecting each characteristic, per
    changed-count bucket and overall; ranked by the overall percentage with
    ties sharing a rank."""
    n = len(table)
    bucket_sizes = {j: 0 for j in range(1, n + 1)}
    bucket_hits = {name: {j: 0 for j in range(1, n + 1)} for name in table.names}
    any_hits = {name: 0 for name in table.names}
    for rec in unsafe.records:
        j = rec.objectives.f_num_diff
        if 1 <= j <= n:
            bucket_sizes[j] += 1
        for name in _selected_names(rec, table):
            any_hits[name] += 1
            if 1 <= j <= n:
                bucket_hits[name][j] += 1

    total = len(unsafe.records)
    any_pct = {
        name: (100.0 * any_hits[name] / total if total else 0.0)
        for name in table.names
    }
    # Competition ranking on the overall percentage, ties share a rank.
    by_pct = sorted(table.names, key=lambda name: -any_pct[name])
    ranks: dict[str, int] = {}
    for pos, name in enumerate(by_pct):
        if pos > 0 and any_pct[name] == any_pct[by_pct[pos - 1]]:
            ranks[name] = ranks[by_pct[pos - 1]]
        else:
            ranks[name] = pos + 1

    rows = []
    for name in table.names:
        per_bucket = {
            j: (
                100.0 * bucket_hits[name][j] / bucket_sizes[j]
                if bucket_sizes[j]
                else 0.0
            )
            for j in range(1, n + 1)
        }
        rows.append(RankRow(name, per_bucket, any_pct[name], ranks[name]))
    return RankTable(rows=rows, bucket_sizes=bucket_sizes, total=total)


def top_combinations(
    unsafe: UnsafeSet, table: CharacteristicTable, j: int, k: int
) -> list[tuple[tuple[str, ...], int, float]]:
    """The k most frequent selected-characteristic sets among solutions with
    exactly j changes, with counts and percentages of the j bucket.
    Frequency ties break lexicographically by characteristic order."""
    if not 1 <= j <= len(table):
        raise ValueError(f"bucket {j} outside 1..{len(table)}")
    if k < 1:
        raise ValueError("k must be >= 1")
    counts: dict[tuple[str, ...], int] = {}
    bucket = 0
    for rec in unsafe.records:
        if rec.objectives.f_num_diff != j:
            continue
        bucket += 1
        combo = _selected_names(rec, table)
        counts[combo] = counts.get(combo, 0) + 1
    index = {name: i for i, name in enumerate(table.names)}
    ordered = sorted(
        counts.items(),
        key=lambda kv: (-kv[1], tuple(index[n] for n in kv[0])),
    )
    return [
        (combo, count, 100.0 * count / bucket) for combo, count in ordered[:k]
    ]


@dataclass
class SignSplit:
    """Mean percentage change and mean signed delta for one direction;
    None-valued splits mean no member moved that way."""

    count: int
    mean_pc: float
    mean_delta: float


@dataclass
class BucketStats:
    size: int
    # characteristic name -> (positive-delta split or None, negative or None)
    per_char: dict[str, tuple[SignSplit | None, SignSplit | None]]
    avg_sd_md: float | None  # mean (th_safe - safety_degree), non-collision members
    avg_sd_cs: float | None  # mean collision speed, collision members
    mean_tet_delta: float | None
    mean_tit_delta: float | None
    mean_ave_dece_delta: float | None


def value_change_table(
    unsafe: UnsafeSet,
    table: CharacteristicTable,
    baseline: SafetyRecord,
) -> dict[int, BucketStats]:
    """Per changed-count bucket: sign-split mean PC/delta per characteristic
    and aggregate safety deltas against the baseline record."""
    orig = table.originals
    out: dict[int, BucketStats] = {}
    for j in range(1, len(table) + 1):
        members = [r for r in unsafe.records if r.objectives.f_num_diff == j]
        per_char: dict[str, tuple[SignSplit | None, SignSplit | None]] = {}
        for i, name in enumerate(table.names):
            pos = [
                (abs(orig[i] - r.filtered[i]) / orig[i], r.filtered[i] - orig[i])
                for r in members
                if r.filtered[i] > orig[i]
            ]
            neg = [
                (abs(orig[i] - r.filtered[i]) / orig[i], r.filtered[i] - orig[i])
                for r in members
                if r.filtered[i] < orig[i]
            ]

            def split(rows):
                if not rows:
                    return None
                return SignSplit(
                    count=len(rows),
                    mean_pc=sum(pc for pc, _ in rows) / len(rows),
                    mean_delta=sum(d for _, d in rows) / len(rows),
                )

            per_char[name] = (split(pos), split(neg))

        non_collision = [r for r in members if r.safety.safety_degree > 0]
        collision = [r for r in members if r.safety.safety_degree <= 0]
        avg_sd_md = (
            sum(unsafe.th_safe - r.safety.safety_degree for r in non_collision)
            / len(non_collision)
            if non_collision
            else None
        )
        avg_sd_cs = (
            sum(-r.safety.safety_degree for r in collision) / len(collision)
            if collision
            else None
        )

        def mean_delta(attr):
            if not members:
                return None
            return sum(
                getattr(r.safety, attr) - getattr(baseline, attr) for r in members
            ) / len(members)

        out[j] = BucketStats(
            size=len(members),
            per_char=per_char,
            avg_sd_md=avg_sd_md,
            avg_sd_cs=avg_sd_cs,
            mean_tet_delta=mean_delta("tet"),
            mean_tit_delta=mean_delta("tit"),
            mean_ave_dece_delta=mean_delta("ave_dece"),
        )
    return out


# ---------------------------------------------------------------------------
# CSV emission

def write_rank_table_csv(rank: RankTable, path: str | Path) -> None:
    buckets = sorted(rank.bucket_sizes)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["characteristic"] + [f"j={j}" for j in buckets] + ["any", "rank"]
        )
        for row in rank.rows:
            writer.writerow(
                [row.name]
                + [f"{row.per_bucket[j]:.2f}" for j in buckets]
                + [f"{row.any_pct:.2f}", row.rank]
            )


def write_histogram_csv(
    hist: dict[RunTag, dict[int, int]], path: str | Path
) -> None:
    buckets = sorted({j for per_run in hist.values() for j in per_run})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algorithm", "seed"] + [f"j={j}" for j in buckets])
        for (algorithm, seed), per_run in sorted(hist.items()):
            writer.writerow(
                [algorithm, seed] + [per_run.get(j, 0) for j in buckets]
            )


def write_combinations_csv(
    combos: list[tuple[tuple[str, ...], int, float]], path: str | Path
) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["combination", "count", "percentage"])
        for combo, count, pct in combos:
            writer.writerow(["+".join(combo), count, f"{pct:.2f}"])


def write_value_change_csv(
    stats: dict[int, BucketStats], path: str | Path
) -> None:
    def fmt(x):
        return "" if x is None else f"{x:.6g}"

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "bucket",
                "size",
                "characteristic",
                "direction",
                "count",
                "mean_pc",
                "mean_delta",
                "avgSD_mD",
                "avgSD_cS",
                "mean_tet_delta",
                "mean_tit_delta",
                "mean_ave_dece_delta",
            ]
        )
        for j, bucket in sorted(stats.items()):
            aggregates = [
                fmt(bucket.avg_sd_md),
                fmt(bucket.avg_sd_cs),
                fmt(bucket.mean_tet_delta),
                fmt(bucket.mean_tit_delta),
                fmt(bucket.mean_ave_dece_delta),
            ]
            wrote_aggregate = False
            for name, (pos, neg) in bucket.per_char.items():
                for direction, split in (("+", pos), ("-", neg)):
                    if split is None:
                        continue
                    writer.writerow(
                        [
                            j,
                            bucket.size,
                            name,
                            direction,
                            split.count,
                            fmt(split.mean_pc),
                            fmt(split.mean_delta),
                        ]
                        + (aggregates if not wrote_aggregate else [""] * 5)
                    )
                    wrote_aggregate = True
            if not wrote_aggregate and bucket.size:
                writer.writerow(
                    [j, bucket.size, "", "", "", "", ""] + aggregates
                )

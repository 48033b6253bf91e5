import math

import pytest

from vcsearch.analysis import (
    changed_count_histogram,
    modal_bucket,
    pooled_histogram,
    select_unsafe,
    selection_rank_table,
    top_combinations,
    value_change_table,
)
from vcsearch.engines import RunArchive, SearchConfig
from vcsearch.metrics import SafetyRecord

from conftest import make_record


def archive_of(records, algorithm="nsga2", seed=0, fronts=None):
    config = SearchConfig(
        algorithm=algorithm,
        population_size=1,
        max_evaluations=max(len(records), 1),
        seed=seed,
    )
    return RunArchive(
        config=config,
        evaluations=records,
        final_front_indices=list(range(len(records))) if fronts is None else fronts,
    )


@pytest.fixture
def small_archives(carla):
    up = lambda name: carla.specs[carla.index_of(name)].upper
    low = lambda name: carla.specs[carla.index_of(name)].lower
    a0 = archive_of(
        [
            make_record(carla, {"mass": up("mass")}, safety_degree=9.0),
            make_record(
                carla,
                {"mass": up("mass"), "maxBrakeTorque": low("maxBrakeTorque")},
                safety_degree=8.0,
            ),
            make_record(carla, {"radius": up("radius")}, safety_degree=12.0),  # safe
            make_record(carla, {"mass": up("mass")}, safety_degree=9.0),  # duplicate
        ],
        seed=0,
    )
    a1 = archive_of(
        [
            make_record(
                carla,
                {"maxBrakeTorque": low("maxBrakeTorque")},
                safety_degree=-1.0,
                tet=0.5,
            ),
            make_record(carla, {"mass": up("mass")}, safety_degree=9.0),
        ],
        seed=1,
    )
    return [a0, a1]


def test_select_unsafe_strict_and_dedup(carla, small_archives):
    unsafe = select_unsafe(small_archives, 10.0)
    # duplicate within run 0 collapses; the safe record is excluded;
    # the identical mass solution in run 1 is kept (across-run duplicates stay)
    assert len(unsafe.records) == 4
    assert all(r.safety.safety_degree < 10.0 for r in unsafe.records)
    assert unsafe.tags.count(("nsga2", 0)) == 2
    assert unsafe.tags.count(("nsga2", 1)) == 2


def test_select_unsafe_boundary_excluded(carla, small_archives):
    unsafe = select_unsafe(small_archives, 9.0)
    assert all(r.safety.safety_degree < 9.0 for r in unsafe.records)
    assert len(unsafe.records) == 2  # the 9.0 records sit exactly on Th_safe


def test_select_unsafe_sentinel_and_monotonicity(carla, small_archives):
    assert select_unsafe(small_archives, -math.inf).records == []
    small = {r.filtered for r in select_unsafe(small_archives, 9.0).records}
    large = {r.filtered for r in select_unsafe(small_archives, 12.5).records}
    assert small <= large


def test_select_unsafe_all_evaluations(carla, small_archives):
    fronts = select_unsafe(small_archives, 10.0, fronts_only=True)
    small_archives[0].final_front_indices = [0]
    restricted = select_unsafe(small_archives, 10.0, fronts_only=True)
    everything = select_unsafe(small_archives, 10.0, fronts_only=False)
    assert len(restricted.records) < len(fronts.records)
    assert len(everything.records) == len(fronts.records)


def test_changed_count_histogram(carla, small_archives):
    unsafe = select_unsafe(small_archives, 10.0)
    hist = changed_count_histogram(unsafe, len(carla))
    assert hist[("nsga2", 0)][1] == 1
    assert hist[("nsga2", 0)][2] == 1
    assert hist[("nsga2", 1)][1] == 2
    assert sum(hist[("nsga2", 0)].values()) == 2
    pooled = pooled_histogram(unsafe, len(carla))
    assert pooled[1] == 3 and pooled[2] == 1
    assert modal_bucket(pooled) == 1
    assert modal_bucket({1: 0, 2: 0}) is None


def test_selection_rank_table(carla, small_archives):
    unsafe = select_unsafe(small_archives, 10.0)
    table = selection_rank_table(unsafe, carla)
    rows = {row.name: row for row in table.rows}
    # mass selected in 3 of 4 unsafe solutions, maxBrakeTorque in 2 of 4
    assert rows["mass"].any_pct == pytest.approx(75.0)
    assert rows["maxBrakeTorque"].any_pct == pytest.approx(50.0)
    assert rows["mass"].rank == 1
    assert rows["maxBrakeTorque"].rank == 2
    # bucket percentages: j=1 holds two mass-only and one brake-only solution
    assert rows["mass"].per_bucket[1] == pytest.approx(100.0 * 2 / 3)
    assert rows["maxBrakeTorque"].per_bucket[2] == pytest.approx(100.0)
    # empty buckets render 0
    assert rows["mass"].per_bucket[5] == 0.0
    # never-selected characteristics share the last rank
    assert rows["radius"].rank == rows["dragCoeff"].rank


def test_selection_rank_recount_oracle(carla, small_archives):
    unsafe = select_unsafe(small_archives, 10.0)
    table = selection_rank_table(unsafe, carla)
    for row in table.rows:
        i = carla.index_of(row.name)
        expected = (
            100.0
            * sum(1 for r in unsafe.records if r.filtered[i] != carla.originals[i])
            / len(unsafe.records)
        )
        assert row.any_pct == pytest.approx(expected)


def test_top_combinations(carla, small_archives):
    unsafe = select_unsafe(small_archives, 10.0)
    combos = top_combinations(unsafe, carla, 1, 3)
    assert combos[0][0] == ("mass",)
    assert combos[0][1] == 2
    assert combos[0][2] == pytest.approx(100.0 * 2 / 3)
    assert combos[1][0] == ("maxBrakeTorque",)
    only = top_combinations(unsafe, carla, 2, 5)
    assert only == [(("mass", "maxBrakeTorque"), 1, pytest.approx(100.0))]
    with pytest.raises(ValueError):
        top_combinations(unsafe, carla, 0, 3)


def test_value_change_table(carla, small_archives):
    unsafe = select_unsafe(small_archives, 10.0)
    baseline = SafetyRecord(10.5, 0.0, 0.0, 3.0, 1.5)
    stats = value_change_table(unsafe, carla, baseline)
    bucket1 = stats[1]
    assert bucket1.size == 3
    pos, neg = bucket1.per_char["mass"]
    assert neg is None
    assert pos.count == 2
    assert pos.mean_delta == pytest.approx(2700.0 - 2404.0)
    assert pos.mean_pc == pytest.approx((2700.0 - 2404.0) / 2404.0)
    # the j=1 bucket has one collision (safety -1) and two non-collisions
    assert bucket1.avg_sd_cs == pytest.approx(1.0)
    assert bucket1.avg_sd_md == pytest.approx(10.0 - 9.0)
    assert bucket1.mean_tet_delta == pytest.approx(0.5 / 3)
    # empty buckets have no populations at all
    assert stats[5].size == 0
    assert stats[5].avg_sd_md is None and stats[5].avg_sd_cs is None


def test_value_change_sign_split_recombines(carla):
    up = carla.specs[carla.index_of("mass")].upper
    low = carla.specs[carla.index_of("mass")].lower
    archives = [
        archive_of(
            [
                make_record(carla, {"mass": up}, safety_degree=1.0),
                make_record(carla, {"mass": low}, safety_degree=2.0),
            ]
        )
    ]
    unsafe = select_unsafe(archives, 5.0)
    stats = value_change_table(
        unsafe, carla, SafetyRecord(10.0, 0.0, 0.0, 0.0, 1.5)
    )
    pos, neg = stats[1].per_char["mass"]
    combined = (pos.mean_delta * pos.count + neg.mean_delta * neg.count) / (
        pos.count + neg.count
    )
    direct = ((up - 2404.0) + (low - 2404.0)) / 2
    assert combined == pytest.approx(direct)

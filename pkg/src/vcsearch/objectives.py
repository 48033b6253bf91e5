"""Minimum-variation filter and the three search objectives.

A raw candidate is filtered component-wise: changes smaller than the
characteristic's precision threshold revert to the original value.  The
filtered vector is what gets simulated and scored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .characteristics import Assignment, CharacteristicTable, clamp_assignment
from .metrics import SafetyRecord, safety_record
from .simulator import ScenarioConfig, SimulationTrace, VehicleParams, simulate


class PrecisionError(ValueError):
    """Range width not covered by the precision rule."""


@dataclass(frozen=True)
class PrecisionRule:
    """Ordered (width interval, precision percentage) bands over (0, +inf).

    Percentages are kept as integers so that thresholds computed as
    width * percent / 100 land on the decimal values quoted for the rule
    (e.g. the mass domain [2040, 2700] gives exactly 13.2).
    """

    bands: tuple[tuple[float, float, int], ...]  # (low, high, percent)

    def percent_for(self, width: float) -> int:
        if width > 0:
            for low, high, percent in self.bands:
                if low <= width < high:
                    return percent
        raise PrecisionError(f"range width {width} not covered by precision rule")

    def beta_for(self, width: float) -> float:
        return self.percent_for(width) / 100.0


#: Precision percentages keyed on domain range width, widest bands get the
#: smallest percentage.
DEFAULT_PRECISION_RULE = PrecisionRule(
    bands=(
        (1000.0, float("inf"), 1),
        (100.0, 1000.0, 2),
        (1.0, 100.0, 4),
        (0.0, 1.0, 8),
    )
)


def compute_thresholds(
    table: CharacteristicTable, rule: PrecisionRule = DEFAULT_PRECISION_RULE
) -> tuple[float, ...]:
    """Per-characteristic minimum-variation thresholds beta * (u - l)."""
    return tuple(
        s.range_width * rule.percent_for(s.range_width) / 100.0
        for s in table.specs
    )


def apply_filter(
    raw: Sequence[float], orig: Sequence[float], thresholds: Sequence[float]
) -> Assignment:
    """Keep a changed value only if it moved beyond its threshold."""
    return tuple(
        v_raw if abs(v_orig - v_raw) > th else v_orig
        for v_raw, v_orig, th in zip(raw, orig, thresholds)
    )


@dataclass(frozen=True)
class ObjectiveVector:
    f_safe: float
    f_diff: float
    f_num_diff: int

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.f_safe, self.f_diff, float(self.f_num_diff))


@dataclass(frozen=True)
class EvaluationRecord:
    raw: Assignment
    filtered: Assignment
    objectives: ObjectiveVector
    safety: SafetyRecord
    trace_digest: str
    generation: int = 0


@dataclass
class EvaluationContext:
    """Everything needed to score a candidate: table, thresholds, scenario,
    and a simulation backend."""

    table: CharacteristicTable
    scenario: ScenarioConfig
    thresholds: tuple[float, ...] | None = None
    backend: Callable[[VehicleParams, ScenarioConfig], SimulationTrace] = simulate

    def __post_init__(self):
        if self.thresholds is None:
            self.thresholds = compute_thresholds(self.table)

    def evaluate(self, raw: Sequence[float], generation: int = 0) -> EvaluationRecord:
        raw = clamp_assignment(raw, self.table)
        orig = self.table.originals
        filtered = apply_filter(raw, orig, self.thresholds)
        params = VehicleParams.from_assignment(filtered, self.table)
        trace = self.backend(params, self.scenario)
        safety = safety_record(trace, self.scenario.ttc_star)
        changed = [
            i for i, (v, v2) in enumerate(zip(orig, filtered)) if v2 != v
        ]
        f_diff = max(
            (abs(orig[i] - filtered[i]) / orig[i] for i in changed), default=0.0
        )
        objectives = ObjectiveVector(
            f_safe=safety.safety_degree,
            f_diff=f_diff,
            f_num_diff=len(changed),
        )
        return EvaluationRecord(
            raw=raw,
            filtered=filtered,
            objectives=objectives,
            safety=safety,
            trace_digest=trace.digest(),
            generation=generation,
        )

    def evaluate_original(self) -> EvaluationRecord:
        return self.evaluate(self.table.originals)

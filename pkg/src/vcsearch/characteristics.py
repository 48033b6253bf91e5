"""Characteristic tables, candidate assignments and change accounting.

A characteristic table fixes the genotype layout: every assignment is an
ordered vector of real values, indexed in file order of the table.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence


class DomainError(ValueError):
    """Structural problem with a table, assignment or change computation."""


@dataclass(frozen=True)
class CharacteristicSpec:
    name: str
    unit: str
    original: float
    lower: float
    upper: float

    @property
    def range_width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class CharacteristicTable:
    specs: tuple[CharacteristicSpec, ...]
    label: str = "unnamed"

    def __len__(self) -> int:
        return len(self.specs)

    def __iter__(self):
        return iter(self.specs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs)

    def index_of(self, name: str) -> int:
        for i, s in enumerate(self.specs):
            if s.name == name:
                return i
        raise KeyError(name)

    @property
    def originals(self) -> tuple[float, ...]:
        return tuple(s.original for s in self.specs)

    @property
    def lowers(self) -> tuple[float, ...]:
        return tuple(s.lower for s in self.specs)

    @property
    def uppers(self) -> tuple[float, ...]:
        return tuple(s.upper for s in self.specs)


# An Assignment is a plain tuple of floats, one per table entry, in table order.
Assignment = tuple[float, ...]


@dataclass(frozen=True)
class ChangeRecord:
    name: str
    selected: bool
    pc: float
    delta: float


@dataclass
class ValidationIssue:
    characteristic: str
    rule: str

    def __str__(self) -> str:
        return f"{self.characteristic}: {self.rule}"


def validate_table(table: CharacteristicTable) -> list[ValidationIssue]:
    """Check every spec invariant; returns one issue per violation."""
    issues: list[ValidationIssue] = []
    seen: set[str] = set()
    for spec in table.specs:
        if spec.name in seen:
            issues.append(ValidationIssue(spec.name, "duplicate name"))
        seen.add(spec.name)
        if not spec.lower < spec.upper:
            issues.append(ValidationIssue(spec.name, "empty range"))
            continue
        if not (spec.lower <= spec.original <= spec.upper):
            issues.append(ValidationIssue(spec.name, "original outside domain"))
    return issues


def _require_length(values: Sequence[float], table: CharacteristicTable) -> None:
    if len(values) != len(table):
        raise DomainError(
            f"assignment length {len(values)} != table length {len(table)}"
        )


def clamp_assignment(values: Sequence[float], table: CharacteristicTable) -> Assignment:
    """Clamp each value into its characteristic domain."""
    _require_length(values, table)
    return tuple(
        min(max(v, s.lower), s.upper) for v, s in zip(values, table.specs)
    )


def relative_changes(
    orig: Sequence[float], modified: Sequence[float], table: CharacteristicTable
) -> list[ChangeRecord]:
    """Per-characteristic percentage change and signed delta (new - original)."""
    _require_length(orig, table)
    _require_length(modified, table)
    records = []
    for spec, v, v2 in zip(table.specs, orig, modified):
        if v == 0:
            raise DomainError(f"{spec.name}: original value is zero, pc undefined")
        selected = v2 != v
        pc = abs(v - v2) / abs(v) if selected else 0.0
        delta = v2 - v if selected else 0.0
        records.append(ChangeRecord(spec.name, selected, pc, delta))
    return records


def load_table(path: str | Path) -> CharacteristicTable:
    """Load a characteristic table from an INI-style file.

    Layout: an optional [table] section with a `label` key, then one section
    per characteristic with keys name, unit, original, lower, upper.  Section
    order defines the vector index.
    """
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise DomainError(f"cannot read table file: {path}")
    label = Path(path).stem
    specs = []
    for section in parser.sections():
        if section == "table":
            label = parser.get("table", "label", fallback=label)
            continue
        sec = parser[section]
        missing = [k for k in ("name", "unit", "original", "lower", "upper") if k not in sec]
        if missing:
            raise DomainError(f"section [{section}]: missing keys {missing}")
        extra = [k for k in sec if k not in ("name", "unit", "original", "lower", "upper")]
        if extra:
            raise DomainError(f"section [{section}]: unknown keys {extra}")
        try:
            specs.append(
                CharacteristicSpec(
                    name=sec["name"],
                    unit=sec["unit"],
                    original=float(sec["original"]),
                    lower=float(sec["lower"]),
                    upper=float(sec["upper"]),
                )
            )
        except ValueError as exc:
            raise DomainError(f"section [{section}]: {exc}") from exc
    table = CharacteristicTable(specs=tuple(specs), label=label)
    issues = validate_table(table)
    if issues:
        raise DomainError("; ".join(str(i) for i in issues))
    return table


def builtin_table(name: str) -> CharacteristicTable:
    """Load one of the tables shipped with the package ("carla" or "lgsvl")."""
    data_dir = Path(__file__).parent / "data"
    path = data_dir / f"{name}.ini"
    if not path.exists():
        available = sorted(p.stem for p in data_dir.glob("*.ini"))
        raise DomainError(f"unknown builtin table {name!r}; available: {available}")
    return load_table(path)

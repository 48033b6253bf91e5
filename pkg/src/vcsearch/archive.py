"""Durable JSONL archives for search runs, plus the artifact manifest.

One archive file per run: a header line (config, scenario, characteristic
table), one line per evaluation in submission order, and a footer with the
final-front indices.  The format is append-friendly, so an interrupted run
leaves a readable prefix that a resumed run replays from.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .characteristics import CharacteristicSpec, CharacteristicTable
from .engines import RunArchive, SearchConfig
from .metrics import SafetyRecord
from .objectives import EvaluationRecord, ObjectiveVector
from .simulator import ScenarioConfig

FORMAT_VERSION = 1


class ArchiveError(RuntimeError):
    """Malformed or inconsistent archive file."""


def table_hash(table: CharacteristicTable) -> str:
    payload = json.dumps(
        {
            "label": table.label,
            "specs": [dataclasses.asdict(s) for s in table.specs],
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def _header_line(
    config: SearchConfig, table: CharacteristicTable, scenario: ScenarioConfig
) -> str:
    return json.dumps(
        {
            "kind": "header",
            "version": FORMAT_VERSION,
            "config": dataclasses.asdict(config),
            "scenario": dataclasses.asdict(scenario),
            "table": {
                "label": table.label,
                "specs": [dataclasses.asdict(s) for s in table.specs],
            },
            "table_hash": table_hash(table),
        }
    )


def _eval_line(index: int, rec: EvaluationRecord) -> str:
    return json.dumps(
        {
            "kind": "eval",
            "index": index,
            "generation": rec.generation,
            "raw": list(rec.raw),
            "filtered": list(rec.filtered),
            "objectives": list(rec.objectives.as_tuple()),
            "safety": dataclasses.asdict(rec.safety),
            "trace_digest": rec.trace_digest,
        }
    )


def _footer_line(archive: RunArchive) -> str:
    return json.dumps(
        {
            "kind": "footer",
            "count": len(archive.evaluations),
            "final_front": list(archive.final_front_indices),
            "converged_early": archive.converged_early,
        }
    )


def save_archive(
    archive: RunArchive,
    path: str | Path,
    table: CharacteristicTable,
    scenario: ScenarioConfig,
) -> None:
    path = Path(path)
    lines = [_header_line(archive.config, table, scenario)]
    lines.extend(
        _eval_line(i, rec) for i, rec in enumerate(archive.evaluations)
    )
    lines.append(_footer_line(archive))
    path.write_text("\n".join(lines) + "\n")


def _decode_record(obj: dict) -> EvaluationRecord:
    f_safe, f_diff, f_num = obj["objectives"]
    return EvaluationRecord(
        raw=tuple(obj["raw"]),
        filtered=tuple(obj["filtered"]),
        objectives=ObjectiveVector(
            f_safe=float(f_safe), f_diff=float(f_diff), f_num_diff=int(f_num)
        ),
        safety=SafetyRecord(**obj["safety"]),
        trace_digest=obj["trace_digest"],
        generation=int(obj["generation"]),
    )


@dataclass
class LoadedArchive:
    archive: RunArchive
    table: CharacteristicTable
    scenario: ScenarioConfig
    table_hash: str
    complete: bool  # footer present and consistent


def load_archive(path: str | Path, allow_partial: bool = False) -> LoadedArchive:
    """Load an archive; with allow_partial a truncated or corrupt tail is
    dropped (the readable prefix is returned with complete = False)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ArchiveError(f"cannot read archive {path}: {exc}") from exc

    header = None
    records: list[EvaluationRecord] = []
    footer = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            kind = obj["kind"]
            if kind == "header":
                if header is not None:
                    raise ArchiveError(f"{path}:{lineno}: duplicate header")
                header = obj
            elif kind == "eval":
                if header is None:
                    raise ArchiveError(f"{path}:{lineno}: eval before header")
                if obj["index"] != len(records):
                    raise ArchiveError(
                        f"{path}:{lineno}: eval index {obj['index']} out of order"
                    )
                records.append(_decode_record(obj))
            elif kind == "footer":
                footer = obj
            else:
                raise ArchiveError(f"{path}:{lineno}: unknown kind {kind!r}")
        except ArchiveError:
            raise
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            if allow_partial:
                break  # truncated tail: keep the valid prefix
            raise ArchiveError(f"{path}:{lineno}: malformed line ({exc})") from exc

    if header is None:
        raise ArchiveError(f"{path}: missing header")
    if header.get("version") != FORMAT_VERSION:
        raise ArchiveError(f"{path}: unsupported version {header.get('version')}")

    table = CharacteristicTable(
        specs=tuple(
            CharacteristicSpec(**spec) for spec in header["table"]["specs"]
        ),
        label=header["table"]["label"],
    )
    if table_hash(table) != header["table_hash"]:
        raise ArchiveError(f"{path}: table hash mismatch")
    config = SearchConfig(**header["config"])
    scenario = ScenarioConfig(**header["scenario"])

    complete = footer is not None and footer.get("count") == len(records)
    if footer is not None and not complete and not allow_partial:
        raise ArchiveError(
            f"{path}: footer count {footer.get('count')} != {len(records)} records"
        )
    archive = RunArchive(
        config=config,
        evaluations=records,
        final_front_indices=list(footer["final_front"]) if complete else [],
        converged_early=bool(footer.get("converged_early")) if complete else False,
    )
    return LoadedArchive(
        archive=archive,
        table=table,
        scenario=scenario,
        table_hash=header["table_hash"],
        complete=complete,
    )


# ---------------------------------------------------------------------------
# Manifest

def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(directory: str | Path, files: Sequence[str | Path]) -> Path:
    directory = Path(directory)
    entries = {}
    for f in sorted(Path(f) for f in files):
        entries[f.name] = file_sha256(f)
    manifest = directory / "manifest.json"
    manifest.write_text(
        json.dumps({"version": FORMAT_VERSION, "files": entries}, indent=2)
        + "\n"
    )
    return manifest


def verify_manifest(directory: str | Path) -> list[str]:
    """Returns a list of problems; empty means every artifact checks out."""
    directory = Path(directory)
    manifest = directory / "manifest.json"
    if not manifest.exists():
        return ["manifest.json missing"]
    try:
        entries = json.loads(manifest.read_text())["files"]
    except (json.JSONDecodeError, KeyError) as exc:
        return [f"manifest.json unreadable: {exc}"]
    problems = []
    for name, digest in entries.items():
        target = directory / name
        if not target.exists():
            problems.append(f"{name}: listed but missing")
        elif file_sha256(target) != digest:
            problems.append(f"{name}: content hash mismatch")
    return problems

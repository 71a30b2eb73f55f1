"""
Report files

Versioned CSV tables (archive, convergence, top-k, comparison, per-layer costs)
and the key=value run manifest. Every CSV opens with

    # schema=<name>/<version> manifest=<file> run=<id> [anchor=E,D,A,Acc]

and readers refuse any other version. The anchor field is present when a
priority objective was normalized.
"""

import hashlib
import json
import logging
import re
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence

import pandas as pd

from cimsearch.exceptions import SchemaVersionMismatch, SpecError
from cimsearch.models.schemas import (
    ArchiveEntry,
    ConvergenceRecord,
    ObjectiveAnchor,
    RunManifest,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSIONS = {
    "archive": 1,
    "convergence": 1,
    "topk": 1,
    "compare": 1,
    "layers": 1,
    "baselines": 1,
}

MANIFEST_FILE = "manifest.txt"

_HEADER = re.compile(
    r"^# schema=(?P<name>[a-z_]+)/(?P<version>\d+) manifest=(?P<manifest>\S*) run=(?P<run>\S*)"
    r"(?: anchor=(?P<anchor>\S+))?$"
)

ARCHIVE_COLUMNS = [
    "index", "generation", "encoding", "energy_mj", "delay_us", "area_mm2", "edap",
    "accuracy", "score", "feasible", "hits",
]


def make_run_id(command: str, config_sha256: str, overrides: Optional[Dict] = None) -> str:
    """Stable id from the command, config content and effective overrides"""
    payload = json.dumps(
        {"command": command, "config": config_sha256, "overrides": overrides or {}},
        sort_keys=True,
        default=str,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def anchor_text(anchor: Optional[ObjectiveAnchor]) -> str:
    """E,D,A,Acc with round-trip float formatting; empty without an anchor"""
    if anchor is None:
        return ""
    return ",".join(repr(float(v)) for v in (anchor.energy_mj, anchor.delay_us, anchor.area_mm2, anchor.accuracy))


def parse_anchor(text: Optional[str]) -> Optional[ObjectiveAnchor]:
    if not text:
        return None
    try:
        energy, delay, area, accuracy = (float(v) for v in text.split(","))
    except ValueError as e:
        raise SchemaVersionMismatch(f"malformed anchor field: {text!r}") from e
    return ObjectiveAnchor(energy_mj=energy, delay_us=delay, area_mm2=area, accuracy=accuracy)


def header_line(
    schema: str,
    run_id: str,
    manifest: str = MANIFEST_FILE,
    anchor: Optional[ObjectiveAnchor] = None,
) -> str:
    line = f"# schema={schema}/{SCHEMA_VERSIONS[schema]} manifest={manifest} run={run_id}"
    if anchor is not None:
        line += f" anchor={anchor_text(anchor)}"
    return line


def to_csv_text(
    frame: pd.DataFrame,
    schema: str,
    run_id: str,
    manifest: str = MANIFEST_FILE,
    anchor: Optional[ObjectiveAnchor] = None,
) -> str:
    body = frame.to_csv(index=False, lineterminator="\n")
    return header_line(schema, run_id, manifest, anchor) + "\n" + body


def write_csv(
    frame: pd.DataFrame,
    path: Path,
    schema: str,
    run_id: str,
    manifest: str = MANIFEST_FILE,
    anchor: Optional[ObjectiveAnchor] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_csv_text(frame, schema, run_id, manifest, anchor), encoding="utf-8")
    logger.info(f"✓ Wrote {schema} table: {path} ({len(frame)} rows)")
    return path


def read_header(path: Path) -> Dict[str, Optional[str]]:
    with open(path, encoding="utf-8") as handle:
        first = handle.readline().rstrip("\n")
    match = _HEADER.match(first)
    if not match:
        raise SchemaVersionMismatch(f"{path} has no schema header")
    return match.groupdict()


def read_anchor(path: Path) -> Optional[ObjectiveAnchor]:
    """Priority anchor recorded in a report header, if any"""
    return parse_anchor(read_header(path)["anchor"])


def read_csv(path: Path, schema: str) -> pd.DataFrame:
    """Load a report table, checking its schema name and version"""
    path = Path(path)
    if not path.exists():
        raise SpecError(f"report not found: {path}")
    header = read_header(path)
    expected = str(SCHEMA_VERSIONS[schema])
    if header["name"] != schema or header["version"] != expected:
        raise SchemaVersionMismatch(
            f"{path} is {header['name']}/{header['version']}, expected {schema}/{expected}"
        )
    return pd.read_csv(path, skiprows=1)


# ============================================
# Frames
# ============================================

def encoding_text(encoding: Sequence[int]) -> str:
    return "-".join(str(i) for i in encoding)


def archive_frame(entries: Iterable[ArchiveEntry], hits: Optional[Dict[int, int]] = None) -> pd.DataFrame:
    hits = hits or {}
    rows = [
        {
            "index": e.index,
            "generation": e.generation,
            "encoding": encoding_text(e.design.encoding),
            "energy_mj": e.metrics.energy_mj,
            "delay_us": e.metrics.delay_us,
            "area_mm2": e.metrics.area_mm2,
            "edap": e.metrics.edap,
            "accuracy": e.accuracy,
            "score": e.score,
            "feasible": e.feasible,
            "hits": hits.get(e.index, 0),
        }
        for e in entries
    ]
    return pd.DataFrame(rows, columns=ARCHIVE_COLUMNS)


def convergence_frame(records: Sequence[ConvergenceRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        [r.model_dump() for r in records],
        columns=["generation", "best_score", "mean_score", "feasible_fraction", "evaluated", "cache_hits"],
    )


def topk_frame(entries: Sequence[ArchiveEntry], scores: Sequence[float], diversity: float) -> pd.DataFrame:
    rows = []
    for rank, (entry, value) in enumerate(zip(entries, scores), start=1):
        m = entry.metrics
        rows.append(
            {
                "rank": rank,
                "index": entry.index,
                "generation": entry.generation,
                "encoding": encoding_text(entry.design.encoding),
                "energy_mj": m.energy_mj,
                "delay_us": m.delay_us,
                "area_mm2": m.area_mm2,
                "edap": m.edap,
                "accuracy": entry.accuracy,
                "score": value,
                "tops_per_w": m.tops_per_w,
                "tops_per_mm2": m.tops_per_mm2,
                "utilization": m.utilization,
                "diversity": diversity,
            }
        )
    return pd.DataFrame(rows)


# ============================================
# Manifest
# ============================================

def write_manifest(manifest: RunManifest, directory: Path) -> Path:
    path = Path(directory) / MANIFEST_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key}={value}" for key, value in manifest.model_dump().items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_manifest(path: Path) -> RunManifest:
    values = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return RunManifest(**values)

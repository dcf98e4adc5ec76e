"""CSV and JSON report files, polygon files and run metadata."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .geometry import ConvexPolygon, GeometryError
from .harness import (
    CSV_COLUMNS,
    GeometryRecord,
    LowerBoundRecord,
    ThresholdRecord,
    VerificationRecord,
)

RECORD_TYPES = {
    "verification": VerificationRecord,
    "lowerbound": LowerBoundRecord,
    "thresholds": ThresholdRecord,
    "geometry": GeometryRecord,
}
FORMATS = ("csv", "json")


class ReportError(OSError):
    pass


@dataclass
class Report:
    kind: str
    metadata: dict
    records: list


def _kind_of(records: Sequence) -> str:
    for kind, cls in RECORD_TYPES.items():
        if isinstance(records[0], cls):
            return kind
    return "table"


def _columns(kind: str, records: Sequence, fmt: str) -> list[str]:
    if kind == "verification" and fmt == "csv":
        return list(CSV_COLUMNS)
    if kind in RECORD_TYPES:
        return [f.name for f in fields(RECORD_TYPES[kind])]
    cols: list[str] = []
    for r in records:
        cols.extend(k for k in r if k not in cols)
    return cols


def _as_dict(record) -> dict:
    return asdict(record) if hasattr(record, "__dataclass_fields__") else dict(record)


def _plain(value):
    """JSON-safe scalar; NaN and infinities become strings."""
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return int(value)
    if isinstance(value, float):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if hasattr(value, "item"):
        return _plain(value.item())
    return value


def run_metadata(kind: str, **extra: Any) -> dict:
    meta = {
        "tool": "robintorsion",
        "version": __version__,
        "kind": kind,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    meta.update({k: _plain(v) for k, v in extra.items()})
    return meta


def render(records: Sequence, fmt: str, metadata: Optional[dict] = None) -> str:
    if not records:
        raise ReportError("refusing to write an empty report")
    if fmt not in FORMATS:
        raise ReportError(f"unknown format {fmt!r}")
    kind = _kind_of(records)
    cols = _columns(kind, records, fmt)
    rows = [{c: _plain(_as_dict(r).get(c)) for c in cols} for r in records]
    if fmt == "json":
        meta = dict(metadata or run_metadata(kind))
        meta.setdefault("kind", kind)
        return json.dumps({"metadata": meta, "records": rows}, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                         for k, v in row.items()})
    return buf.getvalue()


def emit_report(records: Sequence, fmt: str, path, metadata: Optional[dict] = None) -> Path:
    """Write records as CSV or JSON; nothing is written for an empty list."""
    text = render(records, fmt, metadata)
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise ReportError(f"cannot write report to {path}: {exc.strerror or exc}") from exc
    return path


def _convert(cls, row: dict):
    kwargs = {}
    for f in fields(cls):
        if f.name not in row:
            continue
        raw = row[f.name]
        if f.type in ("float", float):
            kwargs[f.name] = math.nan if raw in (None, "") else float(raw)
        elif f.type in ("int", int):
            kwargs[f.name] = int(raw)
        else:
            kwargs[f.name] = "" if raw is None else str(raw)
    return cls(**kwargs)


def _detect_kind(columns: Sequence[str]) -> str:
    cols = set(columns)
    for kind, cls in RECORD_TYPES.items():
        required = set(CSV_COLUMNS) if kind == "verification" else {f.name for f in fields(cls)}
        if required <= cols:
            return kind
    return "table"


def read_report(path) -> Report:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ReportError(f"cannot read report {path}: {exc.strerror or exc}") from exc
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
            meta, rows = doc["metadata"], doc["records"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ReportError(f"{path} is not a report document") from exc
        kind = meta.get("kind", "table")
    else:
        reader = csv.DictReader(io.StringIO(text))
        rows = list(reader)
        if reader.fieldnames is None:
            raise ReportError(f"{path} is empty")
        kind = _detect_kind(reader.fieldnames)
        meta = {"kind": kind, "source": str(path)}
    cls = RECORD_TYPES.get(kind)
    records = [_convert(cls, r) for r in rows] if cls else rows
    return Report(kind, meta, records)


# --- polygon files -------------------------------------------------------------


def polygon_to_json(poly: ConvexPolygon) -> str:
    return json.dumps({"vertices": poly.vertices.tolist()})


def read_polygon(path) -> ConvexPolygon:
    """Read ``{"vertices": [[x, y], ...]}`` listed counterclockwise."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
        verts = doc["vertices"]
    except OSError as exc:
        raise ReportError(f"cannot read polygon {path}: {exc.strerror or exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise GeometryError(f"{path} is not a polygon document") from exc
    return ConvexPolygon(verts)


def write_polygon(poly: ConvexPolygon, path) -> Path:
    path = Path(path)
    path.write_text(polygon_to_json(poly) + "\n")
    return path

"""Deterministic CSV/JSON serialization of result tables."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence


def format_number(x: Any) -> str:
    """17 significant digits for floats (round-trip exact); other values via ``str``."""
    if isinstance(x, bool) or x is None:
        return "" if x is None else str(x).lower()
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


@dataclass
class Table:
    name: str
    columns: list
    rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": [list(r) for r in self.rows]}


def write_csv(table: Table, stream, comments: Sequence[str] = ()) -> None:
    for line in comments:
        stream.write(f"# {line}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([format_number(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps_json(payload: dict) -> str:
    return json.dumps(_jsonable(payload), indent=2, allow_nan=False) + "\n"


@dataclass
class Result:
    """What a CLI run produces: a summary, zero or more tables and header notes."""

    mode: str
    summary: dict = field(default_factory=dict)
    tables: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    config: Optional[dict] = None

    def to_json(self) -> str:
        payload = {"mode": self.mode}
        if self.notes:
            payload["notes"] = list(self.notes)
        if self.config is not None:
            payload["config"] = self.config
        payload["summary"] = self.summary
        payload["tables"] = {t.name: t.to_dict() for t in self.tables}
        return dumps_json(payload)

    def _summary_table(self) -> Table:
        flat = _flatten(self.summary)
        return Table("summary", list(flat), [list(flat.values())])

    def csv_tables(self) -> list:
        return self.tables if self.tables else [self._summary_table()]

    def header_lines(self) -> list:
        lines = [f"qite-mpemba {self.mode}"] + list(self.notes)
        if self.tables:
            for key, value in _flatten(self.summary).items():
                lines.append(f"{key} = {format_number(value)}")
        return lines

    def to_csv(self) -> str:
        """All tables in one stream, each introduced by a ``# table:`` line."""
        buf = io.StringIO()
        tables = self.csv_tables()
        for k, table in enumerate(tables):
            comments = self.header_lines() if k == 0 else []
            if len(tables) > 1:
                comments = comments + [f"table: {table.name}"]
            if k:
                buf.write("\n")
            write_csv(table, buf, comments)
        return buf.getvalue()

    def write_csv_dir(self, directory: Path) -> list:
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for table in self.csv_tables():
            path = directory / f"{table.name}.csv"
            with open(path, "w", newline="") as fh:
                write_csv(table, fh, self.header_lines())
            written.append(path)
        return written


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, tuple)):
            out[key] = " ".join(format_number(x) for x in v)
        else:
            out[key] = v
    return out

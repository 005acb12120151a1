"""In-memory tables and CSV ingestion rules.

All sealed content is tabular text. Values stay strings end to end; typing
is an inference over the strings, not a conversion, so the byte stream a
contributor signed is exactly what the store keeps.

dtype rule: a column is `number` if every non-empty value parses as a
decimal number, `date` if every non-empty value is ISO-8601 (YYYY-MM-DD) or
MM/DD/YYYY, else `text`.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass

from .errors import MalformedCsv

DTYPES = ("text", "number", "date")

_NUMBER_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_ISO_DATE_RE = re.compile(r"^\d{4}-(0[1-9]|1[0-2])-(0[1-9]|[12]\d|3[01])$")
_US_DATE_RE = re.compile(r"^(0?[1-9]|1[0-2])/(0?[1-9]|[12]\d|3[01])/\d{4}$")


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    dtype: str = "text"

    def __post_init__(self):
        if self.dtype not in DTYPES:
            raise MalformedCsv(f"unknown dtype {self.dtype!r} for column {self.name!r}")


@dataclass
class Table:
    columns: list[str]
    rows: list[list[str]]

    def column_values(self, name: str) -> list[str]:
        idx = self.column_index(name)
        return [row[idx] for row in self.rows]

    def column_index(self, name: str) -> int:
        lowered = name.lower()
        for i, col in enumerate(self.columns):
            if col.lower() == lowered:
                return i
        raise KeyError(name)

    def has_column(self, name: str) -> bool:
        lowered = name.lower()
        return any(col.lower() == lowered for col in self.columns)

    def to_csv_bytes(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buf.getvalue().encode("utf-8")


def is_number(value: str) -> bool:
    return bool(_NUMBER_RE.match(value.strip()))


def is_date(value: str) -> bool:
    v = value.strip()
    return bool(_ISO_DATE_RE.match(v) or _US_DATE_RE.match(v))


def infer_dtype(values: list[str]) -> str:
    non_empty = [v for v in values if v.strip()]
    if non_empty and all(is_number(v) for v in non_empty):
        return "number"
    if non_empty and all(is_date(v) for v in non_empty):
        return "date"
    return "text"


def parse_csv(content: bytes) -> Table:
    """Parse a rectangular CSV with a header row; reject anything else."""
    try:
        text = content.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedCsv(f"content is not UTF-8: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        rows = list(reader)
    except csv.Error as exc:
        raise MalformedCsv(str(exc)) from exc
    rows = [r for r in rows if r]  # trailing blank lines are harmless
    if not rows:
        raise MalformedCsv("missing header row")
    header = [h.strip() for h in rows[0]]
    if any(not h for h in header):
        raise MalformedCsv("empty column name in header")
    lowered = [h.lower() for h in header]
    if len(set(lowered)) != len(lowered):
        dupes = sorted({h for h in lowered if lowered.count(h) > 1})
        raise MalformedCsv(f"duplicate headers (case-insensitive): {', '.join(dupes)}")
    width = len(header)
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise MalformedCsv(f"row {i} has {len(row)} fields, header has {width}")
    return Table(columns=header, rows=rows[1:])


def infer_schema(table: Table) -> list[ColumnSpec]:
    return [
        ColumnSpec(name=col, dtype=infer_dtype(table.column_values(col)))
        for col in table.columns
    ]

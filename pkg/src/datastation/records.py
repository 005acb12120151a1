"""Canonical textual record format.

One record = one JSON object with sorted keys and compact separators. The
same encoding is used for API bodies, on-disk meta files, catalog exports,
capsule fingerprinting, and the audit log, so byte-for-byte comparisons are
meaningful everywhere.
"""

from __future__ import annotations

import json
from typing import Any, Iterable


def dumps(record: Any) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def loads(text: str | bytes) -> Any:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return json.loads(text)


def dump_lines(records: Iterable[Any]) -> str:
    """Serialize records as one canonical record per line (catalog export)."""
    return "".join(dumps(r) + "\n" for r in records)


def load_lines(text: str) -> list[Any]:
    return [loads(line) for line in text.splitlines() if line.strip()]

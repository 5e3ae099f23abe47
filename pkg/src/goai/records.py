"""Line-delimited record envelope used by every on-disk artifact.

One JSON object per line, UTF-8, with a ``kind`` tag per record and a
``schema_version`` header line.  Serialization is canonical (sorted keys,
compact separators) so identical data always produces identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import MalformedSnapshotError

SCHEMA_VERSION = 1


def dumps_canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def header_record() -> dict:
    return {"kind": "header", "schema_version": SCHEMA_VERSION}


def encode_records(records: Iterable[dict], with_header: bool = True) -> str:
    lines = []
    if with_header:
        lines.append(dumps_canonical(header_record()))
    lines.extend(dumps_canonical(r) for r in records)
    return "\n".join(lines) + "\n"


def write_records(path: str | Path, records: Iterable[dict], with_header: bool = True) -> None:
    Path(path).write_text(encode_records(records, with_header=with_header), encoding="utf-8")


def decode_records(text: str, expect_header: bool = True) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, record). Raises MalformedSnapshotError with location."""
    lines = text.splitlines()
    start = 0
    if expect_header:
        if not lines:
            raise MalformedSnapshotError("empty input, expected header", line=1)
        head = _parse_line(lines[0], 1)
        if head.get("kind") != "header":
            raise MalformedSnapshotError("first record is not a header", line=1)
        if head.get("schema_version") != SCHEMA_VERSION:
            raise MalformedSnapshotError(
                f"unsupported schema_version {head.get('schema_version')!r}", line=1
            )
        start = 1
    for i, raw in enumerate(lines[start:], start=start + 1):
        if not raw.strip():
            continue
        yield i, _parse_line(raw, i)


def read_records(path: str | Path, expect_header: bool = True) -> Iterator[tuple[int, dict]]:
    yield from decode_records(Path(path).read_text(encoding="utf-8"), expect_header=expect_header)


def _parse_line(raw: str, lineno: int) -> dict:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedSnapshotError(f"invalid JSON: {exc}", line=lineno) from exc
    if not isinstance(obj, dict):
        raise MalformedSnapshotError("record is not an object", line=lineno)
    return obj

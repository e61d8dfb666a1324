"""Log record input: one sample per JSONL line.

Schema: {"id": str, "event": [str, ...], "message": [str, ...]}. Either list
may be empty for a sample, but not both; ids must be unique.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


class EmptyRecordSetError(Exception):
    pass


@dataclass(frozen=True)
class LogRecord:
    sample_id: str
    event_lines: tuple[str, ...]
    message_lines: tuple[str, ...]

    def __post_init__(self):
        if not self.event_lines and not self.message_lines:
            raise ValueError(f"sample {self.sample_id!r} has neither event nor message lines")


@dataclass(frozen=True)
class LogRecordSet:
    records: tuple[LogRecord, ...]

    def __post_init__(self):
        if not self.records:
            raise EmptyRecordSetError("no log records")
        ids = [r.sample_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("sample ids must be unique")

    def __len__(self) -> int:
        return len(self.records)


def load_jsonl(path) -> LogRecordSet:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                records.append(LogRecord(
                    sample_id=str(obj["id"]),
                    event_lines=tuple(obj.get("event", [])),
                    message_lines=tuple(obj.get("message", [])),
                ))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno + 1}: bad record: {exc}") from exc
    return LogRecordSet(tuple(records))


def save_jsonl(record_set: LogRecordSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in record_set.records:
            fh.write(json.dumps({
                "id": r.sample_id,
                "event": list(r.event_lines),
                "message": list(r.message_lines),
            }) + "\n")

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class EmbeddingConfig:
    """Shape and encoder settings for one embedding run.

    encoder is either "hash" (the built-in deterministic feature-hashing
    encoder, always available offline) or "st:<model-name>" for a
    sentence-transformers model that must already be cached locally. Line
    vectors wider than the configured width are truncated to the first
    dimensions; narrower ones are zero-padded. Samples with more lines than
    the row budget are truncated, fewer are padded with zero rows.
    """

    event_rows: int = 28       # m
    event_width: int = 8       # n
    message_rows: int = 100    # p
    message_width: int = 768   # q
    encoder: str = "hash"

    def __post_init__(self):
        if min(self.event_rows, self.event_width, self.message_rows, self.message_width) < 1:
            raise ValueError("all dims must be >= 1")
        if not (self.encoder == "hash" or self.encoder.startswith("st:")):
            raise ValueError(f"unknown encoder {self.encoder!r}; use 'hash' or 'st:<model>'")

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (self.event_rows, self.event_width, self.message_rows, self.message_width)

    @classmethod
    def from_json(cls, path) -> "EmbeddingConfig":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            event_rows=int(d.get("event_rows", 28)),
            event_width=int(d.get("event_width", 8)),
            message_rows=int(d.get("message_rows", 100)),
            message_width=int(d.get("message_width", 768)),
            encoder=d.get("encoder", "hash"),
        )

from __future__ import annotations

import numpy as np

from .config import EmbeddingConfig
from .encoders import get_encoder
from .records import LogRecordSet


def _encode_block(encoder, lines, rows: int, width: int) -> np.ndarray:
    """Row-wise line embeddings padded/truncated to a fixed (rows, width)."""
    block = np.zeros((rows, width), dtype=np.float32)
    kept = list(lines[:rows])
    if kept:
        block[: len(kept)] = encoder.encode(kept)
    return block


def embed(records: LogRecordSet, cfg: EmbeddingConfig):
    """Encode every record; returns (sample_ids, event N x m x n, message N x p x q)."""
    event_encoder = get_encoder(cfg.encoder, cfg.event_width)
    message_encoder = get_encoder(cfg.encoder, cfg.message_width)
    ids = []
    event = np.zeros((len(records), cfg.event_rows, cfg.event_width), dtype=np.float32)
    message = np.zeros((len(records), cfg.message_rows, cfg.message_width), dtype=np.float32)
    for i, record in enumerate(records.records):
        ids.append(record.sample_id)
        event[i] = _encode_block(event_encoder, record.event_lines, cfg.event_rows, cfg.event_width)
        message[i] = _encode_block(
            message_encoder, record.message_lines, cfg.message_rows, cfg.message_width
        )
    return ids, event, message


def embed_to_file(records: LogRecordSet, cfg: EmbeddingConfig, out_path) -> None:
    from .hft1 import write_hft1

    ids, event, message = embed(records, cfg)
    write_hft1(out_path, ids, event, message)

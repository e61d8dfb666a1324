"""Sentence encoders: a deterministic hashing fallback and transformers.

The hashing encoder maps a line to a fixed-width vector by signed feature
hashing of character trigrams (blake2b, so the result is stable across
processes and platforms), then L2-normalizes. It needs no model files and is
the default for offline use. The "st:<model>" backend wraps a
sentence-transformers model that must already be present in the local cache;
it never downloads at run time.
"""

from __future__ import annotations

import hashlib

import numpy as np


class EncoderUnavailableError(Exception):
    pass


class HashingEncoder:
    """Stateless trigram feature hashing into a fixed width."""

    name = "hash"

    def __init__(self, width: int):
        if width < 1:
            raise ValueError("width must be >= 1")
        self.width = width

    def _line_vector(self, line: str) -> np.ndarray:
        vec = np.zeros(self.width, dtype=np.float32)
        padded = f"\x02{line}\x03"
        grams = [padded[i:i + 3] for i in range(len(padded) - 2)] or [padded]
        for gram in grams:
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "little")
            slot = value % self.width
            sign = 1.0 if (value >> 63) & 1 else -1.0
            vec[slot] += sign
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm > 0 else vec

    def encode(self, lines: list[str]) -> np.ndarray:
        if not lines:
            return np.zeros((0, self.width), dtype=np.float32)
        return np.stack([self._line_vector(line) for line in lines])


class SentenceTransformerEncoder:
    """Pretrained transformer sentence encoder from the local cache only."""

    def __init__(self, model_name: str, width: int):
        self.name = f"st:{model_name}"
        self.width = width
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderUnavailableError(
                "sentence-transformers is not installed; install the 'transformer' extra"
            ) from exc
        import os

        os.environ.setdefault("HF_HUB_OFFLINE", "1")
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise EncoderUnavailableError(
                f"model {model_name!r} is not available in the local cache: {exc}"
            ) from exc

    def encode(self, lines: list[str]) -> np.ndarray:
        if not lines:
            return np.zeros((0, self.width), dtype=np.float32)
        raw = self._model.encode(lines, convert_to_numpy=True, show_progress_bar=False)
        raw = np.asarray(raw, dtype=np.float32)
        # width adjustment: truncate to the first dims, zero-pad if narrower
        out = np.zeros((raw.shape[0], self.width), dtype=np.float32)
        take = min(self.width, raw.shape[1])
        out[:, :take] = raw[:, :take]
        return out


def get_encoder(spec: str, width: int):
    if spec == "hash":
        return HashingEncoder(width)
    if spec.startswith("st:"):
        return SentenceTransformerEncoder(spec[3:], width)
    raise ValueError(f"unknown encoder {spec!r}")

"""Deterministic offline text embedder.

Term-frequency hashing with L2 normalization: no model weights, no network,
and stable across processes (token buckets come from sha256, not the
process-seeded builtin hash).  Any embedder with the same call surface can
be plugged in instead.
"""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from typing import Protocol, Sequence

_TOKEN = re.compile(r"[a-z0-9]+")


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> tuple[float, ...] | None: ...


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


class HashingEmbedder:
    def __init__(self, dim: int = 4096):
        self.dim = dim

    def bucket(self, token: str) -> int:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") % self.dim

    def embed(self, text: str) -> tuple[float, ...] | None:
        """Unit-norm tf vector; None for text with no tokens."""
        counts = Counter(self.bucket(tok) for tok in tokenize(text))
        if not counts:
            return None
        vec = [0.0] * self.dim
        for bucket, n in counts.items():
            vec[bucket] = float(n)
        norm = math.sqrt(sum(x * x for x in vec))
        return tuple(x / norm for x in vec)


def cosine(a: Sequence[float] | None, b: Sequence[float] | None) -> float:
    """Cosine similarity; 0.0 when either vector is absent or zero."""
    if a is None or b is None:
        return 0.0
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def text_similarity(embedder: Embedder, left: str, right: str) -> float:
    return cosine(embedder.embed(left), embedder.embed(right))

"""Labeled seed derivation: one global seed fans out to independent component seeds."""

from __future__ import annotations

import hashlib


def derive_seed(seed: int, *labels) -> int:
    """64-bit seed from ``seed`` and a path of labels, stable across runs and platforms."""
    text = "/".join([str(int(seed))] + [str(x) for x in labels])
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")

"""Named substreams so one top-level seed drives every random decision."""

from __future__ import annotations

import hashlib
import random


def substream_seed(seed: int, *names) -> int:
    """Stable derived seed for a named substream (independent of PYTHONHASHSEED)."""
    payload = ":".join([str(seed), *map(str, names)]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def substream_rng(seed: int, *names) -> random.Random:
    return random.Random(substream_seed(seed, *names))

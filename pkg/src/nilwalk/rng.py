"""Deterministic random streams, chunked so results never depend on threads.

Every experiment derives its streams from (master seed, stream tag, chunk
index).  Chunks are fixed-size slices of the sample budget; each gets an
independent Philox generator, so any thread may run any chunk and the
merged result is still byte-identical.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

DEFAULT_SEED = 2026
CHUNK_SIZE = 1 << 15


def tag_key(tag: str) -> int:
    """Stable 64-bit key for a stream tag."""
    return int.from_bytes(hashlib.sha256(tag.encode()).digest()[:8], "big")


def resolve_seed(configured=None) -> int:
    """Seed precedence: NILWALK_SEED, then the configured value, then default."""
    env = os.environ.get("NILWALK_SEED")
    if env is not None:
        return int(env)
    if configured is not None:
        return int(configured)
    return DEFAULT_SEED


def chunk_plan(count: int, chunk_size: int = CHUNK_SIZE) -> list[int]:
    """Chunk sizes covering count; all full-size except possibly the last."""
    if count <= 0:
        return []
    full, rem = divmod(count, chunk_size)
    return [chunk_size] * full + ([rem] if rem else [])


def chunk_seeds(seed: int, tag: str, count: int,
                chunk_size: int = CHUNK_SIZE) -> list[tuple[np.random.SeedSequence, int]]:
    """One seed sequence per chunk, in chunk order."""
    key = tag_key(tag)
    return [
        (np.random.SeedSequence(seed, spawn_key=(key, idx)), n)
        for idx, n in enumerate(chunk_plan(count, chunk_size))
    ]


def make_generator(seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seq))


def chunk_generators(seed: int, tag: str, count: int,
                     chunk_size: int = CHUNK_SIZE):
    """Yield (generator, chunk_length) pairs in deterministic chunk order."""
    for seq, n in chunk_seeds(seed, tag, count, chunk_size):
        yield make_generator(seq), n

"""Deterministic random-stream management.

Every component draws from its own named Philox (counter-based) substream,
so results are reproducible and independent of evaluation order or worker
count. A stream is addressed by an integer seed plus a path of labels,
e.g. ``substream(seed, "scm", "simulate")``.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream", "spawn_seed"]


def _token(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *path) -> np.random.Generator:
    """Return the generator for the stream addressed by ``(seed, *path)``.

    Distinct paths yield statistically independent streams; the same
    address always yields the same stream.
    """
    key = tuple(_token(p) for p in path)
    bit_gen = np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key))
    return np.random.Generator(bit_gen)


def spawn_seed(seed: int, *path) -> int:
    """Derive an integer child seed from a stream address.

    Used to hand a self-contained seed to components that manage their own
    substreams (samplers, learners, repetitions).
    """
    return int(substream(seed, *path).integers(0, 2**63))

"""Keyed random substreams.

A stream is identified by (seed, task key, block index). Replicates are grouped
into fixed-size blocks, so the draws of a replicate never depend on how blocks
are distributed over workers.
"""

from __future__ import annotations

import hashlib

import numpy as np


def task_key(*parts: object) -> int:
    """Stable 63-bit integer for a task label such as ("true-sums", 1000)."""
    label = "|".join(str(part) for part in parts)
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def block_stream(seed: int, task: int, block: int) -> np.random.Generator:
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(task, block))
    return np.random.default_rng(sequence)


def block_layout(reps: int, block_size: int) -> list[tuple[int, int]]:
    """(block index, replicate count) pairs covering ``reps`` replicates in order."""
    if reps < 1 or block_size < 1:
        raise ValueError("reps and block_size must be positive")
    layout = []
    for block, start in enumerate(range(0, reps, block_size)):
        layout.append((block, min(block_size, reps - start)))
    return layout

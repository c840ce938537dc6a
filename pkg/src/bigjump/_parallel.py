"""Deterministic block-parallel Monte Carlo plumbing.

Replications are partitioned into fixed-size blocks whose RNG streams depend
only on (seed, block index), never on the worker count. Partial results are
reduced sequentially in block order, so a run with 16 workers is byte-identical
to a run with 1.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

# Default number of replications handled by one block. Chosen so that a block
# of paths (block_size x (n+m) float64) stays within tens of MB for n ~ 1000.
DEFAULT_BLOCK = 1 << 14


def block_sizes(reps: int, block: int = DEFAULT_BLOCK) -> list[int]:
    if reps <= 0:
        raise ValueError("reps must be positive")
    full, rem = divmod(reps, block)
    return [block] * full + ([rem] if rem else [])


def block_rng(seed: int, index: int) -> np.random.Generator:
    """The RNG for one block; depends only on (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def map_blocks(fn: Callable, reps: int, seed: int, workers: int = 1,
               block: int = DEFAULT_BLOCK, extra: tuple = ()) -> list:
    """Run fn(block_index, block_reps, seed, *extra) over all blocks.

    Returns partial results ordered by block index regardless of scheduling.
    `fn` must be a module-level function when workers > 1 (it is pickled).
    """
    sizes = block_sizes(reps, block)
    args = [(i, sizes[i], seed) + tuple(extra) for i in range(len(sizes))]
    if workers <= 1 or len(sizes) == 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=min(workers, len(sizes))) as pool:
        return list(pool.map(fn, *zip(*args), chunksize=max(1, len(sizes) // (4 * workers))))

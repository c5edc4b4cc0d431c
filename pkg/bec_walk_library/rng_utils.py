"""Counter-based random streams for reproducible, parallelisable sampling.

Trials are grouped into fixed-size blocks. Block ``b`` draws from a Philox
generator keyed by the seed with ``b`` in the top word of the counter, so the
numbers a trial sees depend only on (seed, trial index) and never on how many
trials were requested or in which order blocks are processed.
"""
from __future__ import annotations

from typing import Iterator, Tuple

import numpy as np

TRIAL_BLOCK_SIZE = 4096
MAX_SEED = 2**64 - 1


def block_generator(seed: int, block_index: int) -> np.random.Generator:
    """Generator for one block of trials.

    Parameters
    ----------
    seed : int
        unsigned 64-bit seed
    block_index : int
        index of the trial block

    Returns
    -------
    np.random.Generator
    """
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"Seed must be an unsigned 64-bit integer, got {seed}")
    if block_index < 0:
        raise ValueError(f"Block index must be >= 0, got {block_index}")

    return np.random.Generator(np.random.Philox(key=seed, counter=block_index << 192))


def trial_blocks(trials: int) -> Iterator[Tuple[int, int, int]]:
    """Yield (block_index, first_trial, block_trials) covering ``trials`` trials."""
    if trials < 1:
        raise ValueError(f"Number of trials must be >= 1, got {trials}")

    for block_index, first in enumerate(range(0, trials, TRIAL_BLOCK_SIZE)):
        yield block_index, first, min(TRIAL_BLOCK_SIZE, trials - first)


def block_uniforms(seed: int, block_index: int, shape: Tuple[int, ...]) -> np.ndarray:
    """Uniforms of shape ``shape + (TRIAL_BLOCK_SIZE,)`` for one block.

    Always draws a full block so a trial's numbers do not depend on how many
    trials share its block.
    """
    rng = block_generator(seed, block_index)
    return rng.random(tuple(shape) + (TRIAL_BLOCK_SIZE,))

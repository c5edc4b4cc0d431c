import numpy as np
import pytest

from bec_walk_library.rng_utils import TRIAL_BLOCK_SIZE, block_uniforms, trial_blocks


def test_trial_blocks_cover_every_trial():
    blocks = list(trial_blocks(2 * TRIAL_BLOCK_SIZE + 5))

    assert blocks == [
        (0, 0, TRIAL_BLOCK_SIZE),
        (1, TRIAL_BLOCK_SIZE, TRIAL_BLOCK_SIZE),
        (2, 2 * TRIAL_BLOCK_SIZE, 5),
    ]


def test_block_uniforms_are_reproducible():
    first = block_uniforms(5, 3, (2,))

    assert first.shape == (2, TRIAL_BLOCK_SIZE)
    assert np.array_equal(first, block_uniforms(5, 3, (2,)))
    assert np.all((first >= 0) & (first < 1))


def test_blocks_and_seeds_give_distinct_streams():
    base = block_uniforms(5, 0, ())

    assert not np.array_equal(base, block_uniforms(5, 1, ()))
    assert not np.array_equal(base, block_uniforms(6, 0, ()))


def test_full_64_bit_seed_range():
    block_uniforms(2**64 - 1, 0, ())

    with pytest.raises(ValueError):
        block_uniforms(2**64, 0, ())
    with pytest.raises(ValueError):
        list(trial_blocks(0))

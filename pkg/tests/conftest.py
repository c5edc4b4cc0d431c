import math

import numpy as np
import pytest

from bec_walk_library.walk_utils import CoinOperator, hadamard_coin, point_state


@pytest.fixture
def hadamard():
    return hadamard_coin()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_coin(rng):
    """Haar-ish random unitary coin from a QR decomposition."""

    def make() -> CoinOperator:
        z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        q, r = np.linalg.qr(z)
        q = q * (np.diag(r) / np.abs(np.diag(r)))
        return CoinOperator(q, name="random")

    return make


@pytest.fixture
def symmetric_start():
    def make(n: int):
        return point_state((1 / math.sqrt(2), 1j / math.sqrt(2)), n)

    return make


@pytest.fixture
def experiment_config(tmp_path):
    """A feasible trap and timing setup for short walks."""
    path = tmp_path / "experiment.cfg"
    path.write_text(
        "\n".join(
            [
                "# 1064 nm trap, 30 um waist",
                "steps = 3",
                "step_length = 10 um",
                "trap_wavelength = 1064 nm",
                "beam_waist = 30 um",
                "usable_half_range = 2 mm   # Z_R is about 2.657 mm",
                "kick_time = 50 us",
                "rabi_frequency = 10 kHz",
                "translation_time = 0.85 ms",
                "trials = 1000000",
                "seed = 7",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    return path

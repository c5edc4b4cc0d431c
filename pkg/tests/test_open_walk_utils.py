import numpy as np
import pytest

from bec_walk_library.open_walk_utils import (
    DensityState,
    DephasingChannel,
    NoiseModel,
    coin_dephasing_channel,
    density_distribution,
    noisy_step,
    onset_schedule,
    open_variance_scan,
    perturb_coin,
    position_measurement_channel,
    run_open,
    to_density,
    trajectory_run,
)
from bec_walk_library.pulse_utils import PulseKind, RfPulse, design_pulse, rf_coin_matrix
from bec_walk_library.walk_utils import (
    LatticeOverflowError,
    NumericalDriftError,
    classical_walk,
    distribution,
    evolve,
    fit_exponent,
    point_state,
    step,
    total_variation,
)


def test_noiseless_run_matches_pure_walk(hadamard, symmetric_start):
    initial = symmetric_start(12)
    result = run_open(initial, 12, hadamard, NoiseModel())

    assert np.allclose(
        result.distribution.probabilities,
        distribution(evolve(initial, 12, hadamard)).probabilities,
        atol=1e-12,
    )
    assert result.trace == pytest.approx(1.0, abs=1e-12)
    assert result.trial_multiplier == 1.0


def test_full_position_measurement_gives_classical_walk(hadamard):
    n = 8
    result = run_open(point_state("zero", n), n, hadamard, NoiseModel(position_measure_prob=1.0))

    assert np.allclose(result.distribution.probabilities, classical_walk(n).probabilities, atol=1e-12)


def test_exponent_decreases_with_position_measurement(hadamard, symmetric_start):
    ns = list(range(10, 61, 10))
    exponents = []
    for p_x in (0.0, 0.05, 0.2, 1.0):
        series = open_variance_scan(symmetric_start(60), hadamard, NoiseModel(position_measure_prob=p_x), ns)
        exponents.append(fit_exponent(ns, [variance for _, variance in series]))

    assert exponents == sorted(exponents, reverse=True)
    assert exponents[0] >= 1.9
    assert exponents[-1] == pytest.approx(1.0, abs=0.02)


def test_noisy_steps_keep_a_valid_state(hadamard, symmetric_start):
    noise = NoiseModel(coin_dephasing_prob=0.3, position_measure_prob=0.2, coin_angle_error=0.05)
    rho = to_density(symmetric_start(6))
    for _ in range(6):
        rho = noisy_step(rho, hadamard, noise)

    assert rho.trace == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(rho.matrix, rho.matrix.conj().T, atol=1e-12)
    assert rho.min_eigenvalue() >= -1e-12
    assert rho.purity < 1.0


def test_channels_are_complete():
    for channel in (coin_dephasing_channel(2, 0.3), position_measurement_channel(2, 0.7)):
        total = sum(k.conj().T @ k for k in channel.kraus_operators())
        assert np.allclose(total, np.eye(10), atol=1e-12)
        assert channel.completeness_deviation() <= 1e-12


def test_channel_mask_matches_kraus_sum(rng):
    channel = coin_dephasing_channel(1, 0.4)
    z = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    rho = z @ z.conj().T
    rho /= np.trace(rho)

    kraus = sum(k @ rho @ k.conj().T for k in channel.kraus_operators())
    assert np.allclose(channel.apply(rho), kraus, atol=1e-14)


def test_full_coin_dephasing_kills_coin_coherence():
    channel = coin_dephasing_channel(0, 1.0)
    rho = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)

    assert np.allclose(channel.apply(rho), np.diag([0.5, 0.5]))


def test_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        NoiseModel(coin_dephasing_prob=1.5)
    with pytest.raises(ValueError):
        NoiseModel(survival_fraction_per_step=0.0)
    with pytest.raises(ValueError):
        DephasingChannel("coin", -0.1, np.tile([0, 1], 3))


def test_trace_drift_raises():
    with pytest.raises(NumericalDriftError):
        DensityState(0, 0, np.diag([0.5, 0.4]))


def test_survival_scales_trial_multiplier(hadamard):
    result = run_open(point_state("zero", 4), 4, hadamard, NoiseModel(survival_fraction_per_step=0.9))

    assert result.trial_multiplier == pytest.approx(0.9**4)
    assert sum(result.distribution.probabilities) == pytest.approx(1.0)


def test_run_open_overflow(hadamard):
    with pytest.raises(LatticeOverflowError):
        run_open(point_state("zero", 2), 3, hadamard, NoiseModel())


def test_onset_schedule(hadamard, symmetric_start):
    quiet, loud = NoiseModel(), NoiseModel(position_measure_prob=1.0)
    schedule = onset_schedule(quiet, loud, 3)
    assert schedule(3) is quiet and schedule(4) is loud

    initial = symmetric_start(8)
    never = run_open(initial, 8, hadamard, onset_schedule(quiet, loud, 8))
    pure = run_open(initial, 8, hadamard, quiet)
    assert np.allclose(never.distribution.probabilities, pure.distribution.probabilities, atol=1e-12)

    late = run_open(initial, 8, hadamard, schedule)
    assert total_variation(late.distribution, pure.distribution) > 1e-3


def test_perturb_coin_over_rotates_rf_coin():
    coin = rf_coin_matrix(design_pulse(PulseKind.HADAMARD_ROTATION, 1.0))
    assert perturb_coin(coin, 0.0) is coin

    over = perturb_coin(coin, 0.1)
    expected = rf_coin_matrix(RfPulse(1.0, 0.0, np.pi / 2 + 0.1))
    assert np.allclose(over.entries, expected.entries, atol=1e-12)
    assert np.allclose(perturb_coin(over, -0.1).entries, coin.entries, atol=1e-12)


def test_perturb_hadamard_stays_unitary(hadamard):
    over = perturb_coin(hadamard, 0.1)
    assert np.allclose(over.entries.conj().T @ over.entries, np.eye(2), atol=1e-12)
    assert not np.allclose(over.entries, hadamard.entries)


def test_trajectories_converge_to_density_matrix(hadamard, symmetric_start):
    n, trials = 5, 20000
    noise = NoiseModel(coin_dephasing_prob=0.3, position_measure_prob=0.2)
    initial = symmetric_start(n)

    exact = run_open(initial, n, hadamard, noise).distribution
    averaged = trajectory_run(initial, n, hadamard, noise, trials, seed=11)

    assert total_variation(exact, averaged) < 5 / np.sqrt(trials)


def test_noiseless_trajectories_are_exact(hadamard, symmetric_start):
    initial = symmetric_start(6)
    averaged = trajectory_run(initial, 6, hadamard, NoiseModel(), 10, seed=1)

    assert np.allclose(averaged.probabilities, distribution(evolve(initial, 6, hadamard)).probabilities, atol=1e-12)


def test_trajectories_are_deterministic(hadamard):
    noise = NoiseModel(coin_dephasing_prob=0.5, position_measure_prob=0.5)
    first = trajectory_run(point_state("zero", 4), 4, hadamard, noise, 5000, seed=3)
    second = trajectory_run(point_state("zero", 4), 4, hadamard, noise, 5000, seed=3)

    assert np.array_equal(first.probabilities, second.probabilities)


def test_density_distribution_of_pure_state(hadamard):
    state = evolve(point_state("zero", 3), 3, hadamard)
    assert np.allclose(density_distribution(to_density(state)).probabilities, distribution(state).probabilities)


def measured_coin_walk(initial, n, coin):
    """Average over every coin-measurement record of a walk measured after each step."""
    branches = [(1.0, initial)]
    for _ in range(n):
        measured = []
        for weight, state in branches:
            stepped = step(state, coin)
            for label in (0, 1):
                projected = stepped.amplitudes.copy()
                projected[:, 1 - label] = 0
                probability = float(np.sum(np.abs(projected) ** 2))
                if probability > 0:
                    measured.append(
                        (weight * probability, stepped.with_amplitudes(projected / np.sqrt(probability)))
                    )
        branches = measured

    return sum(weight * distribution(state).probabilities for weight, state in branches)


def test_full_coin_dephasing_matches_measured_coin_walk(hadamard, random_coin, symmetric_start):
    expected = measured_coin_walk(point_state("zero", 2), 2, hadamard)
    assert np.allclose(expected, [0.25, 0, 0.5, 0, 0.25], atol=1e-15)

    result = run_open(point_state("zero", 2), 2, hadamard, NoiseModel(coin_dephasing_prob=1.0))
    assert np.allclose(result.distribution.probabilities, expected, atol=1e-12)

    coin = random_coin()
    result = run_open(symmetric_start(4), 4, coin, NoiseModel(coin_dephasing_prob=1.0))
    assert np.allclose(
        result.distribution.probabilities, measured_coin_walk(symmetric_start(4), 4, coin), atol=1e-12
    )


def test_noiseless_noisy_step_is_the_unitary_step(hadamard, random_coin, symmetric_start):
    state = evolve(symmetric_start(5), 2, hadamard)
    for coin in (hadamard, random_coin()):
        stepped = noisy_step(to_density(state), coin, NoiseModel())
        assert np.max(np.abs(stepped.matrix - to_density(step(state, coin)).matrix)) < 1e-12

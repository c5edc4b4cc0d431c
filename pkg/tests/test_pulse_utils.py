import math

import numpy as np
import pytest
from scipy.constants import atomic_mass, hbar

from bec_walk_library.pulse_utils import (
    EXCITED,
    FLIPPED,
    GROUND,
    KickDirection,
    PulseKind,
    RamanBranch,
    RamanConfig,
    RfPulse,
    ThreeLevelState,
    TwoLevelAmps,
    calibrate_kick,
    cat_expansion,
    cat_state,
    design_pulse,
    effective_rabi_frequency,
    momentum_kick,
    raman_evolve,
    raman_hamiltonian,
    rf_coin_matrix,
    rf_evolve,
    rf_populations,
    rf_propagator,
    translation_time,
)

OMEGA = 2 * math.pi * 1e3


def test_resonant_pi_pulse_flips():
    final = rf_evolve(TwoLevelAmps.ground(), design_pulse(PulseKind.PI_FLIP, OMEGA))
    assert final.populations == pytest.approx((0.0, 1.0), abs=1e-12)


def test_resonant_half_pi_pulse_balances():
    final = rf_evolve(TwoLevelAmps.ground(), design_pulse(PulseKind.HADAMARD_ROTATION, OMEGA))
    assert final.populations == pytest.approx((0.5, 0.5), abs=1e-12)


def test_zero_duration_is_identity():
    assert np.allclose(rf_propagator(RfPulse(OMEGA, 0.3 * OMEGA, 0.0)), np.eye(2))


def test_detuned_transfer_follows_generalised_rabi_formula():
    detuning = 0.7 * OMEGA
    generalized = math.hypot(OMEGA, detuning)
    for tau in (1e-4, 3e-4, 7e-4):
        final = rf_evolve(TwoLevelAmps.ground(), RfPulse(OMEGA, detuning, tau))
        expected = (OMEGA / generalized) ** 2 * math.sin(generalized * tau / 2) ** 2
        assert final.populations[1] == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("detuning", [0.0, 0.5 * OMEGA, -2.0 * OMEGA])
@pytest.mark.parametrize("tau", [1e-5, 2.5e-4, 1e-3])
def test_closed_form_agrees_with_integrator(detuning, tau):
    pulse = RfPulse(OMEGA, detuning, tau)
    start = TwoLevelAmps(0.6 + 0j, 0.8j)

    closed = rf_evolve(start, pulse).vector()
    numeric = rf_evolve(start, pulse, method="numeric").vector()
    assert np.max(np.abs(closed - numeric)) < 1e-9


@pytest.mark.parametrize("ratio", [0.0, 0.5, 1.0, 5.0])
def test_closed_form_agrees_with_integrator_over_four_pi(ratio):
    pulse = RfPulse(OMEGA, ratio * OMEGA, 4 * math.pi / OMEGA)

    closed = rf_populations(pulse, 33)
    numeric = rf_populations(pulse, 33, method="numeric")
    assert np.max(np.abs(closed[:, 1:] - numeric[:, 1:])) < 1e-9


def test_rf_populations_sampling():
    rows = rf_populations(design_pulse(PulseKind.PI_FLIP, OMEGA), 11)

    assert rows.shape == (11, 3)
    assert rows[0, 1:] == pytest.approx([1.0, 0.0])
    assert rows[-1, 1:] == pytest.approx([0.0, 1.0], abs=1e-12)
    assert np.allclose(rows[:, 1] + rows[:, 2], 1.0)


def test_unknown_method():
    with pytest.raises(ValueError):
        rf_evolve(TwoLevelAmps.ground(), RfPulse(OMEGA, 0.0, 1e-4), method="euler")


def test_design_pulse_durations():
    assert design_pulse(PulseKind.HADAMARD_ROTATION, OMEGA).duration == pytest.approx(0.25e-3)
    assert design_pulse(PulseKind.PI_FLIP, OMEGA).duration == pytest.approx(0.5e-3)


def test_rf_coin_matrix():
    coin = rf_coin_matrix(design_pulse(PulseKind.HADAMARD_ROTATION, OMEGA))
    assert np.allclose(coin.entries, np.array([[1, -1j], [-1j, 1]]) / math.sqrt(2), atol=1e-12)

    with pytest.raises(ValueError):
        rf_coin_matrix(RfPulse(OMEGA, 0.1, 1e-4))


def test_two_half_pi_coins_make_a_pi_coin():
    half = rf_coin_matrix(design_pulse(PulseKind.HADAMARD_ROTATION, OMEGA)).entries
    full = rf_coin_matrix(design_pulse(PulseKind.PI_FLIP, OMEGA)).entries

    product = half @ half
    phase = np.vdot(full, product) / 2
    assert abs(phase) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(product, phase * full, atol=1e-12)


def test_rejects_unnormalised_amplitudes():
    with pytest.raises(ValueError):
        TwoLevelAmps(1.0, 1.0)


def test_raman_hamiltonian_is_hermitian():
    config = RamanConfig(v1=1.3, v2=0.7, delta1=40.0, delta2=38.0, phi1=0.4, phi2=-1.1)
    for branch in RamanBranch:
        h = raman_hamiltonian(config, branch)
        assert np.allclose(h, h.conj().T, atol=1e-15)


def test_raman_without_coupling_is_diagonal():
    h = raman_hamiltonian(RamanConfig(v1=0.0, v2=0.0, delta1=5.0, delta2=3.0), RamanBranch.A)
    assert np.allclose(h, np.diag([0.0, 5.0, 2.0]))


def test_raman_evolve_preserves_norm():
    config = RamanConfig(v1=1.0, v2=2.0, delta1=3.0, delta2=3.0, phi1=0.2)
    state = raman_evolve(ThreeLevelState.bare(GROUND), raman_hamiltonian(config, RamanBranch.A), 5.0)

    assert state.populations.sum() == pytest.approx(1.0, abs=1e-12)


def test_far_detuned_kick_calibration():
    v = 1.0
    config = RamanConfig(v1=v, v2=v, delta1=100 * v, delta2=100 * v)
    t_max = 2 * math.pi / effective_rabi_frequency(config)
    calibration = calibrate_kick(config, t_max)

    assert calibration.fidelity >= 0.99
    assert calibration.reverse_fidelity == pytest.approx(calibration.fidelity, abs=1e-6)
    assert calibration.max_excited_population < 1e-3
    assert not calibration.at_boundary
    # close to half an effective Rabi period
    assert calibration.t_kick == pytest.approx(t_max / 2, rel=0.02)


def test_calibrated_kick_transfers_population():
    config = RamanConfig(v1=1.0, v2=1.0, delta1=100.0, delta2=100.0)
    calibration = calibrate_kick(config, 2 * math.pi / effective_rabi_frequency(config))
    final = raman_evolve(
        ThreeLevelState.bare(GROUND), raman_hamiltonian(config, RamanBranch.A), calibration.t_kick
    )

    assert final.populations[FLIPPED] == pytest.approx(calibration.fidelity, abs=1e-9)
    assert final.populations[EXCITED] < 1e-3


def test_kick_without_second_field_never_transfers():
    calibration = calibrate_kick(RamanConfig(v1=1.0, v2=0.0, delta1=100.0, delta2=100.0), 1000.0)

    assert calibration.fidelity == pytest.approx(0.0, abs=1e-20)
    assert calibration.at_boundary


def test_effective_rabi_frequency():
    assert effective_rabi_frequency(RamanConfig(v1=2.0, v2=3.0, delta1=-60.0, delta2=-60.0)) == 0.05
    with pytest.raises(ValueError):
        effective_rabi_frequency(RamanConfig(v1=1.0, v2=1.0, delta1=0.0, delta2=0.0))


def test_translation_time_for_rubidium():
    k = 2 * math.pi / 780e-9
    mass = 86.909180527 * atomic_mass
    config = RamanConfig(v1=1.0, v2=1.0, delta1=100.0, delta2=100.0, k1=k, k2=-k, atom_mass=mass, step_length_l=10e-6)

    momentum = momentum_kick(config, KickDirection.LEFT)
    assert abs(momentum) == pytest.approx(2 * hbar * k)
    assert momentum_kick(config, KickDirection.RIGHT) == -momentum

    assert abs(momentum) / mass == pytest.approx(11.8e-3, rel=5e-3)
    assert translation_time(momentum, config) == pytest.approx(0.849e-3, rel=1e-3)


def test_copropagating_beams_give_no_kick():
    with pytest.raises(ValueError):
        momentum_kick(RamanConfig(v1=1.0, v2=1.0, delta1=10.0, delta2=10.0, k1=5.0, k2=5.0), KickDirection.LEFT)


def test_cat_expansion_is_normalised():
    a, b = 0.6, 0.8j
    coefficients = cat_expansion(a, b, 50)

    assert np.sum(np.abs(coefficients) ** 2) == pytest.approx(1.0, abs=1e-12)
    assert coefficients[0] == pytest.approx(a**50)
    assert coefficients[-1] == pytest.approx(b**50)


@pytest.mark.parametrize("a, b", [(1 / math.sqrt(2), 1 / math.sqrt(2)), (0.6, 0.8j)])
def test_cat_expansion_is_normalised_for_ten_thousand_atoms(a, b):
    coefficients = cat_expansion(a, b, 10**4)

    assert len(coefficients) == 10**4 + 1
    assert math.fsum(np.abs(coefficients) ** 2) == pytest.approx(1.0, abs=1e-9)


def test_cat_state_branches():
    cat = cat_state(1 / math.sqrt(2), 1j / math.sqrt(2), 3)
    assert sum(cat.branch_probabilities) == pytest.approx(1.0, abs=1e-12)
    assert cat.branch_probabilities == pytest.approx((0.5, 0.5))
    assert cat.branch_1 / cat.branch_0 == pytest.approx((1j) ** 3)


def test_large_cat_state_survives_underflow():
    cat = cat_state(math.sqrt(0.6), math.sqrt(0.4), 10**4)

    assert cat.raw_weight_0 == 0.0 and cat.raw_weight_1 == 0.0
    assert sum(cat.branch_probabilities) == pytest.approx(1.0, abs=1e-12)
    assert cat.branch_probabilities[0] == pytest.approx(1.0, abs=1e-12)


def test_single_branch_cat():
    cat = cat_state(1.0, 0.0, 20)
    assert cat.branch_probabilities == (1.0, 0.0)


def test_cat_rejects_bad_input():
    with pytest.raises(ValueError):
        cat_state(1.0, 1.0, 5)
    with pytest.raises(ValueError):
        cat_expansion(1.0, 0.0, 0)

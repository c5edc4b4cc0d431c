"""Physical-layer pulse simulation.

rf Rabi dynamics of the coin states, three-level stimulated Raman dynamics of
the kick, kick kinematics and the cat-state amplitude algebra. Hamiltonians are
in angular-frequency units (H / hbar, rad/s).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np
from scipy.constants import hbar
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar
from scipy.special import gammaln, logsumexp, xlogy

from .walk_utils import CoinOperator

# Initiate logging
from .log_config import get_logger

log = get_logger(__name__)

STATE_TOLERANCE = 1e-12
HERMITIAN_TOLERANCE = 1e-12
INTEGRATOR_RTOL = 1e-12
INTEGRATOR_ATOL = 1e-13
CALIBRATION_GRID_POINTS = 4001
CALIBRATION_XTOL = 1e-6
TRANSFER_FLOOR = 1e-24

GROUND, EXCITED, FLIPPED = 0, 1, 2


class PulseKind(str, Enum):
    HADAMARD_ROTATION = "hadamard-rotation"
    PI_FLIP = "pi-flip"


class RamanBranch(str, Enum):
    """Branch a drives |0> -> |e> -> |1>, branch b drives |1> -> |e> -> |0>."""

    A = "a"
    B = "b"


class KickDirection(str, Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class RfPulse:
    """Square rf pulse coupling the two coin states.

    Attributes
    ----------
    rabi_frequency : float
        omega_R, rad/s
    detuning : float
        Delta, rad/s
    duration : float
        tau, s
    """

    rabi_frequency: float
    detuning: float
    duration: float

    def __post_init__(self) -> None:
        if self.rabi_frequency <= 0:
            raise ValueError(f"Rabi frequency must be positive, got {self.rabi_frequency}")
        if self.duration < 0:
            raise ValueError(f"Pulse duration must be >= 0, got {self.duration}")

    @property
    def area(self) -> float:
        return self.rabi_frequency * self.duration

    def hamiltonian(self) -> np.ndarray:
        return np.array(
            [[0, self.rabi_frequency / 2], [self.rabi_frequency / 2, self.detuning]],
            dtype=complex,
        )


@dataclass(frozen=True)
class TwoLevelAmps:
    a: complex
    b: complex

    def __post_init__(self) -> None:
        norm = abs(self.a) ** 2 + abs(self.b) ** 2
        if abs(norm - 1) > STATE_TOLERANCE:
            raise ValueError(f"Two-level amplitudes have norm {norm!r}, expected 1")

    @classmethod
    def ground(cls) -> TwoLevelAmps:
        return cls(1.0 + 0j, 0j)

    @property
    def populations(self) -> Tuple[float, float]:
        return abs(self.a) ** 2, abs(self.b) ** 2

    def vector(self) -> np.ndarray:
        return np.array([self.a, self.b], dtype=complex)


@dataclass(frozen=True)
class RamanConfig:
    """Stimulated Raman kick parameters.

    Attributes
    ----------
    v1, v2 : float
        dipole couplings of the |0>-|e> and |e>-|1> fields, rad/s
    delta1, delta2 : float
        detunings of the two fields, rad/s; two-photon detuning is delta1 - delta2
    phi1, phi2 : float
        field phases, rad
    k1, k2 : float
        signed wave numbers along the trap axis, 1/m
    atom_mass : float
        kg
    step_length_l : float
        m
    """

    v1: float
    v2: float
    delta1: float
    delta2: float
    phi1: float = 0.0
    phi2: float = 0.0
    k1: float = 0.0
    k2: float = 0.0
    atom_mass: float = 1.0
    step_length_l: float = 1.0

    def __post_init__(self) -> None:
        if self.v1 < 0 or self.v2 < 0:
            raise ValueError(f"Raman couplings must be >= 0, got V1={self.v1}, V2={self.v2}")
        for name in ("delta1", "delta2", "phi1", "phi2", "k1", "k2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.atom_mass <= 0 or self.step_length_l <= 0:
            raise ValueError("atom_mass and step_length_l must be positive")

    @property
    def two_photon_detuning(self) -> float:
        return self.delta1 - self.delta2


@dataclass(frozen=True)
class ThreeLevelState:
    """Amplitudes over the bare states |0>, |e>, |1>."""

    amplitudes: Tuple[complex, complex, complex]

    def __post_init__(self) -> None:
        vector = np.asarray(self.amplitudes, dtype=complex)
        norm = float(np.vdot(vector, vector).real)
        if vector.shape != (3,) or abs(norm - 1) > STATE_TOLERANCE:
            raise ValueError(f"Three-level state must be a unit 3-vector, got norm {norm!r}")
        object.__setattr__(self, "amplitudes", tuple(complex(x) for x in vector))

    @classmethod
    def bare(cls, level: int) -> ThreeLevelState:
        vector = [0j, 0j, 0j]
        vector[level] = 1 + 0j
        return cls(tuple(vector))

    @property
    def populations(self) -> np.ndarray:
        return np.abs(np.asarray(self.amplitudes)) ** 2


@dataclass(frozen=True)
class CatState:
    """Two-branch macroscopic superposition of all atoms in |0> or all in |1>.

    Attributes
    ----------
    n_atoms : int
        atom count N
    a, b : complex
        single-atom amplitudes
    branch_0, branch_1 : complex
        renormalised amplitudes of |N, 0> and |0, N>
    raw_weight_0, raw_weight_1 : float
        |a|^(2N) and |b|^(2N) before renormalisation (may underflow to 0)
    """

    n_atoms: int
    a: complex
    b: complex
    branch_0: complex
    branch_1: complex
    raw_weight_0: float
    raw_weight_1: float

    @property
    def branch_probabilities(self) -> Tuple[float, float]:
        return abs(self.branch_0) ** 2, abs(self.branch_1) ** 2


@dataclass(frozen=True)
class KickCalibration:
    """Result of a Raman kick calibration.

    Attributes
    ----------
    t_kick : float
        kick duration maximising the |0> -> |1> transfer, s
    fidelity : float
        transfer probability at t_kick
    reverse_fidelity : float
        |1> -> |0> transfer on branch b at the same t_kick
    max_excited_population : float
        largest |e> population sampled on [0, t_kick]
    at_boundary : bool
        True when the maximum sits on the edge of the scan window
    """

    t_kick: float
    fidelity: float
    reverse_fidelity: float
    max_excited_population: float
    at_boundary: bool


def rf_propagator(pulse: RfPulse) -> np.ndarray:
    """Closed-form propagator of the rf Hamiltonian over the pulse duration.

    With Omega = sqrt(omega_R^2 + Delta^2), the generator is
    Delta/2 + (Omega/2) n.sigma with n = (omega_R, 0, -Delta) / Omega.
    """
    omega, delta, tau = pulse.rabi_frequency, pulse.detuning, pulse.duration
    generalized = math.hypot(omega, delta)
    half_angle = generalized * tau / 2

    direction = np.array([[-delta, omega], [omega, delta]], dtype=complex) / generalized
    rotation = math.cos(half_angle) * np.eye(2) - 1j * math.sin(half_angle) * direction

    return np.exp(-1j * delta * tau / 2) * rotation


def rf_evolve(amps: TwoLevelAmps, pulse: RfPulse, method: str = "closed-form") -> TwoLevelAmps:
    """Evolve two-level amplitudes under an rf pulse.

    Parameters
    ----------
    amps : TwoLevelAmps
        initial amplitudes
    pulse : RfPulse
        the pulse
    method : {'closed-form', 'numeric'}, default: 'closed-form'
        generalised Rabi formula, or direct integration with ``solve_ivp``

    Returns
    -------
    TwoLevelAmps
    """
    if method == "closed-form":
        a, b = rf_propagator(pulse) @ amps.vector()
    elif method == "numeric":
        a, b = _integrate_schrodinger(pulse.hamiltonian(), amps.vector(), pulse.duration)
    else:
        raise ValueError(f"Unknown method '{method}'. Valid options: closed-form, numeric")

    return TwoLevelAmps(complex(a), complex(b))


def rf_populations(pulse: RfPulse, samples: int, method: str = "closed-form") -> np.ndarray:
    """Populations of |0> and |1> from |0>, sampled on [0, duration].

    Returns
    -------
    np.ndarray
        rows of (tau, P0, P1)
    """
    if samples < 2:
        raise ValueError(f"Need at least 2 samples, got {samples}")

    rows = []
    for tau in np.linspace(0, pulse.duration, samples):
        sampled = RfPulse(pulse.rabi_frequency, pulse.detuning, float(tau))
        rows.append((tau, *rf_evolve(TwoLevelAmps.ground(), sampled, method).populations))

    return np.array(rows)


def design_pulse(kind: PulseKind, rabi_frequency: float) -> RfPulse:
    """Resonant pulse realising a Hadamard-type rotation (pi/2) or a bit flip (pi)."""
    kind = PulseKind(kind)
    if rabi_frequency <= 0:
        raise ValueError(f"Rabi frequency must be positive, got {rabi_frequency}")

    area = math.pi / 2 if kind is PulseKind.HADAMARD_ROTATION else math.pi
    return RfPulse(rabi_frequency, 0.0, area / rabi_frequency)


def rf_coin_matrix(pulse: RfPulse) -> CoinOperator:
    """Coin realised by a resonant rf pulse, cos(A/2) 1 - i sin(A/2) sigma_x.

    Raises
    ------
    ValueError
        for a detuned pulse
    """
    if pulse.detuning != 0:
        raise ValueError(
            f"Only resonant pulses define a walk coin here (detuning={pulse.detuning}); "
            "use rf_evolve for detuned dynamics"
        )

    half_area = pulse.area / 2
    entries = np.array(
        [
            [math.cos(half_area), -1j * math.sin(half_area)],
            [-1j * math.sin(half_area), math.cos(half_area)],
        ]
    )
    return CoinOperator(entries, name=f"rf-{pulse.area:.6g}rad")


def raman_hamiltonian(config: RamanConfig, branch: RamanBranch) -> np.ndarray:
    """Three-level rotating-wave Hamiltonian over (|0>, |e>, |1>), rad/s.

    Transposed couplings carry conjugate phases so the matrix is Hermitian by
    construction.
    """
    branch = RamanBranch(branch)
    hamiltonian = np.zeros((3, 3), dtype=complex)

    if branch is RamanBranch.A:
        # |0> at zero energy
        hamiltonian[EXCITED, EXCITED] = config.delta1
        hamiltonian[FLIPPED, FLIPPED] = config.delta1 - config.delta2
        coupling_0e = -config.v1 / 2 * np.exp(-1j * config.phi1)
        coupling_1e = -config.v2 / 2 * np.exp(-1j * config.phi2)
    else:
        # |1> at zero energy
        hamiltonian[EXCITED, EXCITED] = config.delta2
        hamiltonian[GROUND, GROUND] = config.delta2 - config.delta1
        coupling_0e = -config.v1 / 2 * np.exp(1j * config.phi1)
        coupling_1e = -config.v2 / 2 * np.exp(1j * config.phi2)

    # <e|H|0> and <e|H|1>
    hamiltonian[EXCITED, GROUND] = coupling_0e
    hamiltonian[GROUND, EXCITED] = np.conj(coupling_0e)
    hamiltonian[EXCITED, FLIPPED] = np.conj(coupling_1e)
    hamiltonian[FLIPPED, EXCITED] = coupling_1e

    return hamiltonian


def raman_evolve(state: ThreeLevelState, hamiltonian: np.ndarray, t: float) -> ThreeLevelState:
    """Apply exp(-i H t) through the eigendecomposition of the Hermitian H."""
    energies, vectors = _hermitian_eigh(hamiltonian)
    propagator = (vectors * np.exp(-1j * energies * t)) @ vectors.conj().T

    return ThreeLevelState(tuple(propagator @ np.asarray(state.amplitudes)))


def effective_rabi_frequency(config: RamanConfig) -> float:
    """Two-photon Rabi frequency V1 V2 / (2 |Delta1|) after adiabatic elimination of |e>."""
    if config.delta1 == 0:
        raise ValueError("Adiabatic elimination needs a non-zero single-photon detuning")
    return config.v1 * config.v2 / (2 * abs(config.delta1))


def calibrate_kick(config: RamanConfig, t_max: float) -> KickCalibration:
    """Find the kick duration maximising the |0> -> |1> transfer on branch a.

    The transfer probability is scanned on a uniform grid over (0, t_max]; the
    best grid point (the earliest on ties) is refined by golden-section search
    to relative precision CALIBRATION_XTOL. A maximum on either end of the
    window is flagged through ``at_boundary``.

    Parameters
    ----------
    config : RamanConfig
        kick parameters
    t_max : float
        end of the scan window, s; should span at least one effective Rabi period

    Returns
    -------
    KickCalibration
    """
    if t_max <= 0:
        raise ValueError(f"t_max must be positive, got {t_max}")

    forward = _transfer_amplitude(raman_hamiltonian(config, RamanBranch.A), GROUND, FLIPPED)
    times = np.linspace(0, t_max, CALIBRATION_GRID_POINTS)[1:]
    fidelities = np.abs(forward(times)) ** 2
    # eigenvector round-off leaves ~1e-30 transfer when a coupling is switched off
    fidelities[fidelities < TRANSFER_FLOOR] = 0.0

    best = int(np.argmax(fidelities))
    t_kick, fidelity = float(times[best]), float(fidelities[best])
    at_boundary = best == 0 or best == len(times) - 1

    if not at_boundary and fidelities[best] > max(fidelities[best - 1], fidelities[best + 1]):
        refined = minimize_scalar(
            lambda t: -abs(forward(np.array([t]))[0]) ** 2,
            bracket=(times[best - 1], times[best], times[best + 1]),
            method="golden",
            options={"xtol": CALIBRATION_XTOL},
        )
        if -refined.fun >= fidelity:
            t_kick, fidelity = float(refined.x), float(-refined.fun)

    if at_boundary:
        log.warning(
            f"Kick transfer maximum {fidelity:.6f} sits at the edge of the scan window "
            f"(t={t_kick:.6e} s, t_max={t_max:.6e} s)"
        )

    backward = _transfer_amplitude(raman_hamiltonian(config, RamanBranch.B), FLIPPED, GROUND)
    reverse_fidelity = float(np.abs(backward(np.array([t_kick]))[0]) ** 2)

    calibration = KickCalibration(
        t_kick=t_kick,
        fidelity=fidelity,
        reverse_fidelity=reverse_fidelity,
        max_excited_population=excited_population_peak(config, t_kick),
        at_boundary=at_boundary,
    )
    log.info(f"Calibrated kick: t={t_kick:.6e} s, fidelity={fidelity:.6f}")

    return calibration


def excited_population_peak(config: RamanConfig, t_end: float, samples: int = 4001) -> float:
    """Largest |e> population on [0, t_end] starting from |0> on branch a."""
    amplitude = _transfer_amplitude(raman_hamiltonian(config, RamanBranch.A), GROUND, EXCITED)
    return float(np.max(np.abs(amplitude(np.linspace(0, t_end, samples))) ** 2))


def momentum_kick(config: RamanConfig, direction: KickDirection) -> float:
    """Momentum imparted by one Raman kick, kg m/s.

    hbar (k1 - k2) for the |0> -> |1> branch (left), hbar (k2 - k1) for the
    reverse branch (right).
    """
    direction = KickDirection(direction)
    if config.k1 == config.k2:
        raise ValueError("Copropagating beams with k1 == k2 impart no momentum kick")

    if direction is KickDirection.LEFT:
        return hbar * (config.k1 - config.k2)
    return hbar * (config.k2 - config.k1)


def translation_time(momentum: float, config: RamanConfig) -> float:
    """Time for the kicked condensate to travel one step, m l / |P|."""
    if momentum == 0:
        raise ValueError("A zero momentum kick never translates the condensate")
    return config.atom_mass * config.step_length_l / abs(momentum)


def cat_expansion(a: complex, b: complex, n_atoms: int) -> np.ndarray:
    """Coefficients of |N - n, n> in the product state (a|0> + b|1>)^N, n = 0 ... N.

    Magnitudes are evaluated through log-factorials so large N does not
    overflow.
    """
    _check_single_atom(a, b, n_atoms)

    n = np.arange(n_atoms + 1)
    log_binomial = gammaln(n_atoms + 1) - gammaln(n + 1) - gammaln(n_atoms - n + 1)
    log_magnitude = 0.5 * log_binomial + xlogy(n_atoms - n, abs(a)) + xlogy(n, abs(b))
    phase = (n_atoms - n) * np.angle(a) + n * np.angle(b)

    return np.exp(log_magnitude + 1j * phase)


def cat_state(a: complex, b: complex, n_atoms: int) -> CatState:
    """Renormalised two-branch cat state a^N |N, 0> + b^N |0, N>."""
    _check_single_atom(a, b, n_atoms)

    log_weights = np.array([xlogy(2 * n_atoms, abs(a)), xlogy(2 * n_atoms, abs(b))])
    normalised = np.exp(log_weights - logsumexp(log_weights))
    phases = np.exp(1j * n_atoms * np.array([np.angle(a), np.angle(b)]))
    branches = np.sqrt(normalised) * phases

    return CatState(
        n_atoms=n_atoms,
        a=complex(a),
        b=complex(b),
        branch_0=complex(branches[0]),
        branch_1=complex(branches[1]),
        raw_weight_0=float(np.exp(log_weights[0])),
        raw_weight_1=float(np.exp(log_weights[1])),
    )


def _check_single_atom(a: complex, b: complex, n_atoms: int) -> None:
    if n_atoms < 1:
        raise ValueError(f"Atom count must be >= 1, got {n_atoms}")
    norm = abs(a) ** 2 + abs(b) ** 2
    if abs(norm - 1) > STATE_TOLERANCE:
        raise ValueError(f"Single-atom amplitudes have norm {norm!r}, expected 1")


def _hermitian_eigh(hamiltonian: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    hamiltonian = np.asarray(hamiltonian, dtype=complex)
    deviation = np.max(np.abs(hamiltonian - hamiltonian.conj().T))
    if deviation > HERMITIAN_TOLERANCE * max(1.0, np.max(np.abs(hamiltonian))):
        raise ValueError(f"Hamiltonian is not Hermitian (deviation {deviation:.3e})")
    return np.linalg.eigh(hamiltonian)


def _transfer_amplitude(hamiltonian: np.ndarray, start: int, end: int):
    """Vectorised t -> <end| exp(-i H t) |start>."""
    energies, vectors = _hermitian_eigh(hamiltonian)
    weights = vectors[end] * vectors[start].conj()

    def amplitude(times: np.ndarray) -> np.ndarray:
        return np.exp(-1j * np.outer(times, energies)) @ weights

    return amplitude


def _integrate_schrodinger(hamiltonian: np.ndarray, initial: np.ndarray, duration: float) -> np.ndarray:
    if duration == 0:
        return initial.copy()

    # integrate in units of the pulse area so tolerances do not depend on time scale
    scale = max(np.max(np.abs(hamiltonian)), 1.0 / duration)
    scaled = hamiltonian / scale

    solution = solve_ivp(
        lambda s, y: -1j * (scaled @ y),
        t_span=(0.0, duration * scale),
        y0=initial.astype(complex),
        method="DOP853",
        rtol=INTEGRATOR_RTOL,
        atol=INTEGRATOR_ATOL,
    )
    if not solution.success:
        raise ArithmeticError(f"Schrodinger integration failed: {solution.message}")

    return solution.y[:, -1]

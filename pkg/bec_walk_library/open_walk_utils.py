"""Decoherent walk evolution: density matrices, Kraus channels and trajectories.

Two channels act after every unitary step: coin dephasing (a coin measurement
with probability p_c) and position measurement (with probability p_x). Both are
projective dephasing channels, rho -> (1 - p) rho + p sum_k P_k rho P_k, with
Kraus operators sqrt(1 - p) 1 and sqrt(p) P_k. The projectors are diagonal in
the (position, coin) basis, so each channel is stored as one label per basis
state and applied as an entrywise mask.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np

from .rng_utils import block_uniforms, trial_blocks
from .walk_utils import (
    CoinOperator,
    Distribution,
    LatticeOverflowError,
    NumericalDriftError,
    WalkState,
    moments,
    support_radius,
)

# Initiate logging
from .log_config import get_logger

log = get_logger(__name__)

TRACE_TOLERANCE = 1e-10
HERMITIAN_TOLERANCE = 1e-12
COMPLETENESS_TOLERANCE = 1e-12

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True, eq=False)
class DensityState:
    """Mixed state of the walker over (position, coin) pairs.

    Attributes
    ----------
    origin_index : int
        lattice position of the centre site
    half_width : int
        lattice half width
    matrix : np.ndarray
        Hermitian matrix of dimension 2 * (2 * half_width + 1), indexed
        site-major with the coin inside each site
    """

    origin_index: int
    half_width: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=complex)
        dimension = 2 * (2 * self.half_width + 1)
        if matrix.shape != (dimension, dimension):
            raise ValueError(
                f"Density matrix must be {dimension}x{dimension}, got {matrix.shape}"
            )

        asymmetry = np.max(np.abs(matrix - matrix.conj().T))
        if asymmetry > HERMITIAN_TOLERANCE:
            raise ValueError(f"Density matrix is not Hermitian (deviation {asymmetry:.3e})")

        trace = self._trace(matrix)
        if abs(trace - 1) > TRACE_TOLERANCE:
            raise NumericalDriftError(f"Density matrix trace is {trace!r}, expected 1")

        object.__setattr__(self, "matrix", matrix)

    @staticmethod
    def _trace(matrix: np.ndarray) -> float:
        return float(np.trace(matrix).real)

    @property
    def sites(self) -> int:
        return 2 * self.half_width + 1

    @property
    def trace(self) -> float:
        return self._trace(self.matrix)

    @property
    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def tensor(self) -> np.ndarray:
        """View of the matrix with axes (site, coin, site, coin)."""
        return self.matrix.reshape(self.sites, 2, self.sites, 2)


@dataclass(frozen=True, eq=False)
class DephasingChannel:
    """Projective dephasing channel in Kraus form.

    Attributes
    ----------
    name : str
        label for logs
    probability : float
        probability the projective measurement happens
    labels : np.ndarray
        integer label per basis state; basis states sharing a label belong to
        the same projector
    """

    name: str
    probability: float
    labels: np.ndarray

    def __post_init__(self) -> None:
        if not 0 <= self.probability <= 1:
            raise ValueError(
                f"{self.name} probability must lie in [0, 1], got {self.probability}"
            )

        labels = np.asarray(self.labels)
        object.__setattr__(self, "labels", labels)

        deviation = self.completeness_deviation()
        if deviation > COMPLETENESS_TOLERANCE:
            raise ValueError(
                f"{self.name} Kraus operators are not complete (deviation {deviation:.3e})"
            )

    @property
    def outcomes(self) -> np.ndarray:
        return np.unique(self.labels)

    def projector_diagonals(self) -> np.ndarray:
        """Diagonals of the projectors, one row per outcome."""
        return (self.labels[None, :] == self.outcomes[:, None]).astype(float)

    def kraus_operators(self) -> List[np.ndarray]:
        """Explicit dense Kraus operators (small lattices only)."""
        dimension = len(self.labels)
        operators = [math.sqrt(1 - self.probability) * np.eye(dimension)]
        operators += [
            math.sqrt(self.probability) * np.diag(diagonal)
            for diagonal in self.projector_diagonals()
        ]
        return operators

    def completeness_deviation(self) -> float:
        """max |sum_k K_k^dagger K_k - 1|, evaluated on the diagonal projectors."""
        diagonals = self.projector_diagonals()
        total = (1 - self.probability) + self.probability * diagonals.sum(axis=0)
        return float(np.max(np.abs(total - 1)))

    def mask(self) -> np.ndarray:
        same = self.labels[:, None] == self.labels[None, :]
        return (1 - self.probability) + self.probability * same

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        if self.probability == 0:
            return matrix
        return matrix * self.mask()


@dataclass(frozen=True)
class NoiseModel:
    """Per-step imperfections of the walk.

    Attributes
    ----------
    coin_dephasing_prob : float
        probability per step of a coin measurement, in [0, 1]
    position_measure_prob : float
        probability per step of a position measurement, in [0, 1]
    coin_angle_error : float
        systematic over-rotation of the coin pulse, radians
    survival_fraction_per_step : float
        fraction of atoms kept per step, in (0, 1]; scales trial counts only
    """

    coin_dephasing_prob: float = 0.0
    position_measure_prob: float = 0.0
    coin_angle_error: float = 0.0
    survival_fraction_per_step: float = 1.0

    def __post_init__(self) -> None:
        for name in ("coin_dephasing_prob", "position_measure_prob"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if not 0 < self.survival_fraction_per_step <= 1:
            raise ValueError(
                f"survival_fraction_per_step must lie in (0, 1], got {self.survival_fraction_per_step}"
            )
        if not math.isfinite(self.coin_angle_error):
            raise ValueError(f"coin_angle_error must be finite, got {self.coin_angle_error}")

    @property
    def is_noiseless(self) -> bool:
        return (
            self.coin_dephasing_prob == 0
            and self.position_measure_prob == 0
            and self.coin_angle_error == 0
        )


NoiseSchedule = Callable[[int], NoiseModel]


@dataclass(frozen=True, eq=False)
class OpenWalkResult:
    """Outcome of a density-matrix run.

    Attributes
    ----------
    distribution : Distribution
        position probabilities after the run
    trial_multiplier : float
        product of per-step survival fractions; expected fraction of trials
        that still carry a detectable condensate
    trace : float
        trace of the final density matrix
    """

    distribution: Distribution
    trial_multiplier: float
    trace: float


def onset_schedule(before: NoiseModel, after: NoiseModel, onset_step: int) -> NoiseSchedule:
    """Noise that switches from ``before`` to ``after`` once ``onset_step`` steps are done.

    Models decoherence setting in beyond a distance x_n = onset_step * l from
    the trap centre.
    """
    if onset_step < 0:
        raise ValueError(f"onset_step must be >= 0, got {onset_step}")

    def schedule(step_number: int) -> NoiseModel:
        return before if step_number <= onset_step else after

    return schedule


def perturb_coin(coin: CoinOperator, angle_error: float) -> CoinOperator:
    """Coin with its rotation angle changed by ``angle_error`` radians.

    The coin is written as e^{i alpha} R(n, theta) with theta in [0, pi]; the
    result is e^{i alpha} R(n, theta + angle_error). A coin with no rotation
    axis (a pure phase) is over-rotated about x, the rf drive axis.
    """
    if angle_error == 0:
        return coin

    entries = coin.entries
    alpha = np.angle(np.linalg.det(entries)) / 2
    special = entries * np.exp(-1j * alpha)
    if np.trace(special).real < 0:
        special = -special

    # special = cos(theta/2) 1 - i sin(theta/2) n.sigma
    axis = np.array([-special[1, 0].imag, special[1, 0].real, -special[0, 0].imag])
    length = np.linalg.norm(axis)
    axis = axis / length if length > 1e-12 else np.array([1.0, 0.0, 0.0])

    generator = sum(component * pauli for component, pauli in zip(axis, PAULI))
    rotation = math.cos(angle_error / 2) * np.eye(2) - 1j * math.sin(angle_error / 2) * generator

    return CoinOperator(entries @ rotation, name=f"{coin.name}+{angle_error:g}rad")


def to_density(state: WalkState) -> DensityState:
    """Projector onto a pure walk state."""
    vector = state.amplitudes.reshape(-1) / math.sqrt(state.norm)
    return DensityState(state.origin_index, state.half_width, np.outer(vector, vector.conj()))


def coin_dephasing_channel(half_width: int, probability: float) -> DephasingChannel:
    labels = np.tile([0, 1], 2 * half_width + 1)
    return DephasingChannel("coin dephasing", probability, labels)


def position_measurement_channel(half_width: int, probability: float) -> DephasingChannel:
    labels = np.repeat(np.arange(2 * half_width + 1), 2)
    return DephasingChannel("position measurement", probability, labels)


def noisy_step(rho: DensityState, coin: CoinOperator, noise: NoiseModel) -> DensityState:
    """One decoherent walk step.

    Applies the coin (over-rotated by ``noise.coin_angle_error``), the
    conditional shift, the coin dephasing channel and the position measurement
    channel, in that order.

    Raises
    ------
    LatticeOverflowError
        if amplitude would leave the lattice
    NumericalDriftError
        if the trace drifts beyond TRACE_TOLERANCE
    """
    matrix = _unitary_step(rho, perturb_coin(coin, noise.coin_angle_error))
    matrix = coin_dephasing_channel(rho.half_width, noise.coin_dephasing_prob).apply(matrix)
    matrix = position_measurement_channel(rho.half_width, noise.position_measure_prob).apply(
        matrix
    )

    return DensityState(rho.origin_index, rho.half_width, matrix)


def run_open(
    initial: WalkState,
    n: int,
    coin: CoinOperator,
    noise: Union[NoiseModel, NoiseSchedule],
) -> OpenWalkResult:
    """Run n decoherent steps from a pure state.

    Parameters
    ----------
    initial : WalkState
        starting state, lattice sized for n steps
    n : int
        number of steps
    coin : CoinOperator
        ideal coin
    noise : NoiseModel or callable
        a fixed noise model, or a schedule mapping step number (1-based) to one

    Returns
    -------
    OpenWalkResult
    """
    result = None
    for k, rho, multiplier in _iter_open(initial, n, coin, noise):
        result = (rho, multiplier)

    rho, multiplier = result
    log.info(f"Density-matrix run of {n} steps finished, trace={rho.trace:.15f}")

    return OpenWalkResult(density_distribution(rho), multiplier, rho.trace)


def open_variance_scan(
    initial: WalkState,
    coin: CoinOperator,
    noise: Union[NoiseModel, NoiseSchedule],
    n_list: Sequence[int],
) -> List[Tuple[int, float]]:
    """Variance at each requested step count from a single density-matrix pass."""
    wanted = sorted(set(int(n) for n in n_list))
    if not wanted:
        return []

    series = []
    for k, rho, _ in _iter_open(initial, wanted[-1], coin, noise):
        if k in wanted:
            series.append((k, moments(density_distribution(rho))[1]))

    return series


def density_distribution(rho: DensityState) -> Distribution:
    """Diagonal of the density matrix traced over the coin."""
    diagonal = np.diagonal(rho.matrix).real.reshape(rho.sites, 2).sum(axis=1)
    # round-off can leave -1e-18 on sites the walker never reached
    diagonal = np.clip(diagonal, 0, None)

    return Distribution(rho.origin_index, rho.half_width, diagonal / diagonal.sum())


def trajectory_run(
    initial: WalkState,
    n: int,
    coin: CoinOperator,
    noise: Union[NoiseModel, NoiseSchedule],
    trials: int,
    seed: int,
) -> Distribution:
    """Monte Carlo unravelling of the decoherent walk.

    Each trajectory applies the coin and the shift, then with probability p_c
    measures the coin and with probability p_x measures the position, sampling
    the outcome and collapsing the state. The average of the trajectories'
    position distributions converges to ``run_open``.

    Parameters
    ----------
    initial : WalkState
        starting state, lattice sized for n steps
    n : int
        number of steps
    coin : CoinOperator
        ideal coin
    noise : NoiseModel or callable
        noise model or per-step schedule
    trials : int
        number of trajectories
    seed : int
        seed of the counter-based streams; trajectory t depends only on (seed, t)

    Returns
    -------
    Distribution
        trajectory-averaged position probabilities
    """
    _check_lattice(initial, n)
    schedule = _as_schedule(noise)
    sites = initial.sites
    start = initial.amplitudes / math.sqrt(initial.norm)
    totals = np.zeros(sites)

    for block_index, _, count in trial_blocks(trials):
        uniforms = block_uniforms(seed, block_index, (n, 4))[..., :count]
        amplitudes = np.broadcast_to(start, (count, sites, 2)).copy()

        for k in range(n):
            model = schedule(k + 1)
            entries_t = perturb_coin(coin, model.coin_angle_error).entries.T
            amplitudes = _shift_batch(amplitudes @ entries_t)

            measured = uniforms[k, 0] < model.coin_dephasing_prob
            if np.any(measured):
                amplitudes[measured] = _measure_coin(amplitudes[measured], uniforms[k, 1, measured])

            measured = uniforms[k, 2] < model.position_measure_prob
            if np.any(measured):
                amplitudes[measured] = _measure_position(
                    amplitudes[measured], uniforms[k, 3, measured]
                )

        totals += np.sum(np.abs(amplitudes) ** 2, axis=(0, 2))

    log.info(f"Averaged {trials} trajectories of {n} steps (seed={seed})")
    return Distribution(initial.origin_index, initial.half_width, totals / totals.sum())


def _as_schedule(noise: Union[NoiseModel, NoiseSchedule]) -> NoiseSchedule:
    if isinstance(noise, NoiseModel):
        return lambda step_number: noise
    return noise


def _check_lattice(initial: WalkState, n: int) -> None:
    if n < 0:
        raise ValueError(f"Step count must be >= 0, got {n}")
    radius = support_radius(initial)
    if radius + n > initial.half_width:
        raise LatticeOverflowError(initial.origin_index + radius + n, initial.half_width)


def _iter_open(initial, n, coin, noise):
    _check_lattice(initial, n)
    schedule = _as_schedule(noise)
    rho = to_density(initial)
    multiplier = 1.0

    yield 0, rho, multiplier
    for k in range(1, n + 1):
        model = schedule(k)
        rho = noisy_step(rho, coin, model)
        multiplier *= model.survival_fraction_per_step
        yield k, rho, multiplier


def _shift_rows(tensor: np.ndarray) -> np.ndarray:
    """Conditional shift on the leading (site, coin) axes."""
    shifted = np.zeros_like(tensor)
    shifted[:-1, 0] = tensor[1:, 0]
    shifted[1:, 1] = tensor[:-1, 1]
    return shifted


def _unitary_step(rho: DensityState, coin: CoinOperator) -> np.ndarray:
    entries = coin.entries
    tensor = np.einsum("ab,xbyc->xayc", entries, rho.tensor())
    tensor = np.einsum("xayc,dc->xayd", tensor, entries.conj())

    # the diagonal of the edge sites tells whether amplitude is about to leave
    if tensor[0, 0, 0, 0] != 0:
        raise LatticeOverflowError(rho.origin_index - rho.half_width - 1, rho.half_width)
    if tensor[-1, 1, -1, 1] != 0:
        raise LatticeOverflowError(rho.origin_index + rho.half_width + 1, rho.half_width)

    tensor = _shift_rows(tensor)
    tensor = _shift_rows(tensor.transpose(2, 3, 0, 1)).transpose(2, 3, 0, 1)

    dimension = 2 * rho.sites
    matrix = tensor.reshape(dimension, dimension)
    # restore exact Hermiticity lost to round-off
    return 0.5 * (matrix + matrix.conj().T)


def _shift_batch(amplitudes: np.ndarray) -> np.ndarray:
    shifted = np.zeros_like(amplitudes)
    shifted[:, :-1, 0] = amplitudes[:, 1:, 0]
    shifted[:, 1:, 1] = amplitudes[:, :-1, 1]
    return shifted


def _measure_coin(amplitudes: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    weights = np.sum(np.abs(amplitudes) ** 2, axis=1)
    p_zero = weights[:, 0] / weights.sum(axis=1)
    outcome_one = uniforms >= p_zero

    collapsed = amplitudes.copy()
    collapsed[outcome_one, :, 0] = 0
    collapsed[~outcome_one, :, 1] = 0
    return _renormalise(collapsed)


def _measure_position(amplitudes: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    probabilities = np.sum(np.abs(amplitudes) ** 2, axis=2)
    cumulative = np.cumsum(probabilities, axis=1)
    targets = uniforms * cumulative[:, -1]
    # first site whose cumulative weight exceeds the target; empty sites are never chosen
    sites = np.minimum(np.sum(cumulative <= targets[:, None], axis=1), probabilities.shape[1] - 1)

    collapsed = np.zeros_like(amplitudes)
    rows = np.arange(len(sites))
    collapsed[rows, sites] = amplitudes[rows, sites]
    return _renormalise(collapsed)


def _renormalise(amplitudes: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.sum(np.abs(amplitudes) ** 2, axis=(1, 2)))
    return amplitudes / norms[:, None, None]

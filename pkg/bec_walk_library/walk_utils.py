"""Exact unitary simulation of the one-dimensional discrete (Hadamard) walk.

A walker lives on a bounded lattice of ``2 * half_width + 1`` sites centred on
``origin_index``. Amplitudes are stored site-major with the two coin labels
inside each site, so ``amplitudes[i, c]`` is the amplitude of coin ``c`` at
lattice position ``origin_index - half_width + i``. Coin 0 steps left, coin 1
steps right.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Sequence, Tuple, Union

import numpy as np

# Initiate logging
from .log_config import get_logger

log = get_logger(__name__)

UNITARY_TOLERANCE = 1e-12
NORM_TOLERANCE = 1e-12
DRIFT_TOLERANCE = 1e-9

COIN_STATES = {
    "zero": (1.0, 0.0),
    "one": (0.0, 1.0),
    "balanced": (1 / math.sqrt(2), 1 / math.sqrt(2)),
    "symmetric": (1 / math.sqrt(2), 1j / math.sqrt(2)),
    # what the rf pi/2 pulse prepares from |0>; its first rf-coin step goes right with certainty
    "rf-prepared": (1 / math.sqrt(2), -1j / math.sqrt(2)),
}


class LatticeOverflowError(ValueError):
    """Raised when amplitude would be shifted off the allocated lattice."""

    def __init__(self, position: int, half_width: int):
        self.position = position
        self.half_width = half_width
        super().__init__(
            f"Lattice site {position} lies outside the allocated lattice "
            f"(half_width={half_width}); allocate half_width >= steps + initial support"
        )


class NumericalDriftError(ArithmeticError):
    """Raised when a norm or trace drifts beyond tolerance."""


@dataclass(frozen=True, eq=False)
class CoinOperator:
    """A unitary 2x2 coin acting on the internal state of the walker.

    Attributes
    ----------
    entries : np.ndarray
        2x2 complex matrix, checked unitary at construction
    name : str
        label carried into logs and reports
    """

    entries: np.ndarray
    name: str = "custom"

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=complex)
        if entries.shape != (2, 2):
            raise ValueError(f"A coin must be a 2x2 matrix, got shape {entries.shape}")

        deviation = np.max(np.abs(entries.conj().T @ entries - np.eye(2)))
        if deviation > UNITARY_TOLERANCE:
            raise ValueError(
                f"Coin '{self.name}' is not unitary: max |C^dagger C - 1| = {deviation:.3e}"
            )

        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True, eq=False)
class WalkState:
    """Pure state of the walker over (position, coin) pairs.

    Attributes
    ----------
    origin_index : int
        lattice position x0 of the centre row
    half_width : int
        the lattice spans origin_index - half_width ... origin_index + half_width
    amplitudes : np.ndarray
        complex array of shape (2 * half_width + 1, 2), unit norm within DRIFT_TOLERANCE
    step_length_l : float
        step length in metres, metadata only
    """

    origin_index: int
    half_width: int
    amplitudes: np.ndarray
    step_length_l: float = 1.0

    def __post_init__(self) -> None:
        if self.half_width < 0:
            raise ValueError(f"half_width must be >= 0, got {self.half_width}")

        amplitudes = np.array(self.amplitudes, dtype=complex)
        expected = (2 * self.half_width + 1, 2)
        if amplitudes.shape != expected:
            raise ValueError(
                f"amplitudes must have shape {expected}, got {amplitudes.shape}"
            )
        if not np.any(amplitudes):
            raise ValueError("A walk state cannot have zero norm")
        norm = float(np.vdot(amplitudes, amplitudes).real)
        if abs(norm - 1) > DRIFT_TOLERANCE:
            raise ValueError(f"A walk state must be normalised, got sum |amp|^2 = {norm!r}")

        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def sites(self) -> int:
        return 2 * self.half_width + 1

    @property
    def positions(self) -> np.ndarray:
        return np.arange(
            self.origin_index - self.half_width, self.origin_index + self.half_width + 1
        )

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def with_amplitudes(self, amplitudes: np.ndarray) -> WalkState:
        return WalkState(
            self.origin_index, self.half_width, amplitudes, self.step_length_l
        )


@dataclass(frozen=True, eq=False)
class Distribution:
    """Position probabilities over a lattice, coin traced out.

    Attributes
    ----------
    origin_index : int
        lattice position of the centre entry
    half_width : int
        probabilities cover origin_index - half_width ... origin_index + half_width
    probabilities : np.ndarray
        non-negative reals summing to one
    """

    origin_index: int
    half_width: int
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        probabilities = np.array(self.probabilities, dtype=float)
        if probabilities.shape != (2 * self.half_width + 1,):
            raise ValueError(
                f"probabilities must have length {2 * self.half_width + 1}, "
                f"got shape {probabilities.shape}"
            )
        if np.any(probabilities < 0):
            raise ValueError("Probabilities must be non-negative")

        total = math.fsum(probabilities)
        if abs(total - 1) > NORM_TOLERANCE:
            raise ValueError(f"Probabilities sum to {total!r}, expected 1")

        object.__setattr__(self, "probabilities", probabilities)

    @property
    def positions(self) -> np.ndarray:
        return np.arange(
            self.origin_index - self.half_width, self.origin_index + self.half_width + 1
        )

    def probability_at(self, position: int) -> float:
        index = position - self.origin_index + self.half_width
        if 0 <= index < len(self.probabilities):
            return float(self.probabilities[index])
        return 0.0

    def as_dict(self) -> dict:
        """Non-zero probabilities keyed by lattice position."""
        return {
            int(x): float(p)
            for x, p in zip(self.positions, self.probabilities)
            if p > 0
        }


def hadamard_coin() -> CoinOperator:
    """The Hadamard coin (1/sqrt(2)) [[1, 1], [1, -1]]"""
    return CoinOperator(np.array([[1, 1], [1, -1]]) / math.sqrt(2), name="hadamard")


def identity_coin() -> CoinOperator:
    return CoinOperator(np.eye(2), name="identity")


def point_state(
    coin_state: Union[str, Sequence[complex]],
    half_width: int,
    origin_index: int = 0,
    step_length_l: float = 1.0,
) -> WalkState:
    """A walker localised on the origin site with the given coin state.

    Parameters
    ----------
    coin_state : str or sequence of two complex numbers
        a key of COIN_STATES, or explicit amplitudes (normalised here)
    half_width : int
        lattice half width, at least the number of steps to be run
    origin_index : int, default: 0
        lattice position of the walker
    step_length_l : float, default: 1.0
        step length in metres

    Returns
    -------
    WalkState
    """
    coin = _coin_vector(coin_state)
    amplitudes = np.zeros((2 * half_width + 1, 2), dtype=complex)
    amplitudes[half_width] = coin

    return WalkState(origin_index, half_width, amplitudes, step_length_l)


def gaussian_envelope_state(
    coin_state: Union[str, Sequence[complex]],
    half_width: int,
    width: float,
    origin_index: int = 0,
    step_length_l: float = 1.0,
    truncate: float = 4.0,
) -> WalkState:
    """A discrete Gaussian wave packet with a uniform coin state.

    The probability envelope has standard deviation ``width`` lattice sites and
    is cut to exactly zero beyond ``ceil(truncate * width)`` sites so the light
    cone stays bounded.

    Parameters
    ----------
    coin_state : str or sequence of two complex numbers
        coin state shared by every site
    half_width : int
        lattice half width; must cover steps plus the packet support
    width : float
        standard deviation of the position probability, in units of l
    origin_index : int, default: 0
        packet centre
    step_length_l : float, default: 1.0
        step length in metres
    truncate : float, default: 4.0
        support radius in units of ``width``

    Returns
    -------
    WalkState
    """
    if width <= 0:
        raise ValueError(f"Envelope width must be positive, got {width}")

    radius = int(math.ceil(truncate * width))
    if radius > half_width:
        raise LatticeOverflowError(origin_index + radius, half_width)

    offsets = np.arange(-half_width, half_width + 1)
    envelope = np.exp(-(offsets**2) / (4 * width**2))
    envelope[np.abs(offsets) > radius] = 0
    envelope /= math.sqrt(np.sum(envelope**2))

    amplitudes = np.outer(envelope, _coin_vector(coin_state))
    return WalkState(origin_index, half_width, amplitudes, step_length_l)


def support_radius(state: WalkState) -> int:
    """Largest distance from the origin of a site carrying non-zero amplitude."""
    occupied = np.flatnonzero(np.any(state.amplitudes != 0, axis=1))
    return int(np.max(np.abs(occupied - state.half_width)))


def apply_coin(state: WalkState, coin: CoinOperator) -> WalkState:
    """Multiply the coin 2-vector at every site by the coin matrix."""
    return state.with_amplitudes(state.amplitudes @ coin.entries.T)


def conditional_shift(state: WalkState) -> WalkState:
    """Move coin-0 amplitude one site left and coin-1 amplitude one site right.

    Raises
    ------
    LatticeOverflowError
        if amplitude would leave the lattice
    """
    _check_headroom(state)
    grid = state.amplitudes
    shifted = np.zeros_like(grid)
    shifted[:-1, 0] = grid[1:, 0]
    shifted[1:, 1] = grid[:-1, 1]

    return state.with_amplitudes(shifted)


def shift_with_flip(state: WalkState) -> WalkState:
    """The Raman-kick shift: each branch moves and exchanges its coin label.

    Coin-0 amplitude at x lands on x - 1 with label 1, coin-1 amplitude at x
    lands on x + 1 with label 0.
    """
    _check_headroom(state)
    grid = state.amplitudes
    shifted = np.zeros_like(grid)
    shifted[:-1, 1] = grid[1:, 0]
    shifted[1:, 0] = grid[:-1, 1]

    return state.with_amplitudes(shifted)


def bit_flip(state: WalkState) -> WalkState:
    """Swap coin labels 0 and 1 at every site."""
    return state.with_amplitudes(state.amplitudes[:, ::-1])


def step(state: WalkState, coin: CoinOperator) -> WalkState:
    """One step of the walk, W = U (C x 1)."""
    return conditional_shift(apply_coin(state, coin))


def physical_step(state: WalkState, coin: CoinOperator) -> WalkState:
    """One step in the order the apparatus applies it.

    rf coin pulse, stimulated Raman kick (shift with flip), then the
    compensatory rf pi pulse. Equal to ``step`` at amplitude level.
    """
    return bit_flip(shift_with_flip(apply_coin(state, coin)))


def evolve(
    state: WalkState, n: int, coin: CoinOperator, check_norm: bool = False
) -> WalkState:
    """Run n steps of the walk.

    Parameters
    ----------
    state : WalkState
        initial state; its lattice must cover n steps beyond the initial support
    n : int
        number of steps
    coin : CoinOperator
        coin applied every step
    check_norm : bool, default: False
        verify the norm after every step (slow; meant for tests and debugging)

    Returns
    -------
    WalkState
        the evolved state

    Raises
    ------
    LatticeOverflowError
        if the lattice is too small for n steps
    NumericalDriftError
        if the final norm drifted by more than DRIFT_TOLERANCE
    """
    grid = state.amplitudes
    for _, grid in _iter_evolution(state, n, coin, check_norm):
        pass

    _check_drift(state.norm, float(np.vdot(grid, grid).real), n)
    evolved = state.with_amplitudes(grid)
    log.debug(f"Evolved {n} steps with the {coin.name} coin")

    return evolved


def distribution(state: WalkState) -> Distribution:
    """Position probabilities with the coin traced out."""
    probabilities = np.sum(np.abs(state.amplitudes) ** 2, axis=1) / state.norm
    return Distribution(state.origin_index, state.half_width, probabilities)


def moments(d: Distribution) -> Tuple[float, float]:
    """Mean and variance of a distribution, in lattice units.

    Returns
    -------
    mean, variance
    """
    positions = d.positions.astype(float)
    mean = float(np.dot(positions, d.probabilities))
    variance = float(np.dot((positions - mean) ** 2, d.probabilities))

    return mean, variance


def classical_walk(n: int, origin_index: int = 0) -> Distribution:
    """Exact distribution of the unbiased classical walk after n steps."""
    if n < 0:
        raise ValueError(f"Step count must be >= 0, got {n}")

    probabilities = np.zeros(2 * n + 1)
    for k in range(n + 1):
        # k right-steps end on site -n + 2k
        probabilities[2 * k] = float(Fraction(math.comb(n, k), 2**n))

    return Distribution(origin_index, n, probabilities)


def variance_scan(
    initial: WalkState, coin: CoinOperator, n_list: Sequence[int]
) -> List[Tuple[int, float]]:
    """Variance at each requested step count from a single evolution pass.

    Parameters
    ----------
    initial : WalkState
        starting state, lattice sized for max(n_list)
    coin : CoinOperator
        coin applied every step
    n_list : sequence of int
        step counts to record

    Returns
    -------
    list of (n, variance)
        in ascending order of n
    """
    wanted = sorted(set(int(n) for n in n_list))
    if not wanted:
        return []
    if wanted[0] < 0:
        raise ValueError(f"Step counts must be >= 0, got {wanted[0]}")

    series = []
    for k, grid in _iter_evolution(initial, wanted[-1], coin):
        if k in wanted:
            _, variance = moments(distribution(initial.with_amplitudes(grid)))
            series.append((k, variance))

    log.info(
        f"Variance scan over {len(series)} step counts up to n={wanted[-1]} ({coin.name} coin)"
    )
    return series


def total_variation(p: Distribution, q: Distribution) -> float:
    """Half the L1 distance between two distributions on (possibly different) grids."""
    low = min(p.positions[0], q.positions[0])
    high = max(p.positions[-1], q.positions[-1])

    def embed(d: Distribution) -> np.ndarray:
        full = np.zeros(high - low + 1)
        start = d.positions[0] - low
        full[start : start + len(d.probabilities)] = d.probabilities
        return full

    return 0.5 * float(np.sum(np.abs(embed(p) - embed(q))))


def fit_exponent(ns: Sequence[float], values: Sequence[float]) -> float:
    """Slope of log(values) against log(ns), the scaling exponent of a power law."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)

    if len(np.unique(ns)) < 2:
        raise ValueError("Need at least two distinct step counts to fit an exponent")
    if np.any(ns <= 0) or np.any(values <= 0):
        raise ValueError("Exponent fit needs positive step counts and values")

    slope, _ = np.polyfit(np.log(ns), np.log(values), 1)
    return float(slope)


def peak_positions(d: Distribution) -> List[int]:
    """Positions of the largest probability left and right of the origin.

    A distribution with no mass on one side yields a single peak.
    """
    positions = d.positions
    peaks = []
    for side in (positions < d.origin_index, positions > d.origin_index):
        if np.any(d.probabilities[side] > 0):
            peaks.append(int(positions[side][np.argmax(d.probabilities[side])]))

    if not peaks:
        peaks.append(d.origin_index)
    return peaks


def _coin_vector(coin_state: Union[str, Sequence[complex]]) -> np.ndarray:
    if isinstance(coin_state, str):
        try:
            coin_state = COIN_STATES[coin_state]
        except KeyError:
            raise ValueError(
                f"Unknown coin state '{coin_state}'. Valid options: {list(COIN_STATES)}"
            )

    vector = np.array(coin_state, dtype=complex)
    norm = np.linalg.norm(vector)
    if vector.shape != (2,) or norm == 0:
        raise ValueError(f"A coin state needs two amplitudes, not all zero: {coin_state}")

    return vector / norm


def _check_headroom(state: WalkState) -> None:
    grid = state.amplitudes
    if grid[0, 0] != 0:
        raise LatticeOverflowError(int(state.positions[0]) - 1, state.half_width)
    if grid[-1, 1] != 0:
        raise LatticeOverflowError(int(state.positions[-1]) + 1, state.half_width)


def _check_drift(before: float, after: float, n: int) -> None:
    if abs(after - before) > DRIFT_TOLERANCE:
        raise NumericalDriftError(
            f"Norm drifted from {before!r} to {after!r} over {n} steps"
        )


def _iter_evolution(
    state: WalkState, n: int, coin: CoinOperator, check_norm: bool = False
) -> Iterator[Tuple[int, np.ndarray]]:
    """Yield (k, amplitudes) for k = 0 ... n.

    Only the light cone of the initial support is touched each step. The
    yielded array is reused between steps; copy it to keep it.
    """
    if n < 0:
        raise ValueError(f"Step count must be >= 0, got {n}")

    radius = support_radius(state)
    if radius + n > state.half_width:
        raise LatticeOverflowError(
            state.origin_index + radius + n, state.half_width
        )

    grid = state.amplitudes.copy()
    entries_t = coin.entries.T
    norm = state.norm
    lo, hi = state.half_width - radius, state.half_width + radius

    yield 0, grid
    for k in range(1, n + 1):
        mixed = grid[lo : hi + 1] @ entries_t
        grid[lo - 1 : hi + 2] = 0
        grid[lo - 1 : hi, 0] = mixed[:, 0]
        grid[lo + 1 : hi + 2, 1] = mixed[:, 1]
        lo, hi = lo - 1, hi + 1

        if check_norm:
            current = float(np.vdot(grid, grid).real)
            if abs(current - norm) > NORM_TOLERANCE:
                raise NumericalDriftError(
                    f"Norm drifted from {norm!r} to {current!r} at step {k}"
                )
        yield k, grid

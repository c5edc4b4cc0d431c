"""Trap geometry, timing budget, feasibility and the measurement pipeline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from .rng_utils import block_uniforms, trial_blocks
from .walk_utils import Distribution

# Initiate logging
from .log_config import get_logger

log = get_logger(__name__)

# Z / l is floored after this relative slack so 5 mm / 10 um gives 500, not 499
STEP_BUDGET_SLACK = 1e-9


class TimeMode(str, Enum):
    PER_STEP_SUM = "per-step-sum"
    PAPER_LITERAL = "paper-literal"


def rayleigh_range(wavelength: float, w0: float) -> float:
    """Rayleigh range pi w0^2 / lambda of a focused Gaussian beam, m.

    Parameters
    ----------
    wavelength : float
        trapping wavelength, m
    w0 : float
        beam waist, m

    Returns
    -------
    float
    """
    if wavelength <= 0 or w0 <= 0:
        raise ValueError(f"Wavelength and waist must be positive, got {wavelength}, {w0}")
    return math.pi * w0**2 / wavelength


@dataclass(frozen=True)
class TrapConfig:
    """Long Rayleigh-range dipole trap.

    Attributes
    ----------
    wavelength : float
        m
    beam_waist_w0 : float
        m
    usable_half_range_Z : float
        walk range either side of the focus, m; at most the Rayleigh range
    step_length_l : float
        m; also the microtrap spacing
    """

    wavelength: float
    beam_waist_w0: float
    usable_half_range_Z: float
    step_length_l: float

    def __post_init__(self) -> None:
        for name in ("wavelength", "beam_waist_w0", "usable_half_range_Z", "step_length_l"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

        z_r = self.rayleigh_range
        if self.usable_half_range_Z > z_r:
            raise ValueError(
                f"usable_half_range_Z={self.usable_half_range_Z} m exceeds the Rayleigh range {z_r} m"
            )

    @property
    def rayleigh_range(self) -> float:
        return rayleigh_range(self.wavelength, self.beam_waist_w0)


@dataclass(frozen=True)
class TimingBudget:
    """Durations of the pulses making up one walk step, s.

    Attributes
    ----------
    kick_time_t : float
        stimulated Raman kick (the 2N-photon transition time)
    hadamard_pulse_tau : float
        coin rf pulse
    bitflip_pulse_tau_bf : float
        compensatory rf pi pulse
    translation_time : float
        free flight over one step length
    """

    kick_time_t: float
    hadamard_pulse_tau: float
    bitflip_pulse_tau_bf: float
    translation_time: float

    def __post_init__(self) -> None:
        for name in (
            "kick_time_t",
            "hadamard_pulse_tau",
            "bitflip_pulse_tau_bf",
            "translation_time",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    """Final microtrap bins of repeated experiments.

    Attributes
    ----------
    trials : int
        number of repetitions
    outcomes : np.ndarray
        lattice bin index per repetition, 0 ... 2 * half_width
    seed : int or None
        seed of the sampling streams; None for pooled records
    origin_index : int
        lattice position of the centre bin
    half_width : int
        lattice half width
    """

    trials: int
    outcomes: np.ndarray
    seed: Optional[int]
    origin_index: int = 0
    half_width: int = 0

    def __post_init__(self) -> None:
        outcomes = np.asarray(self.outcomes, dtype=np.int64)
        if self.trials < 1 or len(outcomes) != self.trials:
            raise ValueError(
                f"Record needs trials >= 1 matching the outcomes, got {self.trials} and {len(outcomes)}"
            )
        if np.any(outcomes < 0) or np.any(outcomes > 2 * self.half_width):
            raise ValueError("Outcome outside the allocated lattice")
        object.__setattr__(self, "outcomes", outcomes)

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.outcomes, minlength=2 * self.half_width + 1)


@dataclass(frozen=True)
class Constraint:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of ``plan_experiment``.

    Attributes
    ----------
    steps : int
        requested number of walk steps
    max_steps : int
        step budget of the trap
    total_time : float
        per-step-sum duration of the walk, s
    walk_span : float
        n * l, m
    constraints : list of Constraint
        every check with its verdict
    """

    steps: int
    max_steps: int
    total_time: float
    walk_span: float
    constraints: List[Constraint] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(constraint.passed for constraint in self.constraints)

    @property
    def failed_constraints(self) -> List[str]:
        return [constraint.name for constraint in self.constraints if not constraint.passed]


def max_steps(trap: TrapConfig) -> int:
    """Steps whose light cone n * l fits within the usable range Z."""
    return int(math.floor(trap.usable_half_range_Z / trap.step_length_l * (1 + STEP_BUDGET_SLACK)))


def total_time(
    budget: TimingBudget,
    n: int,
    mode: TimeMode = TimeMode.PER_STEP_SUM,
    overlap_bitflip: bool = False,
) -> float:
    """Duration of an n-step walk, s.

    Parameters
    ----------
    budget : TimingBudget
        durations of one step's operations
    n : int
        number of steps
    mode : TimeMode, default: per-step-sum
        per-step-sum is n (t + tau + t_move + tau_bf). paper-literal evaluates
        n t + (n tau - 1) + n + n t_move + (n tau_bf - 1) term by term; its
        terms do not share units, see ``time_mode_note``
    overlap_bitflip : bool, default: False
        per-step-sum only: the bit flip runs during translation, so a step
        costs t + tau + max(t_move, tau_bf)

    Returns
    -------
    float
    """
    mode = TimeMode(mode)
    if n < 0:
        raise ValueError(f"Step count must be >= 0, got {n}")

    t = budget.kick_time_t
    tau = budget.hadamard_pulse_tau
    tau_bf = budget.bitflip_pulse_tau_bf
    t_move = budget.translation_time

    if mode is TimeMode.PAPER_LITERAL:
        return n * t + (n * tau - 1) + n + n * t_move + (n * tau_bf - 1)

    if overlap_bitflip:
        return n * (t + tau + max(t_move, tau_bf))
    return n * (t + tau + t_move + tau_bf)


def time_mode_note(mode: TimeMode) -> dict:
    """Metadata describing whether a timing mode is dimensionally consistent."""
    mode = TimeMode(mode)
    if mode is TimeMode.PAPER_LITERAL:
        return {
            "mode": mode.value,
            "units_consistent": False,
            "note": "verbatim transcription: the bare n and the -1 terms carry no time unit",
        }
    return {"mode": mode.value, "units_consistent": True, "note": "n * (t + tau + t_move + tau_bf)"}


def sample_measurement(d: Distribution, trials: int, seed: int) -> MeasurementRecord:
    """Draw ``trials`` microtrap outcomes from an exact distribution.

    Each trial inverts the cumulative distribution at one uniform from the
    counter-based streams, so bins with zero probability are never drawn and
    outcome t depends only on (seed, t).

    Parameters
    ----------
    d : Distribution
        exact position distribution
    trials : int
        number of repetitions
    seed : int
        unsigned 64-bit seed

    Returns
    -------
    MeasurementRecord
    """
    cumulative = np.cumsum(d.probabilities)
    last_occupied = int(np.flatnonzero(d.probabilities)[-1])
    outcomes = np.empty(trials, dtype=np.int64)

    for block_index, first, count in trial_blocks(trials):
        targets = block_uniforms(seed, block_index, ())[:count] * cumulative[-1]
        # first bin whose cumulative weight exceeds the target
        bins = np.searchsorted(cumulative, targets, side="right")
        outcomes[first : first + count] = np.minimum(bins, last_occupied)

    log.info(f"Sampled {trials} microtrap outcomes (seed={seed})")
    return MeasurementRecord(trials, outcomes, seed, d.origin_index, d.half_width)


def estimate_distribution(record: MeasurementRecord) -> Distribution:
    """Empirical distribution of a measurement record, counts / trials."""
    return Distribution(record.origin_index, record.half_width, record.counts / record.trials)


def concatenate_records(*records: MeasurementRecord) -> MeasurementRecord:
    """Pool repetitions taken on the same lattice."""
    if not records:
        raise ValueError("Need at least one record to concatenate")

    first = records[0]
    for record in records[1:]:
        if (record.origin_index, record.half_width) != (first.origin_index, first.half_width):
            raise ValueError("Records must share a lattice to be pooled")

    seeds = {record.seed for record in records}
    return MeasurementRecord(
        trials=sum(record.trials for record in records),
        outcomes=np.concatenate([record.outcomes for record in records]),
        seed=seeds.pop() if len(seeds) == 1 else None,
        origin_index=first.origin_index,
        half_width=first.half_width,
    )


def plan_experiment(
    trap: TrapConfig,
    budget: TimingBudget,
    n: int,
    packet_width: Optional[float] = None,
    overlap_bitflip: bool = False,
) -> FeasibilityReport:
    """Check an n-step walk against the trap and timing constraints.

    Parameters
    ----------
    trap : TrapConfig
        trap geometry
    budget : TimingBudget
        step timing
    n : int
        requested steps
    packet_width : float, optional
        spatial width of the condensate wave packet, m; when given, it must
        exceed the step length
    overlap_bitflip : bool, default: False
        passed to ``total_time``

    Returns
    -------
    FeasibilityReport
    """
    budget_steps = max_steps(trap)
    span = n * trap.step_length_l

    constraints = [
        Constraint(
            "step_budget",
            n <= budget_steps,
            f"n={n} against floor(Z / l)={budget_steps}",
        ),
        Constraint(
            "walk_span",
            span <= trap.usable_half_range_Z * (1 + STEP_BUDGET_SLACK),
            f"n * l={span:.6g} m against Z={trap.usable_half_range_Z:.6g} m",
        ),
        Constraint(
            "rayleigh_range",
            trap.usable_half_range_Z <= trap.rayleigh_range,
            f"Z={trap.usable_half_range_Z:.6g} m against Z_R={trap.rayleigh_range:.6g} m",
        ),
    ]
    if packet_width is not None:
        constraints.append(
            Constraint(
                "packet_width",
                packet_width > trap.step_length_l,
                f"wave packet width {packet_width:.6g} m against l={trap.step_length_l:.6g} m",
            )
        )

    report = FeasibilityReport(
        steps=n,
        max_steps=budget_steps,
        total_time=total_time(budget, n, overlap_bitflip=overlap_bitflip),
        walk_span=span,
        constraints=constraints,
    )
    if not report.passed:
        log.warning(f"Experiment plan fails: {', '.join(report.failed_constraints)}")

    return report

"""Command-line surface: walk runs, variance scans, pulse calibration, planning
and the end-to-end virtual experiment.

Usage::

    bec-walk walk --steps 100 --set initial_coin=symmetric
    bec-walk variance-scan --config scan.cfg --out results/
    bec-walk pulse rf --set "rabi_frequency=1 kHz"
    bec-walk pulse raman --config raman.cfg
    bec-walk plan --config trap.cfg
    bec-walk experiment --config experiment.cfg --seed 7 --out results/
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from pandas import DataFrame as DF

from .apparatus_utils import (
    TimeMode,
    TimingBudget,
    TrapConfig,
    estimate_distribution,
    plan_experiment,
    sample_measurement,
    time_mode_note,
    total_time,
)
from .config_utils import ConfigParseError, RunConfig, atom_mass, build_coin, load_run_config
from .file_utils import SCHEMA_VERSION, csv_text, json_text, results_to_csv, results_to_json
from .open_walk_utils import NoiseModel, onset_schedule, run_open
from .pulse_utils import (
    KickCalibration,
    KickDirection,
    PulseKind,
    RamanConfig,
    RfPulse,
    calibrate_kick,
    design_pulse,
    effective_rabi_frequency,
    momentum_kick,
    rf_evolve,
    rf_populations,
    translation_time,
    TwoLevelAmps,
)
from .walk_utils import (
    Distribution,
    LatticeOverflowError,
    NumericalDriftError,
    WalkState,
    classical_walk,
    distribution,
    evolve,
    fit_exponent,
    gaussian_envelope_state,
    moments,
    peak_positions,
    point_state,
    total_variation,
    variance_scan,
)

# Initiate logging
from .log_config import get_logger

log = get_logger(__name__)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_OVERFLOW = 3
EXIT_INFEASIBLE = 4
EXIT_NUMERIC = 5

ENVELOPE_TRUNCATE = 4.0
INFIDELITY_MAPPING = (
    "kick infidelity (1 - fidelity) is added to coin_dephasing_prob (capped at 1); "
    "coin pulse area error (omega_R * tau - pi/2) is added to coin_angle_error"
)


@dataclass
class CommandResult:
    """Output of one command, ready to be written.

    Attributes
    ----------
    command : str
        command name, used for file names and the JSON ``command`` field
    summary : dict
        scalar results and reports
    tables : dict of str to DataFrame
        per-site or per-sample arrays, written as CSV
    exit_code : int
        process exit code
    """

    command: str
    summary: dict
    tables: Dict[str, DF] = field(default_factory=dict)
    exit_code: int = EXIT_OK

    def document(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "command": self.command, **self.summary}


def cmd_walk(config: RunConfig) -> CommandResult:
    """Pure-state walk: per-site distribution plus moments and peaks."""
    n = config.get("steps")
    coin = build_coin(config)
    initial = initial_state(config, n)

    final = evolve(initial, n, coin)
    d = distribution(final)
    mean, variance = moments(d)

    summary = {
        "n": n,
        "coin": coin.name,
        "initial_coin": config.get("initial_coin"),
        "step_length_m": config.get("step_length"),
        "mean": mean,
        "variance": variance,
        "peak_positions": peak_positions(d),
        "norm": final.norm,
    }
    return CommandResult("walk", summary, {"distribution": distribution_frame(d, config)})


def cmd_variance_scan(config: RunConfig) -> CommandResult:
    """Quantum and classical variance series with their fitted power-law exponents."""
    start, stop, stride = config.get("scan_start"), config.get("scan_stop"), config.get("scan_step")
    ns = list(range(start, stop + 1, stride))
    fit_ns = [n for n in ns if n > 0]
    if len(fit_ns) < 2:
        raise ConfigParseError(
            f"scan range {start}..{stop} step {stride} has fewer than two positive step counts; cannot fit",
            key="scan_stop",
        )

    coin = build_coin(config)
    quantum = dict(variance_scan(initial_state(config, ns[-1]), coin, ns))
    classical = {n: moments(classical_walk(n))[1] for n in ns}

    table = DF(
        {
            "n": ns,
            "variance_quantum": [quantum[n] for n in ns],
            "variance_classical": [classical[n] for n in ns],
        }
    )
    summary = {
        "coin": coin.name,
        "initial_coin": config.get("initial_coin"),
        "n_range": [ns[0], ns[-1]],
        "exponent_quantum": fit_exponent(fit_ns, [quantum[n] for n in fit_ns]),
        "exponent_classical": fit_exponent(fit_ns, [classical[n] for n in fit_ns]),
    }
    return CommandResult("variance-scan", summary, {"series": table})


def cmd_pulse(config: RunConfig, kind: str) -> CommandResult:
    """Pulse report for ``kind`` 'rf' or 'raman'."""
    if kind not in ("rf", "raman"):
        raise ConfigParseError(f"unknown pulse kind '{kind}'; use rf or raman")
    return cmd_pulse_rf(config) if kind == "rf" else cmd_pulse_raman(config)


def cmd_pulse_rf(config: RunConfig) -> CommandResult:
    """Sampled rf Rabi populations, closed form against the numeric integrator."""
    omega = config.require("rabi_frequency")
    kind = PulseKind(config.get("pulse_kind"))
    duration = config.get("duration")
    if duration is None:
        duration = design_pulse(kind, omega).duration
    pulse = RfPulse(omega, config.get("detuning"), duration)

    closed = rf_populations(pulse, config.get("samples"))
    numeric = rf_populations(pulse, config.get("samples"), method="numeric")
    table = DF(
        {
            "tau_s": closed[:, 0],
            "population_0": closed[:, 1],
            "population_1": closed[:, 2],
            "population_1_numeric": numeric[:, 2],
        }
    )

    final = rf_evolve(TwoLevelAmps.ground(), pulse)
    summary = {
        "pulse": asdict(pulse),
        "pulse_area_rad": pulse.area,
        "transfer": final.populations[1],
        "max_integrator_deviation": float(np.max(np.abs(closed[:, 1:] - numeric[:, 1:]))),
        "hadamard_rotation_tau_s": design_pulse(PulseKind.HADAMARD_ROTATION, omega).duration,
        "pi_flip_tau_s": design_pulse(PulseKind.PI_FLIP, omega).duration,
    }
    return CommandResult("pulse-rf", summary, {"populations": table})


def cmd_pulse_raman(config: RunConfig) -> CommandResult:
    """Raman kick calibration report; exits 4 when the optimum sits on the scan edge."""
    raman = raman_config(config)
    calibration = calibrate_kick(raman, kick_window(config, raman))

    summary = {"raman": asdict(raman), "calibration": asdict(calibration)}
    summary.update(kick_kinematics(raman))

    exit_code = EXIT_INFEASIBLE if calibration.at_boundary else EXIT_OK
    return CommandResult("pulse-raman", summary, exit_code=exit_code)


def cmd_plan(config: RunConfig) -> CommandResult:
    """Feasibility of an n-step walk in the configured trap."""
    calibration = None
    if config.has("raman_v1") and not config.has("kick_time"):
        raman = raman_config(config)
        calibration = calibrate_kick(raman, kick_window(config, raman))

    n = config.get("steps")
    summary = plan_summary(config, n, calibration)
    exit_code = EXIT_OK if summary["feasibility"]["passed"] else EXIT_INFEASIBLE

    return CommandResult("plan", summary, exit_code=exit_code)


def cmd_experiment(config: RunConfig) -> CommandResult:
    """End-to-end virtual experiment.

    Calibrate the kick, fold pulse imperfections into a noise model, gate on
    the feasibility plan, run the density-matrix walk, sample the microtrap
    readout and compare the empirical distribution with the exact one.
    """
    n = config.get("steps")
    trials, seed = config.get("trials"), config.get("seed")

    calibration = None
    fidelity = 1.0
    if config.has("raman_v1"):
        raman = raman_config(config)
        calibration = calibrate_kick(raman, kick_window(config, raman))
        fidelity = calibration.fidelity

    plan = plan_summary(config, n, calibration)
    if not plan["feasibility"]["passed"]:
        log.error(f"Experiment not run: plan fails {plan['feasibility']['failed_constraints']}")
        return CommandResult("experiment", {"n": n, **plan, "sampled": False}, exit_code=EXIT_INFEASIBLE)

    noise, noise_report = experiment_noise(config, fidelity)
    coin = build_coin(config)
    result = run_open(initial_state(config, n), n, coin, noise)
    record = sample_measurement(result.distribution, trials, seed)
    empirical = estimate_distribution(record)

    empirical_table = distribution_frame(empirical, config)
    empirical_table.insert(2, "counts", record.counts)

    summary = {
        "n": n,
        "coin": coin.name,
        "initial_coin": config.get("initial_coin"),
        "trials": trials,
        "seed": seed,
        "sampled": True,
        "tv_distance": total_variation(result.distribution, empirical),
        "trial_multiplier": result.trial_multiplier,
        "expected_detected_trials": trials * result.trial_multiplier,
        "final_trace": result.trace,
        "noise": noise_report,
        "kick_calibration": asdict(calibration) if calibration else None,
        **plan,
    }
    tables = {
        "exact": distribution_frame(result.distribution, config),
        "empirical": empirical_table,
    }
    return CommandResult("experiment", summary, tables)


def initial_state(config: RunConfig, n: int) -> WalkState:
    """Point or Gaussian-envelope start, on a lattice wide enough for n steps unless half_width is set."""
    coin_state = config.get("initial_coin")
    step_length = config.get("step_length")
    origin = config.get("origin_index")

    if config.has("envelope_width"):
        width = config.get("envelope_width") / step_length
        half_width = config.get("half_width")
        if half_width is None:
            half_width = n + int(math.ceil(ENVELOPE_TRUNCATE * width))
        return gaussian_envelope_state(
            coin_state, half_width, width, origin, step_length, truncate=ENVELOPE_TRUNCATE
        )

    half_width = config.get("half_width")
    return point_state(coin_state, n if half_width is None else half_width, origin, step_length)


def distribution_frame(d: Distribution, config: RunConfig) -> DF:
    return DF(
        {
            "position_index": d.positions,
            "physical_position_m": d.positions * config.get("step_length"),
            "probability": d.probabilities,
        }
    )


def raman_config(config: RunConfig) -> RamanConfig:
    delta1 = config.require("raman_delta1")
    delta2 = config.get("raman_delta2")
    try:
        return RamanConfig(
            v1=config.require("raman_v1"),
            v2=config.require("raman_v2"),
            delta1=delta1,
            delta2=delta1 if delta2 is None else delta2,
            phi1=config.get("raman_phi1"),
            phi2=config.get("raman_phi2"),
            k1=config.get("raman_k1") or 0.0,
            k2=config.get("raman_k2") or 0.0,
            atom_mass=atom_mass(config),
            step_length_l=config.get("step_length"),
        )
    except ValueError as err:
        raise ConfigParseError(str(err))


def kick_window(config: RunConfig, raman: RamanConfig) -> float:
    """``kick_t_max`` if set, else one effective two-photon Rabi period."""
    if config.has("kick_t_max"):
        return config.get("kick_t_max")

    if raman.delta1 == 0:
        raise ConfigParseError("needed when raman_delta1 is zero", key="kick_t_max")
    frequency = effective_rabi_frequency(raman)
    if frequency == 0:
        # one coupling is off; take the period the stronger coupling alone would give
        frequency = max(raman.v1, raman.v2) ** 2 / (2 * abs(raman.delta1))
    if frequency == 0:
        raise ConfigParseError("needed when both Raman couplings are zero", key="kick_t_max")

    return 2 * math.pi / frequency


def kick_kinematics(raman: RamanConfig) -> dict:
    if raman.k1 == raman.k2:
        return {"momentum_kg_m_per_s": None, "translation_time_s": None}

    momentum = momentum_kick(raman, KickDirection.LEFT)
    return {
        "momentum_kg_m_per_s": momentum,
        "translation_time_s": translation_time(momentum, raman),
    }


def timing_budget(config: RunConfig, calibration: Optional[KickCalibration]) -> TimingBudget:
    """Explicit durations where configured, otherwise derived from pulse design and kick physics."""
    kick_time = config.get("kick_time")
    if kick_time is None:
        if calibration is None:
            raise ConfigParseError("set kick_time or the Raman couplings", key="kick_time")
        kick_time = calibration.t_kick * config.get("atom_number")

    pulse_times = {}
    for key, kind in (
        ("hadamard_pulse_time", PulseKind.HADAMARD_ROTATION),
        ("bitflip_pulse_time", PulseKind.PI_FLIP),
    ):
        pulse_times[key] = config.get(key)
        if pulse_times[key] is None:
            if not config.has("rabi_frequency"):
                raise ConfigParseError("set it or rabi_frequency", key=key)
            pulse_times[key] = design_pulse(kind, config.get("rabi_frequency")).duration

    move_time = config.get("translation_time")
    if move_time is None:
        move_time = kick_kinematics(raman_config(config))["translation_time_s"] if config.has("raman_v1") else None
        if move_time is None:
            raise ConfigParseError("set it or the Raman wave numbers", key="translation_time")

    return TimingBudget(
        kick_time_t=kick_time,
        hadamard_pulse_tau=pulse_times["hadamard_pulse_time"],
        bitflip_pulse_tau_bf=pulse_times["bitflip_pulse_time"],
        translation_time=move_time,
    )


def plan_summary(config: RunConfig, n: int, calibration: Optional[KickCalibration]) -> dict:
    try:
        trap = TrapConfig(
            wavelength=config.require("trap_wavelength"),
            beam_waist_w0=config.require("beam_waist"),
            usable_half_range_Z=config.require("usable_half_range"),
            step_length_l=config.get("step_length"),
        )
    except ConfigParseError:
        raise
    except ValueError as err:
        raise ConfigParseError(str(err))

    budget = timing_budget(config, calibration)
    overlap = config.get("overlap_bitflip")
    report = plan_experiment(trap, budget, n, config.get("packet_width"), overlap_bitflip=overlap)

    mode = TimeMode(config.get("time_mode"))
    timing = {
        "budget_s": asdict(budget),
        "overlap_bitflip": overlap,
        "total_time_s": total_time(budget, n, mode, overlap_bitflip=overlap),
        **time_mode_note(mode),
    }
    feasibility = {
        "passed": report.passed,
        "failed_constraints": report.failed_constraints,
        "steps": report.steps,
        "max_steps": report.max_steps,
        "walk_span_m": report.walk_span,
        "rayleigh_range_m": trap.rayleigh_range,
        "total_time_s": report.total_time,
        "constraints": [asdict(constraint) for constraint in report.constraints],
    }
    return {"timing": timing, "feasibility": feasibility}


def experiment_noise(config: RunConfig, fidelity: float):
    """Noise model (or onset schedule) for the experiment, with a report of the mapping."""
    area_error = 0.0
    if config.has("hadamard_pulse_time") and config.has("rabi_frequency"):
        area_error = config.get("rabi_frequency") * config.get("hadamard_pulse_time") - math.pi / 2

    pulse_dephasing = min(1.0, 1.0 - fidelity)
    angle_error = config.get("coin_angle_error") + area_error
    survival = config.get("survival_fraction")
    if survival <= 0:
        raise ConfigParseError("must be greater than 0", key="survival_fraction")

    full = NoiseModel(
        coin_dephasing_prob=min(1.0, config.get("coin_dephasing_prob") + pulse_dephasing),
        position_measure_prob=config.get("position_measure_prob"),
        coin_angle_error=angle_error,
        survival_fraction_per_step=survival,
    )
    report = {"mapping": INFIDELITY_MAPPING, "model": asdict(full), "onset_step": None}

    onset = config.get("decoherence_onset_step")
    if onset is None:
        return full, report

    before = NoiseModel(
        coin_dephasing_prob=pulse_dephasing,
        coin_angle_error=angle_error,
        survival_fraction_per_step=survival,
    )
    report.update({"onset_step": onset, "model_before_onset": asdict(before)})
    return onset_schedule(before, full, onset), report


COMMANDS: Dict[str, Callable[[RunConfig], CommandResult]] = {
    "walk": cmd_walk,
    "variance-scan": cmd_variance_scan,
    "plan": cmd_plan,
    "experiment": cmd_experiment,
}


def emit(result: CommandResult, out: Optional[str], output_format: str) -> None:
    """Write a command's tables and summary to a folder, or to stdout."""
    write_tables = output_format in ("csv", "both")
    write_summary = output_format in ("json", "both")
    prefix = result.command.replace("-", "_")

    if out:
        if write_tables:
            for name, table in result.tables.items():
                results_to_csv(table, f"{prefix}_{name}.csv", out)
        if write_summary:
            results_to_json(result.document(), f"{prefix}_summary.json", out)
        return

    if write_tables:
        for table in result.tables.values():
            sys.stdout.write(csv_text(table) + "\n")
    if write_summary:
        sys.stdout.write(json_text(result.document()))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a 'key = value' configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one setting")
    common.add_argument("--seed", type=int, help="unsigned 64-bit sampling seed")
    common.add_argument("--steps", type=int, help="number of walk steps")
    common.add_argument("--coin", help="hadamard, rf-pi-2, identity or custom")
    common.add_argument("--trials", type=int, help="number of sampled repetitions")
    common.add_argument("--out", help="folder for CSV/JSON results (default: stdout)")
    common.add_argument("--format", choices=("csv", "json", "both"), default="both")

    parser = argparse.ArgumentParser(
        prog="bec-walk", description="Discrete Hadamard walk of a condensate, from lattice to pulses."
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("walk", parents=[common], help="pure-state walk distribution")
    commands.add_parser("variance-scan", parents=[common], help="variance scaling, quantum vs classical")
    commands.add_parser("plan", parents=[common], help="trap and timing feasibility")
    commands.add_parser("experiment", parents=[common], help="end-to-end virtual experiment")

    pulse = commands.add_parser("pulse", help="pulse simulation")
    pulse_kinds = pulse.add_subparsers(dest="pulse_kind", required=True)
    pulse_kinds.add_parser("rf", parents=[common], help="rf Rabi populations")
    pulse_kinds.add_parser("raman", parents=[common], help="Raman kick calibration")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code.

    Parameters
    ----------
    argv : sequence of str, optional
        arguments without the program name; defaults to sys.argv[1:]

    Returns
    -------
    int
        0 ok, 2 configuration error, 3 lattice overflow, 4 infeasible plan or
        calibration on the scan edge, 5 numerical drift
    """
    args = build_parser().parse_args(argv)

    try:
        config = load_run_config(
            args.config,
            args.set,
            {"seed": args.seed, "steps": args.steps, "coin": args.coin, "trials": args.trials},
        )
        if args.command == "pulse":
            result = cmd_pulse(config, args.pulse_kind)
        else:
            result = COMMANDS[args.command](config)
    except ConfigParseError as err:
        log.error(f"Configuration error: {err}")
        return EXIT_PARSE
    except LatticeOverflowError as err:
        log.error(f"Lattice overflow: {err}")
        return EXIT_OVERFLOW
    except ValueError as err:
        log.error(f"Invalid input: {err}")
        return EXIT_PARSE
    except (NumericalDriftError, ArithmeticError) as err:
        log.error(f"Numerical failure: {err}")
        return EXIT_NUMERIC

    emit(result, args.out, args.format)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())

"""Run configuration: a flat ``key = value`` grammar with mandatory units.

Every physical quantity carries a unit suffix (``step_length = 10 um``,
``rabi_frequency = 1 kHz``) and is stored in SI units; angular frequencies are
stored in rad/s, so Hz-family units are multiplied by 2 pi.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Optional, Tuple

import numpy as np
from scipy.constants import atomic_mass

from .file_utils import check_if_file_exists
from .pulse_utils import PulseKind, design_pulse, rf_coin_matrix
from .walk_utils import COIN_STATES, CoinOperator, hadamard_coin, identity_coin

# Initiate logging
from .log_config import get_logger

log = get_logger(__name__)

UNITS = {
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9},
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9},
    "angle": {"rad": 1.0, "mrad": 1e-3, "deg": math.pi / 180},
    "angular_frequency": {
        "rad/s": 1.0,
        "Hz": 2 * math.pi,
        "kHz": 2 * math.pi * 1e3,
        "MHz": 2 * math.pi * 1e6,
    },
    "wave_number": {"1/m": 1.0, "rad/m": 1.0, "1/um": 1e6},
    "mass": {"kg": 1.0, "amu": atomic_mass},
}

_QUANTITY = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)?$")
_TRUE_WORDS = ("y", "yes", "true", "1", "on")
_FALSE_WORDS = ("n", "no", "false", "0", "off")


class ConfigParseError(ValueError):
    """Raised for malformed, unknown, missing or out-of-range configuration values."""

    def __init__(self, message: str, key: Optional[str] = None, line_number: Optional[int] = None):
        self.key = key
        self.line_number = line_number
        location = f" (line {line_number})" if line_number is not None else ""
        prefix = f"'{key}'{location}: " if key else ""
        super().__init__(prefix + message)


class SpeciesPreset:
    """Class for mapping an atom species nickname to its mass

    Attributes
    ----------
    name : str
        species label, as written in configuration files
    mass : float
        atomic mass, kg
    """

    def __init__(self, name: str, mass: float):
        self.name = name
        self.mass = mass


# Define new species below
RB87 = SpeciesPreset("rb87", 86.909180527 * atomic_mass)

# Add new species to the dictionary below to enable them in configuration files
CONFIGURED_SPECIES_LIST = {"RB87": RB87}

# Coins by nickname; "custom" reads the coin_matrix key instead
CONFIGURED_COIN_LIST: Dict[str, Callable[[], CoinOperator]] = {
    "HADAMARD": hadamard_coin,
    "RF-PI-2": lambda: rf_coin_matrix(design_pulse(PulseKind.HADAMARD_ROTATION, 1.0)),
    "IDENTITY": identity_coin,
}


@dataclass(frozen=True)
class FieldSpec:
    kind: str
    default: Any = None
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    choices: Tuple[str, ...] = ()


FIELDS: Dict[str, FieldSpec] = {
    # walk
    "steps": FieldSpec("int", 10, minimum=0),
    "origin_index": FieldSpec("int", 0),
    "half_width": FieldSpec("int", None, minimum=0),
    "coin": FieldSpec("choice", "hadamard", choices=("hadamard", "rf-pi-2", "identity", "custom")),
    "coin_matrix": FieldSpec("str"),
    "initial_coin": FieldSpec("choice", "zero", choices=tuple(COIN_STATES)),
    "envelope_width": FieldSpec("length", None, minimum=0),
    "step_length": FieldSpec("length", 10e-6, minimum=0),
    # variance scan
    "scan_start": FieldSpec("int", 20, minimum=0),
    "scan_stop": FieldSpec("int", 200, minimum=0),
    "scan_step": FieldSpec("int", 10, minimum=1),
    # noise
    "coin_dephasing_prob": FieldSpec("float", 0.0, minimum=0, maximum=1),
    "position_measure_prob": FieldSpec("float", 0.0, minimum=0, maximum=1),
    "coin_angle_error": FieldSpec("angle", 0.0),
    "survival_fraction": FieldSpec("float", 1.0, minimum=0, maximum=1),
    "decoherence_onset_step": FieldSpec("int", None, minimum=0),
    # rf pulse
    "rabi_frequency": FieldSpec("angular_frequency", None, minimum=0),
    "detuning": FieldSpec("angular_frequency", 0.0),
    "duration": FieldSpec("time", None, minimum=0),
    "pulse_kind": FieldSpec("choice", "pi-flip", choices=tuple(kind.value for kind in PulseKind)),
    "samples": FieldSpec("int", 101, minimum=2),
    # raman kick
    "raman_v1": FieldSpec("angular_frequency", None, minimum=0),
    "raman_v2": FieldSpec("angular_frequency", None, minimum=0),
    "raman_delta1": FieldSpec("angular_frequency", None),
    "raman_delta2": FieldSpec("angular_frequency", None),
    "raman_phi1": FieldSpec("angle", 0.0),
    "raman_phi2": FieldSpec("angle", 0.0),
    "raman_k1": FieldSpec("wave_number", None),
    "raman_k2": FieldSpec("wave_number", None),
    "atom_mass": FieldSpec("mass", None, minimum=0),
    "atom_species": FieldSpec("choice", "rb87", choices=tuple(k.lower() for k in CONFIGURED_SPECIES_LIST)),
    "kick_t_max": FieldSpec("time", None, minimum=0),
    "atom_number": FieldSpec("int", 1, minimum=1),
    # trap and timing
    "trap_wavelength": FieldSpec("length", None, minimum=0),
    "beam_waist": FieldSpec("length", None, minimum=0),
    "usable_half_range": FieldSpec("length", None, minimum=0),
    "packet_width": FieldSpec("length", None, minimum=0),
    "kick_time": FieldSpec("time", None, minimum=0),
    "hadamard_pulse_time": FieldSpec("time", None, minimum=0),
    "bitflip_pulse_time": FieldSpec("time", None, minimum=0),
    "translation_time": FieldSpec("time", None, minimum=0),
    "time_mode": FieldSpec("choice", "per-step-sum", choices=("per-step-sum", "paper-literal")),
    "overlap_bitflip": FieldSpec("bool", False),
    # sampling
    "trials": FieldSpec("int", 100000, minimum=1),
    "seed": FieldSpec("int", 0, minimum=0, maximum=2**64 - 1),
}


@dataclass(frozen=True)
class RunConfig:
    """Typed configuration values in SI units, keyed by field name."""

    values: Dict[str, Any] = field(default_factory=dict)

    def get(self, key: str) -> Any:
        if key not in FIELDS:
            raise KeyError(key)
        return self.values.get(key, FIELDS[key].default)

    def has(self, key: str) -> bool:
        return self.get(key) is not None

    def require(self, key: str) -> Any:
        value = self.get(key)
        if value is None:
            raise ConfigParseError("required for this command but not set", key=key)
        return value

    def updated(self, values: Dict[str, Any]) -> RunConfig:
        return RunConfig({**self.values, **values})


def parse_value(key: str, raw: str, line_number: Optional[int] = None) -> Any:
    """Convert one raw configuration value to its typed SI value.

    Parameters
    ----------
    key : str
        field name
    raw : str
        text after the '='
    line_number : int, optional
        source line, for error messages

    Returns
    -------
    the typed value

    Raises
    ------
    ConfigParseError
        for unknown keys, missing or wrong units, malformed or out-of-range values
    """
    spec = FIELDS.get(key)
    if spec is None:
        raise ConfigParseError(f"unknown key. Valid keys: {sorted(FIELDS)}", key, line_number)

    raw = raw.strip()
    if raw == "":
        raise ConfigParseError("empty value", key, line_number)

    if spec.kind == "str":
        return raw
    if spec.kind == "choice":
        if raw.lower() not in spec.choices:
            raise ConfigParseError(f"'{raw}' is not one of {list(spec.choices)}", key, line_number)
        return raw.lower()
    if spec.kind == "bool":
        if raw.lower() in _TRUE_WORDS:
            return True
        if raw.lower() in _FALSE_WORDS:
            return False
        raise ConfigParseError(f"'{raw}' is not a boolean", key, line_number)

    if spec.kind == "int":
        try:
            value = int(raw)
        except ValueError:
            raise ConfigParseError(f"'{raw}' is not an integer", key, line_number)
    else:
        value = _parse_quantity(key, spec.kind, raw, line_number)

    if spec.minimum is not None and value < spec.minimum:
        raise ConfigParseError(f"{value} is below the minimum {spec.minimum}", key, line_number)
    if spec.maximum is not None and value > spec.maximum:
        raise ConfigParseError(f"{value} is above the maximum {spec.maximum}", key, line_number)

    return value


def parse_config_text(text: str) -> Dict[str, Any]:
    """Parse the contents of a configuration file into typed values."""
    values = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"expected 'key = value', got '{line}'", line_number=line_number)

        key, raw = (part.strip() for part in line.split("=", 1))
        values[key] = parse_value(key, raw, line_number)

    return values


def parse_assignments(assignments: Iterable[str]) -> Dict[str, Any]:
    """Parse ``key=value`` command-line overrides."""
    values = {}
    for assignment in assignments:
        if "=" not in assignment:
            raise ConfigParseError(f"expected key=value, got '{assignment}'")
        key, raw = (part.strip() for part in assignment.split("=", 1))
        values[key] = parse_value(key, raw)

    return values


def load_run_config(
    config_path: Optional[str] = None,
    assignments: Iterable[str] = (),
    flags: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Build a RunConfig from a file, ``--set`` overrides and dedicated flags (later wins).

    Parameters
    ----------
    config_path : str, optional
        path to a ``key = value`` file
    assignments : iterable of str
        ``key=value`` overrides
    flags : dict, optional
        raw flag values keyed by field name; None entries are ignored

    Returns
    -------
    RunConfig
    """
    values = {}
    if config_path:
        filepath = check_if_file_exists(config_path)
        if not filepath:
            raise ConfigParseError(f"config file '{config_path}' does not exist")
        with open(filepath, encoding="utf-8") as handle:
            values.update(parse_config_text(handle.read()))
        log.info(f"Loaded {len(values)} settings from {filepath}")

    values.update(parse_assignments(assignments))
    for key, raw in (flags or {}).items():
        if raw is not None:
            values[key] = parse_value(key, str(raw))

    return RunConfig(values)


def build_coin(config: RunConfig) -> CoinOperator:
    """The coin named by the ``coin`` key (``custom`` reads ``coin_matrix``)."""
    name = config.get("coin")
    if name == "custom":
        return parse_coin_matrix(config.require("coin_matrix"))
    return CONFIGURED_COIN_LIST[name.upper()]()


def parse_coin_matrix(raw: str) -> CoinOperator:
    """Parse ``a, b; c, d`` (Python complex literals) into a unitary coin."""
    try:
        rows = [[complex(entry.strip()) for entry in row.split(",")] for row in raw.split(";")]
        entries = np.array(rows, dtype=complex)
    except ValueError:
        raise ConfigParseError(f"'{raw}' is not a 2x2 matrix of complex numbers", key="coin_matrix")

    try:
        return CoinOperator(entries, name="custom")
    except ValueError as err:
        raise ConfigParseError(str(err), key="coin_matrix")


def atom_mass(config: RunConfig) -> float:
    """Explicit ``atom_mass`` if set, else the mass of ``atom_species``."""
    if config.has("atom_mass"):
        return config.get("atom_mass")
    return CONFIGURED_SPECIES_LIST[config.get("atom_species").upper()].mass


def _parse_quantity(key: str, dimension: str, raw: str, line_number: Optional[int]) -> float:
    match = _QUANTITY.match(raw)
    if not match:
        raise ConfigParseError(f"'{raw}' is not a number", key, line_number)

    number, unit = match.groups()
    if dimension == "float":
        if unit is not None:
            raise ConfigParseError(f"dimensionless value given unit '{unit}'", key, line_number)
        return float(number)

    if unit is None:
        raise ConfigParseError(
            f"physical value needs a unit, one of {list(UNITS[dimension])}", key, line_number
        )
    if unit not in UNITS[dimension]:
        raise ConfigParseError(
            f"unit '{unit}' is not a {dimension.replace('_', ' ')} unit; use one of {list(UNITS[dimension])}",
            key,
            line_number,
        )

    return float(number) * UNITS[dimension][unit]

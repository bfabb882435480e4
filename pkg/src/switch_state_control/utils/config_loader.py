"""
Configuration loader for switch-state control runs.

Run configurations are JSON documents with a strict schema: unknown keys are
rejected, missing required keys are reported together, and every error names
the dotted path of the offending field.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..errors import ConfigError, ParameterError
from ..plant import ConverterParams, PerUnitBases, UnitSystem, to_per_unit
from ..simulator import Event

REFERENCE_CONFIG = "reference_buck.json"

_TOP_KEYS = {"converter", "controller", "sim", "output"}
_TOP_REQUIRED = ("controller", "converter")
_CONVERTER_KEYS = {"per_unit", "si", "bases"}
_PARAM_KEYS = ("L", "C", "r_l", "R", "V_s")
_BASES_KEYS = ("V_base", "Z_base", "omega_base")
_CONTROLLER_REQUIRED = ("Q", "alpha", "beta", "fs_hz", "vref_pu")
_CONTROLLER_KEYS = set(_CONTROLLER_REQUIRED) | {"weight_units", "h"}
_SIM_KEYS = {"steps", "x0", "z0", "events", "noise_amplitude", "seed", "band", "tail_fraction"}
_EVENT_KEYS = ("at_step", "load_scale")
_OUTPUT_KEYS = {"csv_path", "summary_path"}
WEIGHT_UNITS = ("pu", "si")


@dataclass(frozen=True)
class ConverterConfig:
    """Converter parameters as written, with the per-unit bases."""

    params: ConverterParams
    bases: PerUnitBases = field(default_factory=PerUnitBases)

    def per_unit_params(self) -> ConverterParams:
        """Parameters normalized to per-unit."""
        if self.params.unit_system is UnitSystem.SI:
            return to_per_unit(self.params, self.bases)
        return self.params


@dataclass(frozen=True)
class ControllerConfig:
    """
    Controller design parameters.

    ``weight_units`` selects whether Q and beta weigh per-unit or SI volts.
    """

    alpha: float
    beta: float
    Q: Tuple[Tuple[float, ...], ...]
    vref_pu: float
    fs_hz: float
    weight_units: str = "pu"
    h: Tuple[float, ...] = (1.0, 0.0)

    def effective_beta(self, bases: PerUnitBases) -> float:
        """Transition penalty on the per-unit scale."""
        if self.weight_units == "si":
            return self.beta / bases.V_base**2
        return self.beta


@dataclass(frozen=True)
class SimConfig:
    steps: int = 1600
    x0: Tuple[float, ...] = (0.0, 0.0)
    z0: int = 0
    events: Tuple[Event, ...] = ()
    noise_amplitude: float = 0.0
    seed: int = 0
    band: float = 0.02
    tail_fraction: float = 0.25


@dataclass(frozen=True)
class OutputConfig:
    csv_path: str = "trace.csv"
    summary_path: str = "summary.json"


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration."""

    converter: ConverterConfig
    controller: ControllerConfig
    sim: SimConfig = field(default_factory=SimConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


def _check_keys(block: Any, path: str, allowed: set, required: Sequence[str] = ()) -> None:
    if not isinstance(block, dict):
        raise ConfigError("expected an object", path or None)
    unknown = sorted(set(block) - allowed)
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(f"unknown key (allowed: {', '.join(sorted(allowed))})", where)
    missing = [key for key in required if key not in block]
    if missing:
        prefix = f"{path}." if path else ""
        raise ConfigError(
            "missing required fields: " + ", ".join(prefix + key for key in missing),
            path or None,
        )


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", path)
    if not math.isfinite(value):
        raise ConfigError("expected a finite number", path)
    return float(value)


def _integer(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", path)
    return value


def _vector(value: Any, path: str, length: int) -> Tuple[float, ...]:
    if not isinstance(value, list) or len(value) != length:
        raise ConfigError(f"expected a list of {length} numbers", path)
    return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(value))


def _parse_params(block: Any, path: str, unit_system: UnitSystem) -> ConverterParams:
    _check_keys(block, path, set(_PARAM_KEYS), _PARAM_KEYS)
    values = {key: _number(block[key], f"{path}.{key}") for key in _PARAM_KEYS}
    try:
        return ConverterParams(unit_system=unit_system, **values)
    except ParameterError as e:
        raise ConfigError(str(e), path) from e


def _parse_converter(block: Any) -> ConverterConfig:
    _check_keys(block, "converter", _CONVERTER_KEYS)
    has_pu, has_si = "per_unit" in block, "si" in block
    if has_pu == has_si:
        raise ConfigError("exactly one of per_unit or si must be given", "converter")
    if has_si and "bases" not in block:
        raise ConfigError("SI parameters need per-unit bases", "converter.bases")

    bases = PerUnitBases()
    if "bases" in block:
        _check_keys(block["bases"], "converter.bases", set(_BASES_KEYS), _BASES_KEYS)
        values = {key: _number(block["bases"][key], f"converter.bases.{key}") for key in _BASES_KEYS}
        try:
            bases = PerUnitBases(**values)
        except ParameterError as e:
            raise ConfigError(str(e), "converter.bases") from e

    if has_si:
        params = _parse_params(block["si"], "converter.si", UnitSystem.SI)
    else:
        params = _parse_params(block["per_unit"], "converter.per_unit", UnitSystem.PER_UNIT)
    return ConverterConfig(params=params, bases=bases)


def _parse_controller(block: Any) -> ControllerConfig:
    _check_keys(block, "controller", _CONTROLLER_KEYS, _CONTROLLER_REQUIRED)
    alpha = _number(block["alpha"], "controller.alpha")
    if not 0.0 < alpha < 1.0:
        raise ConfigError("must lie in (0, 1)", "controller.alpha")
    beta = _number(block["beta"], "controller.beta")
    if beta < 0.0:
        raise ConfigError("must be non-negative", "controller.beta")
    fs_hz = _number(block["fs_hz"], "controller.fs_hz")
    if fs_hz <= 0.0:
        raise ConfigError("must be positive", "controller.fs_hz")
    vref = _number(block["vref_pu"], "controller.vref_pu")
    if vref <= 0.0:
        raise ConfigError("must be positive", "controller.vref_pu")

    Q_raw = block["Q"]
    if not isinstance(Q_raw, list) or len(Q_raw) != 2:
        raise ConfigError("expected a 2x2 matrix", "controller.Q")
    Q = tuple(_vector(row, f"controller.Q[{i}]", 2) for i, row in enumerate(Q_raw))

    weight_units = block.get("weight_units", "pu")
    if weight_units not in WEIGHT_UNITS:
        raise ConfigError(f"must be one of {', '.join(WEIGHT_UNITS)}", "controller.weight_units")
    h = _vector(block.get("h", [1.0, 0.0]), "controller.h", 2)
    if not any(h):
        raise ConfigError("output row must be nonzero", "controller.h")
    return ControllerConfig(
        alpha=alpha,
        beta=beta,
        Q=Q,
        vref_pu=vref,
        fs_hz=fs_hz,
        weight_units=weight_units,
        h=h,
    )


def _parse_sim(block: Any) -> SimConfig:
    _check_keys(block, "sim", _SIM_KEYS)
    defaults = SimConfig()
    steps = _integer(block.get("steps", defaults.steps), "sim.steps")
    if steps < 0:
        raise ConfigError("must be non-negative", "sim.steps")
    x0 = _vector(block.get("x0", list(defaults.x0)), "sim.x0", 2)
    z0 = _integer(block.get("z0", defaults.z0), "sim.z0")
    if z0 not in (0, 1):
        raise ConfigError("must be 0 or 1", "sim.z0")
    noise = _number(block.get("noise_amplitude", defaults.noise_amplitude), "sim.noise_amplitude")
    if noise < 0.0:
        raise ConfigError("must be non-negative", "sim.noise_amplitude")
    seed = _integer(block.get("seed", defaults.seed), "sim.seed")
    band = _number(block.get("band", defaults.band), "sim.band")
    if band <= 0.0:
        raise ConfigError("must be positive", "sim.band")
    tail = _number(block.get("tail_fraction", defaults.tail_fraction), "sim.tail_fraction")
    if not 0.0 < tail <= 1.0:
        raise ConfigError("must lie in (0, 1]", "sim.tail_fraction")

    raw_events = block.get("events", [])
    if not isinstance(raw_events, list):
        raise ConfigError("expected a list", "sim.events")
    events: List[Event] = []
    previous = -1
    for i, raw in enumerate(raw_events):
        path = f"sim.events[{i}]"
        _check_keys(raw, path, set(_EVENT_KEYS), _EVENT_KEYS)
        at_step = _integer(raw["at_step"], f"{path}.at_step")
        if not previous <= at_step < steps:
            raise ConfigError(f"must be sorted and within [0, {steps})", f"{path}.at_step")
        factor = _number(raw["load_scale"], f"{path}.load_scale")
        if factor <= 0.0:
            raise ConfigError("must be positive", f"{path}.load_scale")
        events.append(Event(at_step=at_step, factor=factor))
        previous = at_step
    return SimConfig(
        steps=steps,
        x0=x0,
        z0=z0,
        events=tuple(events),
        noise_amplitude=noise,
        seed=seed,
        band=band,
        tail_fraction=tail,
    )


def _parse_output(block: Any) -> OutputConfig:
    _check_keys(block, "output", _OUTPUT_KEYS)
    values = {}
    for key in _OUTPUT_KEYS:
        if key in block:
            if not isinstance(block[key], str) or not block[key]:
                raise ConfigError("expected a non-empty string", f"output.{key}")
            values[key] = block[key]
    return OutputConfig(**values)


def parse_document(document: Dict[str, Any]) -> RunConfig:
    """
    Validate a decoded configuration document.

    Raises:
        ConfigError: On any schema violation
    """
    _check_keys(document, "", _TOP_KEYS, _TOP_REQUIRED)
    return RunConfig(
        converter=_parse_converter(document["converter"]),
        controller=_parse_controller(document["controller"]),
        sim=_parse_sim(document.get("sim", {})),
        output=_parse_output(document.get("output", {})),
    )


def parse_config(text: str) -> RunConfig:
    """
    Parse a JSON configuration document.

    Args:
        text: JSON text

    Returns:
        RunConfig: Validated configuration

    Raises:
        ConfigError: If the text is not JSON or violates the schema
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}") from e
    return parse_document(document)


def load_document(config_path: str) -> Dict[str, Any]:
    """
    Read a configuration document from a JSON file.

    Raises:
        ConfigError: If the file cannot be read or is not a JSON object
    """
    try:
        with open(config_path, "r") as f:
            document = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}", config_path) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}", config_path) from e
    if not isinstance(document, dict):
        raise ConfigError("expected a JSON object", config_path)
    return document


def reference_document() -> Dict[str, Any]:
    """The shipped reference buck configuration as a raw document."""
    text = resources.files("switch_state_control.config").joinpath(REFERENCE_CONFIG).read_text()
    return json.loads(text)


def load_config(
    config_path: Optional[str] = None, overrides: Sequence[str] = ()
) -> RunConfig:
    """
    Load and validate a configuration file.

    Args:
        config_path: Path to the JSON file; the reference buck configuration
                     is used when not provided
        overrides: Dotted ``key=value`` pairs applied before validation

    Returns:
        RunConfig: Validated configuration
    """
    document = load_document(config_path) if config_path else reference_document()
    return parse_document(apply_overrides(document, overrides))


def load_reference_config() -> RunConfig:
    """Validated reference buck configuration."""
    return parse_document(reference_document())


def _parse_override_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(document: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """
    Apply dotted ``key=value`` overrides to a copy of ``document``.

    Values are decoded as JSON when possible and kept as strings otherwise;
    missing intermediate objects are created.
    """
    result = json.loads(json.dumps(document))
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        parts = key.split(".")
        node = result
        for i, part in enumerate(parts[:-1]):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError("cannot override inside a non-object", ".".join(parts[: i + 1]))
            node = child
        node[parts[-1]] = _parse_override_value(raw)
    return result


def to_dict(config: RunConfig) -> Dict[str, Any]:
    """Schema-shaped document of a validated configuration, defaults filled in."""
    params = config.converter.params
    param_block = {key: getattr(params, key) for key in _PARAM_KEYS}
    bases = config.converter.bases
    unit_key = "si" if params.unit_system is UnitSystem.SI else "per_unit"
    ctrl = config.controller
    sim = config.sim
    return {
        "converter": {
            unit_key: param_block,
            "bases": {key: getattr(bases, key) for key in _BASES_KEYS},
        },
        "controller": {
            "alpha": ctrl.alpha,
            "beta": ctrl.beta,
            "Q": [list(row) for row in ctrl.Q],
            "vref_pu": ctrl.vref_pu,
            "fs_hz": ctrl.fs_hz,
            "weight_units": ctrl.weight_units,
            "h": list(ctrl.h),
        },
        "sim": {
            "steps": sim.steps,
            "x0": list(sim.x0),
            "z0": sim.z0,
            "events": [{"at_step": e.at_step, "load_scale": e.factor} for e in sim.events],
            "noise_amplitude": sim.noise_amplitude,
            "seed": sim.seed,
            "band": sim.band,
            "tail_fraction": sim.tail_fraction,
        },
        "output": {"csv_path": config.output.csv_path, "summary_path": config.output.summary_path},
    }


def canonical_json(config: RunConfig) -> str:
    """Sorted-key, whitespace-free JSON of the configuration."""
    return json.dumps(to_dict(config), sort_keys=True, separators=(",", ":"))


def config_hash(config: RunConfig) -> str:
    """SHA-256 hex digest of the canonical JSON of ``config``."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()

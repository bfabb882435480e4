"""
Scenario presets and parameter sweeps.

Builds the discrete plant and the regulation problem from a ``RunConfig``,
synthesizes the controller, and runs the named buck experiments: startup,
load steps in both directions, a steady-state window and two noise levels.
"""

import copy
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .controller import AffinePolicy, ProblemSpec, ValueFunction, affine_coeffs
from .controller import regulation_targets, synthesize
from .errors import MetricsError, ParameterError, SwitchControlError
from .linalg import Matrix
from .plant import SystemModel, discretize_plant
from .simulator import Event, Metrics, Scenario, Trace, metrics, run
from .utils.config_loader import RunConfig, apply_overrides, parse_document, reference_document

logger = logging.getLogger(__name__)

PREROLL_STEPS = 1600
EVENT_STEP = 800
LOAD_STEP = 1.3


@dataclass(frozen=True)
class Design:
    """Plant, problem and synthesized controller of one configuration."""

    model: SystemModel
    spec: ProblemSpec
    V: ValueFunction
    pol: AffinePolicy


@dataclass
class PresetRun:
    """
    Outcome of one preset.

    ``metrics`` is None when they cannot be derived (for example an empty
    trace); ``metrics_error`` then holds the reason.
    """

    name: str
    config: RunConfig
    design: Design
    trace: Trace
    metrics: Optional[Metrics]
    metrics_error: Optional[str] = None
    preroll: Optional[Dict[str, Any]] = None


@dataclass(frozen=True)
class SweepRow:
    beta: float
    switch_count: int
    ripple_pp: float
    settling_time: Optional[float]
    mean_switching_frequency: float
    mean_tail_v: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "beta": self.beta,
            "switch_count": self.switch_count,
            "ripple_pp": self.ripple_pp,
            "settling_time": self.settling_time,
            "mean_switching_frequency": self.mean_switching_frequency,
            "mean_tail_v": self.mean_tail_v,
        }


def effective_weights(config: RunConfig) -> Tuple[Matrix, float]:
    """
    State weight and transition penalty on the per-unit scale.

    With SI weights the stage cost e_SI^T Q e_SI + beta |u - z| equals V_base^2
    times the per-unit cost with Q' = D Q D / V_base^2 and beta' = beta / V_base^2,
    D mapping per-unit states to SI states.
    """
    Q = np.array(config.controller.Q, dtype=float)
    bases = config.converter.bases
    if config.controller.weight_units == "si":
        D = bases.state_scaling()
        Q = D @ Q @ D / bases.V_base**2
    return Q, config.controller.effective_beta(bases)


def build_problem(
    config: RunConfig, literal_signs: bool = False
) -> Tuple[SystemModel, ProblemSpec]:
    """Discrete per-unit plant and regulation problem of a configuration."""
    params = config.converter.per_unit_params()
    model = discretize_plant(
        params,
        config.controller.fs_hz,
        omega_base=config.converter.bases.omega_base,
        positive_coupling=literal_signs,
    )
    Q, beta = effective_weights(config)
    _, r = regulation_targets(config.controller.h, config.controller.vref_pu)
    spec = ProblemSpec(model=model, Q=Q, r=r, alpha=config.controller.alpha, beta=beta)
    return model, spec


def design(config: RunConfig, literal_signs: bool = False) -> Design:
    """Build the problem and synthesize its controller."""
    model, spec = build_problem(config, literal_signs=literal_signs)
    V = synthesize(spec)
    pol = affine_coeffs(V, model)
    logger.info(
        f"Controller: delta={np.round(pol.delta, 6).tolist()}, zeta={pol.zeta:.6g}, "
        f"thresholds=+/-{pol.beta / pol.alpha:.6g}"
    )
    return Design(model=model, spec=spec, V=V, pol=pol)


def scenario_from_config(config: RunConfig, name: str = "custom") -> Scenario:
    sim = config.sim
    return Scenario(
        steps=sim.steps,
        x0=sim.x0,
        z0=sim.z0,
        events=sim.events,
        noise_amplitude=sim.noise_amplitude,
        seed=sim.seed,
        name=name,
    )


def _events(*pairs: Tuple[int, float]) -> List[Dict[str, Any]]:
    return [{"at_step": step, "load_scale": factor} for step, factor in pairs]


# Preset sim blocks, merged into the base document before overrides.
PRESET_SIM: Dict[str, Dict[str, Any]] = {
    "startup": {"events": [], "noise_amplitude": 0.0},
    "load-increase": {"events": _events((EVENT_STEP, LOAD_STEP)), "noise_amplitude": 0.0},
    "load-increase-current": {
        "events": _events((EVENT_STEP, 1.0 / LOAD_STEP)),
        "noise_amplitude": 0.0,
    },
    "load-decrease": {
        "events": _events((0, LOAD_STEP), (EVENT_STEP, 1.0)),
        "noise_amplitude": 0.0,
    },
    "steady-state": {"events": [], "noise_amplitude": 0.0},
    "noise-low": {"events": [], "noise_amplitude": 0.1},
    "noise-high": {"events": [], "noise_amplitude": 0.3},
}

# Presets that start from the end of an earlier run, with that run's events.
PREROLL: Dict[str, List[Dict[str, Any]]] = {
    "load-decrease": _events((EVENT_STEP, LOAD_STEP)),
    "steady-state": [],
}

PRESETS = tuple(PRESET_SIM)


def preset_config(
    name: str, overrides: Sequence[str] = (), base_document: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """
    Configuration of a named preset.

    Raises:
        ParameterError: If the preset is unknown
        ConfigError: If the overridden document is invalid
    """
    if name not in PRESET_SIM:
        raise ParameterError(f"unknown preset '{name}' (choose from {', '.join(PRESETS)})")
    document = copy.deepcopy(base_document) if base_document else reference_document()
    document.setdefault("sim", {}).update(PRESET_SIM[name])
    return parse_document(apply_overrides(document, overrides))


def _preroll(
    config: RunConfig, design_: Design, events: List[Dict[str, Any]]
) -> Tuple[Trace, Dict[str, Any]]:
    scenario = Scenario(
        steps=PREROLL_STEPS,
        x0=config.sim.x0,
        z0=config.sim.z0,
        events=tuple(Event(at_step=e["at_step"], factor=e["load_scale"]) for e in events),
        seed=config.sim.seed,
        name="preroll",
    )
    trace = run(design_.model, design_.pol, design_.spec, scenario)
    info = {
        "steps": PREROLL_STEPS,
        "events": events,
        "final_state": list(trace.final_state),
        "final_z": trace.final_z,
    }
    return trace, info


def _safe_metrics(config: RunConfig, trace: Trace) -> Tuple[Optional[Metrics], Optional[str]]:
    try:
        return (
            metrics(
                trace,
                config.controller.vref_pu,
                band=config.sim.band,
                tail_fraction=config.sim.tail_fraction,
                alpha=config.controller.alpha,
            ),
            None,
        )
    except MetricsError as e:
        logger.warning(f"Metrics unavailable: {e}")
        return None, str(e)


def run_config(
    config: RunConfig,
    name: str = "custom",
    literal_signs: bool = False,
    preroll_events: Optional[List[Dict[str, Any]]] = None,
    design_: Optional[Design] = None,
) -> PresetRun:
    """
    Synthesize and simulate one configuration.

    With ``preroll_events`` set, a pre-roll run from the configured initial
    state comes first and the main run continues from its final state.
    """
    d = design_ or design(config, literal_signs=literal_signs)
    scenario = scenario_from_config(config, name)
    preroll_info = None
    if preroll_events is not None:
        pre_trace, preroll_info = _preroll(config, d, preroll_events)
        scenario = replace(scenario, x0=pre_trace.final_state, z0=pre_trace.final_z)
    trace = run(d.model, d.pol, d.spec, scenario)
    result_metrics, error = _safe_metrics(config, trace)
    return PresetRun(
        name=name,
        config=config,
        design=d,
        trace=trace,
        metrics=result_metrics,
        metrics_error=error,
        preroll=preroll_info,
    )


def run_preset(
    name: str,
    overrides: Sequence[str] = (),
    literal_signs: bool = False,
    base_document: Optional[Dict[str, Any]] = None,
) -> PresetRun:
    """
    Run a named experiment on the reference converter (or ``base_document``).

    ``load-decrease`` starts from the end of a load-increase run with the
    load still raised, and ``steady-state`` from the end of a startup run.
    """
    config = preset_config(name, overrides, base_document)
    logger.info(f"Running preset '{name}' for {config.sim.steps} steps")
    return run_config(
        config, name=name, literal_signs=literal_signs, preroll_events=PREROLL.get(name)
    )


def sweep_beta(
    values: Sequence[float],
    base: RunConfig,
    max_workers: int = 1,
    literal_signs: bool = False,
) -> List[SweepRow]:
    """
    Steady-window metrics for each transition penalty in ``values``.

    Each value gets a fresh synthesis, a startup pre-roll and a steady run with
    the base seed; rows come back in input order.

    Raises:
        ParameterError: If ``values`` is empty or holds a negative entry
    """
    if not values:
        raise ParameterError("beta sweep needs at least one value")
    for beta in values:
        if beta < 0:
            raise ParameterError(f"beta must be non-negative, got {beta}")
    steady = replace(base.sim, events=(), noise_amplitude=0.0)

    def one(beta: float) -> SweepRow:
        config = replace(
            base, controller=replace(base.controller, beta=float(beta)), sim=steady
        )
        try:
            result = run_config(
                config, name=f"beta={beta:g}", literal_signs=literal_signs, preroll_events=[]
            )
        except SwitchControlError as e:
            logger.error(f"beta={beta:g}: {e}")
            raise
        if result.metrics is None:
            raise MetricsError(f"beta={beta:g}: {result.metrics_error}")
        m = result.metrics
        return SweepRow(
            beta=float(beta),
            switch_count=m.switch_count,
            ripple_pp=m.ripple_pp,
            settling_time=m.settling_time,
            mean_switching_frequency=m.mean_switching_frequency,
            mean_tail_v=m.mean_tail_v,
        )

    if max_workers <= 1:
        return [one(beta) for beta in values]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(one, values))


"""
Summary reports of synthesis, simulation and oracle runs.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from . import __version__
from .controller import f_direct, sliding_equilibrium, theta_form_coeffs
from .errors import SingularMatrixError
from .plant import UnitSystem
from .scenarios import EVENT_STEP, Design, PresetRun
from .simulator import GENERATOR_NAME, Trace, first_band_entry, first_off_switch
from .simulator import window_frequency
from .utils.config_loader import RunConfig, config_hash

logger = logging.getLogger(__name__)

SETTLING_LIMIT_S = 20e-3
MEAN_TOLERANCE = 0.05
FREQUENCY_TOLERANCE = 0.20


@dataclass
class SummaryReport:
    """JSON summary written next to every trace."""

    config_hash: str
    seed: int
    gains: Dict[str, Any]
    weights: Dict[str, Any]
    discrepancies: Dict[str, Any]
    metrics: Optional[Dict[str, Any]] = None
    metrics_error: Optional[str] = None
    claims: Dict[str, Any] = field(default_factory=dict)
    scenario: str = "custom"
    preroll: Optional[Dict[str, Any]] = None
    generator: str = GENERATOR_NAME
    tool_version: str = __version__

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tool_version": self.tool_version,
            "config_hash": self.config_hash,
            "scenario": self.scenario,
            "seed": self.seed,
            "generator": self.generator,
            "gains": self.gains,
            "weights": self.weights,
            "metrics": self.metrics,
            "metrics_error": self.metrics_error,
            "claims": self.claims,
            "discrepancies": self.discrepancies,
            "preroll": self.preroll,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write(self, path: Union[str, Path]) -> None:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(self.to_json() + "\n")
        logger.info(f"Summary written to {target}")


def gains_echo(d: Design) -> Dict[str, Any]:
    return {
        "A": d.model.A.tolist(),
        "b": d.model.b.tolist(),
        "P": d.V.P.tolist(),
        "theta": d.V.theta.tolist(),
        "v": d.V.v,
        "bellman_residual_max": d.V.bellman_residual_max,
        "delta": d.pol.delta.tolist(),
        "zeta": d.pol.zeta,
        "threshold_on": d.pol.threshold(0),
        "threshold_off": d.pol.threshold(1),
    }


def weights_echo(config: RunConfig, d: Design) -> Dict[str, Any]:
    return {
        "weight_units": config.controller.weight_units,
        "beta": config.controller.beta,
        "beta_effective": d.spec.beta,
        "Q_effective": d.spec.Q.tolist(),
        "r": d.spec.r.tolist(),
        "alpha": d.spec.alpha,
    }


def discrepancy_block(config: RunConfig, d: Design, samples: int = 1000) -> Dict[str, Any]:
    """
    Alternative readings of the model and the switching function, and the
    regulation offset of the policy actually used.

    ``positive_coupling`` evaluates the continuous model with +1/L in the
    (2,1) entry; ``theta_form`` evaluates the coefficient variant with b and
    theta exchanged against the switching function actually used.
    ``steady_offset`` is the operating point the closed loop settles around
    and its distance from the set point as a fraction of the set point.
    """
    params = config.converter.per_unit_params()
    L, C, r_l, R = params.L, params.C, params.r_l, params.R
    trace_c = -1.0 / (R * C) - r_l / L
    det_c = r_l / (R * C * L) - 1.0 / (C * L)
    hurwitz = trace_c < 0.0 and det_c > 0.0

    delta_t, zeta_t = theta_form_coeffs(d.V, d.model)
    rng = np.random.default_rng(2)
    states = rng.uniform(-2.0, 2.0, size=(samples, d.model.n))
    direct = np.array([f_direct(d.V, d.model, x) for x in states])
    deviation = float(np.max(np.abs(states @ delta_t + zeta_t - direct)))
    return {
        "positive_coupling": {
            "A_c_21": 1.0 / L,
            "trace": trace_c,
            "det": det_c,
            "hurwitz": hurwitz,
        },
        "theta_form": {
            "delta_theta_form": delta_t.tolist(),
            "zeta_theta_form": zeta_t,
            "max_deviation_from_f": deviation,
            "agrees": deviation < 1e-10,
        },
        "steady_offset": _steady_offset(config, d),
    }


def _steady_offset(config: RunConfig, d: Design) -> Optional[Dict[str, Any]]:
    try:
        duty, x_eq = sliding_equilibrium(d.V, d.model)
    except SingularMatrixError as e:
        logger.warning(f"No steady operating point: {e}")
        return None
    r_v = config.controller.vref_pu
    offset = (float(x_eq[0]) - r_v) / r_v
    return {
        "duty": duty,
        "state": x_eq.tolist(),
        "v_offset_fraction": offset,
        "within_band": abs(offset) <= config.sim.band,
    }


def _claim(value: Optional[float], threshold: float, holds: bool) -> Dict[str, Any]:
    return {"value": value, "threshold": threshold, "holds": bool(holds)}


def claims_block(trace: Trace, r_v: float, band: float, name: str) -> Dict[str, Any]:
    """
    Checks on the shape of a run, reported with their thresholds.

    Settling inside the band within 20 ms, the switch held closed until the
    first band entry, the final-half mean within 5 % of the set point, and for
    load-step presets the switching-frequency change across the event. The
    closed loop settles near the ``steady_offset`` point of the discrepancy
    block; when that point lies outside the band the settling and band-entry
    checks fail.
    """
    if len(trace) == 0:
        return {}
    v = trace.column("v_c")
    t = trace.column("t")
    outside = np.nonzero(np.abs(v - r_v) > band * r_v)[0]
    if outside.size == 0:
        settling: Optional[float] = float(t[0])
    elif outside[-1] == len(v) - 1:
        settling = None
    else:
        settling = float(t[outside[-1] + 1])

    claims: Dict[str, Any] = {
        "settling_time_s": _claim(
            settling, SETTLING_LIMIT_S, settling is not None and settling <= SETTLING_LIMIT_S
        ),
    }
    entry = first_band_entry(trace, r_v, band)
    off = first_off_switch(trace)
    claims["on_until_band_entry"] = {
        "first_band_entry_step": entry,
        "first_off_switch_step": off,
        "holds": entry is not None and (off is None or off > entry),
    }
    half_mean = float(np.mean(v[len(v) // 2 :]))
    claims["final_half_mean_v"] = _claim(
        half_mean, MEAN_TOLERANCE, abs(half_mean - r_v) <= MEAN_TOLERANCE * r_v
    )

    steps = len(trace)
    if name.startswith("load-") and steps > EVENT_STEP:
        before = window_frequency(trace, EVENT_STEP // 2, EVENT_STEP)
        after = window_frequency(trace, EVENT_STEP + (steps - EVENT_STEP) // 2, steps)
        change = abs(after - before) / before if before > 0 else None
        claims["frequency_change"] = {
            "before_hz": before,
            "after_hz": after,
            "value": change,
            "threshold": FREQUENCY_TOLERANCE,
            "holds": change is not None and change < FREQUENCY_TOLERANCE,
        }
    return claims


def build_summary(result: PresetRun) -> SummaryReport:
    """Summary of a simulation run."""
    config = result.config
    return SummaryReport(
        config_hash=config_hash(config),
        seed=config.sim.seed,
        gains=gains_echo(result.design),
        weights=weights_echo(config, result.design),
        discrepancies=discrepancy_block(config, result.design),
        metrics=result.metrics.to_dict() if result.metrics is not None else None,
        metrics_error=result.metrics_error,
        claims=claims_block(result.trace, config.controller.vref_pu, config.sim.band, result.name),
        scenario=result.name,
        preroll=result.preroll,
        generator=result.trace.generator,
    )


def synthesis_summary(config: RunConfig, d: Design) -> Dict[str, Any]:
    """Gains and discrepancy report of a synthesis-only run."""
    unit = "si" if config.converter.params.unit_system is UnitSystem.SI else "per_unit"
    return {
        "tool_version": __version__,
        "config_hash": config_hash(config),
        "converter_units": unit,
        "f_s_hz": d.model.f_s,
        "gains": gains_echo(d),
        "weights": weights_echo(config, d),
        "discrepancies": discrepancy_block(config, d),
    }

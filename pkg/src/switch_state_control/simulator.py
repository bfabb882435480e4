"""
Closed-loop simulation of the switch-state controller.

A run steps the plant under the hysteresis policy, applies scenario events
(load steps) and input-voltage noise, and records one ``TraceRow`` per step.
Metrics and discounted-cost accounting are derived from the recorded trace.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import IO, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .controller import AffinePolicy, ProblemSpec, policy, stage_cost
from .errors import DivergenceError, MetricsError, ParameterError
from .linalg import Vector, as_vector
from .plant import SystemModel, rescale_load

logger = logging.getLogger(__name__)

GENERATOR_NAME = "numpy.random.PCG64"
DIVERGENCE_LIMIT = 1e3
CSV_HEADER = ("k", "t_s", "v_pu", "i_pu", "u", "z", "stage_cost", "J_partial")


class EventKind(str, Enum):
    """Kinds of scenario events."""

    LOAD_SCALE = "load_scale"


@dataclass(frozen=True)
class Event:
    """
    Scenario event applied before the step ``at_step`` is taken.

    A ``load_scale`` event sets the load to ``factor`` times the nominal R.
    """

    at_step: int
    factor: float
    kind: EventKind = EventKind.LOAD_SCALE

    def __post_init__(self) -> None:
        if self.at_step < 0:
            raise ParameterError(f"event step must be non-negative, got {self.at_step}")
        if not (math.isfinite(self.factor) and self.factor > 0):
            raise ParameterError(f"load scale factor must be positive, got {self.factor}")


@dataclass(frozen=True)
class Scenario:
    """
    One closed-loop experiment.

    Attributes:
        steps: Number of switching decisions
        x0: Initial state
        z0: Initial switch state (the switch starts open)
        events: Events ordered by step, each within [0, steps)
        noise_amplitude: Half-width of the uniform source-voltage noise (p.u.)
        seed: Seed of the noise generator
        name: Label carried into reports
    """

    steps: int
    x0: Tuple[float, ...] = (0.0, 0.0)
    z0: int = 0
    events: Tuple[Event, ...] = ()
    noise_amplitude: float = 0.0
    seed: int = 0
    name: str = "custom"

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ParameterError(f"steps must be non-negative, got {self.steps}")
        if self.z0 not in (0, 1):
            raise ParameterError(f"z0 must be 0 or 1, got {self.z0}")
        if not (math.isfinite(self.noise_amplitude) and self.noise_amplitude >= 0):
            raise ParameterError(
                f"noise amplitude must be non-negative, got {self.noise_amplitude}"
            )
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        object.__setattr__(self, "events", tuple(self.events))
        previous = -1
        for event in self.events:
            if event.at_step < previous:
                raise ParameterError("events must be sorted by step")
            if event.at_step >= self.steps:
                raise ParameterError(
                    f"event at step {event.at_step} is outside a {self.steps}-step run"
                )
            previous = event.at_step


@dataclass(frozen=True)
class TraceRow:
    """State, decision and cost at one step."""

    k: int
    t: float
    x: Tuple[float, ...]
    u: int
    z: int
    stage_cost: float
    J_partial: float

    @property
    def v_c(self) -> float:
        return self.x[0]

    @property
    def i_l(self) -> float:
        return self.x[1] if len(self.x) > 1 else math.nan


@dataclass
class Trace:
    """
    Recorded closed-loop run.

    ``final_state`` and ``final_z`` hold the state after the last row so a
    follow-up run can continue from it.
    """

    rows: List[TraceRow]
    T: float
    seed: int
    generator: str = GENERATOR_NAME
    final_state: Tuple[float, ...] = ()
    final_z: int = 0
    scenario_name: str = "custom"

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def duration(self) -> float:
        """Simulated time in seconds."""
        return len(self.rows) * self.T

    def column(self, name: str) -> np.ndarray:
        """Values of one ``TraceRow`` attribute as an array."""
        return np.array([getattr(row, name) for row in self.rows], dtype=float)

    def window(self, start: int, stop: Optional[int] = None) -> "Trace":
        """Rows with start <= k < stop as a new trace sharing the run metadata."""
        selected = [row for row in self.rows if row.k >= start and (stop is None or row.k < stop)]
        return Trace(
            rows=selected,
            T=self.T,
            seed=self.seed,
            generator=self.generator,
            final_state=self.final_state,
            final_z=self.final_z,
            scenario_name=self.scenario_name,
        )

    def to_csv(self, target: Union[str, Path, IO[str]], config_hash: str = "") -> None:
        """
        Write the trace as CSV with 12 significant digits.

        The first line is a comment carrying the config hash, the generator and
        the seed.
        """
        if isinstance(target, (str, Path)):
            path = Path(target)
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="") as f:
                self._write_csv(f, config_hash)
        else:
            self._write_csv(target, config_hash)

    def _write_csv(self, stream: IO[str], config_hash: str) -> None:
        stream.write(
            f"# config_hash={config_hash} generator={self.generator} seed={self.seed}\n"
        )
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow(
                [
                    row.k,
                    f"{row.t:.12g}",
                    f"{row.v_c:.12g}",
                    f"{row.i_l:.12g}",
                    row.u,
                    row.z,
                    f"{row.stage_cost:.12g}",
                    f"{row.J_partial:.12g}",
                ]
            )

    def to_csv_string(self, config_hash: str = "") -> str:
        buffer = io.StringIO()
        self._write_csv(buffer, config_hash)
        return buffer.getvalue()


@dataclass(frozen=True)
class Metrics:
    """
    Summary numbers of a trace.

    ``settling_time`` is None when the band is never held to the end of the run.
    """

    settling_time: Optional[float]
    overshoot_fraction: float
    ripple_pp: float
    switch_count: int
    mean_switching_frequency: float
    J_truncated: float
    J_tail_bound: float
    mean_tail_v: float

    def to_dict(self) -> Dict[str, Optional[float]]:
        return {
            "settling_time": self.settling_time,
            "overshoot_fraction": self.overshoot_fraction,
            "ripple_pp": self.ripple_pp,
            "switch_count": self.switch_count,
            "mean_switching_frequency": self.mean_switching_frequency,
            "J_truncated": self.J_truncated,
            "J_tail_bound": self.J_tail_bound,
            "mean_tail_v": self.mean_tail_v,
        }


def _source_voltage(model: SystemModel) -> float:
    return model.params.V_s if model.params is not None else 1.0


def run(
    model_nominal: SystemModel,
    pol: AffinePolicy,
    spec: ProblemSpec,
    scenario: Scenario,
    divergence_limit: float = DIVERGENCE_LIMIT,
) -> Trace:
    """
    Simulate the closed loop x_{k+1} = A x_k + b u_k, z_{k+1} = u_k.

    The policy gains stay fixed for the whole run. A load event rebuilds the
    plant matrices from the nominal model with the load scaled; noise scales the
    input vector by (1 + eta_k / V_s) with eta_k uniform on [-a, a], one draw per
    step from a PCG64 generator seeded with ``scenario.seed``.

    Args:
        model_nominal: Plant the policy was synthesized for
        pol: Affine switching policy
        spec: Problem data, used for the stage cost and the discount
        scenario: Run length, initial condition, events and noise
        divergence_limit: Abort once any state component exceeds this magnitude

    Returns:
        Trace: One row per step

    Raises:
        DivergenceError: If the state becomes non-finite or leaves the envelope
    """
    x = as_vector(scenario.x0, "x0")
    if x.shape[0] != model_nominal.n:
        raise ParameterError(f"x0 has length {x.shape[0]}, expected {model_nominal.n}")
    rng = np.random.Generator(np.random.PCG64(scenario.seed))
    amplitude = scenario.noise_amplitude
    v_source = _source_voltage(model_nominal)
    alpha = spec.alpha

    actual = model_nominal
    events = scenario.events
    next_event = 0
    z = scenario.z0
    J = 0.0
    discount = 1.0
    rows: List[TraceRow] = []

    for k in range(scenario.steps):
        while next_event < len(events) and events[next_event].at_step == k:
            event = events[next_event]
            logger.info(f"step {k}: load scaled to {event.factor:g} x nominal")
            actual = rescale_load(model_nominal, event.factor)
            next_event += 1

        u = policy(pol, x, z)
        cost = stage_cost(spec, x, z, u)
        J += discount * cost
        rows.append(
            TraceRow(
                k=k,
                t=k * model_nominal.T,
                x=tuple(float(v) for v in x),
                u=u,
                z=z,
                stage_cost=cost,
                J_partial=J,
            )
        )

        b_step: Vector = actual.b
        if amplitude > 0.0:
            eta = float(rng.uniform(-amplitude, amplitude))
            b_step = actual.b * (1.0 + eta / v_source)
        x = actual.A @ x + b_step * u

        if not np.all(np.isfinite(x)) or float(np.max(np.abs(x))) > divergence_limit:
            logger.error(f"Closed loop diverged at step {k + 1}: x={x.tolist()}")
            raise DivergenceError(
                f"state {x.tolist()} left the envelope |x| <= {divergence_limit:g}", step=k + 1
            )
        z = u
        discount *= alpha

    logger.debug(f"Simulated {scenario.steps} steps of scenario '{scenario.name}'")
    return Trace(
        rows=rows,
        T=model_nominal.T,
        seed=scenario.seed,
        final_state=tuple(float(v) for v in x),
        final_z=z,
        scenario_name=scenario.name,
    )


def discounted_cost(trace: Trace, alpha: float) -> Tuple[float, float]:
    """
    Discounted sum of the stage costs and a bound on the truncated tail.

    Returns:
        Tuple[float, float]: (sum alpha^k c_k, alpha^N c_max / (1 - alpha))
    """
    if len(trace) == 0:
        raise MetricsError("discounted cost of an empty trace")
    costs = trace.column("stage_cost")
    weights = np.power(alpha, np.arange(len(costs), dtype=float))
    J = float(np.sum(weights * costs))
    tail = alpha ** len(costs) * float(np.max(costs)) / (1.0 - alpha)
    return J, tail


def metrics(
    trace: Trace,
    r_v: float,
    band: float = 0.02,
    tail_fraction: float = 0.25,
    *,
    alpha: float,
) -> Metrics:
    """
    Settling, overshoot, ripple, switching and cost figures of a trace.

    Args:
        trace: Nonempty trace
        r_v: Output set point
        band: Settling band as a fraction of ``r_v``
        tail_fraction: Share of final rows used for ripple and the tail mean
        alpha: Discount of the cost accounting

    Raises:
        MetricsError: If the trace is empty
    """
    if len(trace) == 0:
        raise MetricsError("metrics of an empty trace")
    if r_v <= 0:
        raise ParameterError(f"set point must be positive, got {r_v}")
    if not 0.0 < tail_fraction <= 1.0:
        raise ParameterError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")

    v = trace.column("v_c")
    t = trace.column("t")
    u = trace.column("u")
    z = trace.column("z")

    outside = np.nonzero(np.abs(v - r_v) > band * r_v)[0]
    if outside.size == 0:
        settling: Optional[float] = float(t[0])
    elif outside[-1] == len(v) - 1:
        settling = None
    else:
        settling = float(t[outside[-1] + 1])

    tail_len = max(1, int(math.ceil(tail_fraction * len(v))))
    tail = v[-tail_len:]
    switches = int(np.sum(np.abs(u - z)))
    J, tail_bound = discounted_cost(trace, alpha)
    return Metrics(
        settling_time=settling,
        overshoot_fraction=max(0.0, float(np.max(v)) - r_v) / r_v,
        ripple_pp=float(np.max(tail) - np.min(tail)),
        switch_count=switches,
        mean_switching_frequency=switches / (2.0 * trace.duration),
        J_truncated=J,
        J_tail_bound=tail_bound,
        mean_tail_v=float(np.mean(tail)),
    )


def window_frequency(trace: Trace, start: int, stop: int) -> float:
    """Mean switching frequency over steps start <= k < stop."""
    part = trace.window(start, stop)
    if len(part) == 0:
        raise MetricsError(f"empty window [{start}, {stop})")
    switches = float(np.sum(np.abs(part.column("u") - part.column("z"))))
    return switches / (2.0 * part.duration)


def first_band_entry(trace: Trace, r_v: float, band: float = 0.02) -> Optional[int]:
    """Index of the first row inside the band, or None."""
    v = trace.column("v_c")
    inside = np.nonzero(np.abs(v - r_v) <= band * r_v)[0]
    return int(inside[0]) if inside.size else None


def first_off_switch(trace: Trace) -> Optional[int]:
    """Index of the first row that opens a closed switch, or None."""
    for row in trace.rows:
        if row.z == 1 and row.u == 0:
            return row.k
    return None


def recompute_partial_costs(stage_costs: Sequence[float], alpha: float) -> np.ndarray:
    """Running discounted sums of a stage-cost column."""
    total = 0.0
    discount = 1.0
    out = []
    for c in stage_costs:
        total += discount * c
        out.append(total)
        discount *= alpha
    return np.array(out)

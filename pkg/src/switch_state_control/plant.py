"""
Buck converter plant model.

Builds the continuous two-state model (capacitor voltage v_c, inductor current
i_l), converts component values between SI and per-unit, and discretizes the
model with a zero-order hold into the ``SystemModel`` consumed by the
controller, the simulator and the oracle.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike

from .errors import ParameterError, StabilityError
from .linalg import Matrix, Vector, as_matrix, as_vector, spectral_radius, zoh_discretize

logger = logging.getLogger(__name__)

STATE_LABELS = ("v_c", "i_l")


class UnitSystem(str, Enum):
    """Unit system of a set of converter parameters."""

    SI = "si"
    PER_UNIT = "pu"


@dataclass(frozen=True)
class ConverterParams:
    """
    Buck converter component values.

    Attributes:
        L: Inductance (H or p.u.)
        C: Capacitance (F or p.u.)
        r_l: Inductor loss resistance (ohm or p.u.), zero for a lossless inductor
        R: Load resistance (ohm or p.u.)
        V_s: Source voltage (V or p.u.)
        unit_system: Units the values are expressed in
    """

    L: float
    C: float
    r_l: float
    R: float
    V_s: float
    unit_system: UnitSystem = UnitSystem.PER_UNIT

    def __post_init__(self) -> None:
        for name in ("L", "C", "R", "V_s"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be strictly positive, got {value}")
        if not (math.isfinite(self.r_l) and self.r_l >= 0):
            raise ParameterError(f"r_l must be non-negative, got {self.r_l}")
        if self.r_l >= self.R:
            logger.warning(
                f"Inductor loss r_l={self.r_l} is not below the load R={self.R}; "
                "the converter will regulate poorly"
            )


@dataclass(frozen=True)
class PerUnitBases:
    """
    Normalization bases.

    Attributes:
        V_base: Voltage base (V)
        Z_base: Impedance base (ohm)
        omega_base: Angular frequency base (rad/s)
    """

    V_base: float = 20.0
    Z_base: float = 9.0
    omega_base: float = 2.0 * math.pi * 40000.0

    def __post_init__(self) -> None:
        for name in ("V_base", "Z_base", "omega_base"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be strictly positive, got {value}")

    @property
    def I_base(self) -> float:
        """Current base (A)."""
        return self.V_base / self.Z_base

    def state_scaling(self) -> Matrix:
        """Diagonal map from per-unit states (v_c, i_l) to SI states."""
        return np.diag([self.V_base, self.I_base])


# Reference converter: 1 mH, 220 uF, 1.5 ohm, 9 ohm, 20 V; and its normalized column.
REFERENCE_SI = ConverterParams(
    L=1e-3, C=220e-6, r_l=1.5, R=9.0, V_s=20.0, unit_system=UnitSystem.SI
)
REFERENCE_PU = ConverterParams(L=27.9, C=497.0, r_l=0.17, R=1.0, V_s=1.0)
REFERENCE_BASES = PerUnitBases()
REFERENCE_FS_HZ = 20000.0


@dataclass(frozen=True, eq=False)
class SystemModel:
    """
    Discrete LTI plant x_{k+1} = A x_k + b u_k.

    Attributes:
        A: State matrix (n x n), per step
        b: Input vector (n), state change per step with the switch on
        T: Sample interval in seconds, used for time axes
        state_labels: Names of the state components
        params: Converter parameters the model was built from, if any
        omega_base: Angular base used for the per-unit sample interval
        positive_coupling: Whether A_c was built with +1/L in the (2,1) entry
    """

    A: Matrix
    b: Vector
    T: float = 1.0
    state_labels: Tuple[str, ...] = field(default=STATE_LABELS)
    params: Optional[ConverterParams] = None
    omega_base: Optional[float] = None
    positive_coupling: bool = False

    def __post_init__(self) -> None:
        A = as_matrix(self.A, "A", square=True)
        b = as_vector(self.b, "b")
        if b.shape[0] != A.shape[0]:
            raise ParameterError(f"b has length {b.shape[0]}, expected {A.shape[0]}")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if len(self.state_labels) != A.shape[0]:
            object.__setattr__(
                self, "state_labels", tuple(f"x{i}" for i in range(A.shape[0]))
            )

    @property
    def n(self) -> int:
        """State dimension."""
        return int(self.A.shape[0])

    @property
    def f_s(self) -> float:
        """Sampling frequency in hertz."""
        return 1.0 / self.T


def build_continuous(
    params: ConverterParams, positive_coupling: bool = False
) -> Tuple[Matrix, Vector]:
    """
    Continuous buck model with state (v_c, i_l).

    A_c = [[-1/(R C), 1/C], [-1/L, -r_l/L]], b_c = [0, V_s/L]. With
    ``positive_coupling`` the (2,1) entry is +1/L instead, which turns the
    plant into a saddle for any r_l < R and trips the Hurwitz check.

    Args:
        params: Converter parameters (SI or per-unit)
        positive_coupling: Build the (2,1) entry as +1/L

    Returns:
        Tuple[Matrix, Vector]: (A_c, b_c)

    Raises:
        StabilityError: If A_c is not Hurwitz (trace < 0 and det > 0)
    """
    L, C, r_l, R = params.L, params.C, params.r_l, params.R
    coupling = 1.0 / L if positive_coupling else -1.0 / L
    A_c = np.array([[-1.0 / (R * C), 1.0 / C], [coupling, -r_l / L]])
    b_c = np.array([0.0, params.V_s / L])

    trace = float(A_c[0, 0] + A_c[1, 1])
    det = float(A_c[0, 0] * A_c[1, 1] - A_c[0, 1] * A_c[1, 0])
    logger.debug(f"Continuous model: trace={trace:.6g}, det={det:.6g}")
    if not (trace < 0.0 and det > 0.0):
        raise StabilityError(
            f"continuous model is not Hurwitz (trace={trace:.6g}, det={det:.6g})"
        )
    return A_c, b_c


def to_per_unit(params: ConverterParams, bases: PerUnitBases) -> ConverterParams:
    """
    Normalize SI converter parameters.

    R and r_l divide by Z_base, V_s by V_base; L becomes omega_base L / Z_base
    and C becomes omega_base C Z_base.
    """
    if params.unit_system is not UnitSystem.SI:
        raise ParameterError("to_per_unit expects SI parameters")
    return ConverterParams(
        L=bases.omega_base * params.L / bases.Z_base,
        C=bases.omega_base * params.C * bases.Z_base,
        r_l=params.r_l / bases.Z_base,
        R=params.R / bases.Z_base,
        V_s=params.V_s / bases.V_base,
        unit_system=UnitSystem.PER_UNIT,
    )


def from_per_unit(params: ConverterParams, bases: PerUnitBases) -> ConverterParams:
    """Inverse of ``to_per_unit``."""
    if params.unit_system is not UnitSystem.PER_UNIT:
        raise ParameterError("from_per_unit expects per-unit parameters")
    return ConverterParams(
        L=params.L * bases.Z_base / bases.omega_base,
        C=params.C / (bases.omega_base * bases.Z_base),
        r_l=params.r_l * bases.Z_base,
        R=params.R * bases.Z_base,
        V_s=params.V_s * bases.V_base,
        unit_system=UnitSystem.SI,
    )


def discretize_plant(
    params: ConverterParams,
    f_s: float,
    omega_base: float = REFERENCE_BASES.omega_base,
    positive_coupling: bool = False,
) -> SystemModel:
    """
    Discretize the buck model at switching frequency ``f_s``.

    Per-unit parameters are stepped with T_pu = omega_base / f_s; SI parameters
    with T = 1 / f_s. The returned model records T = 1 / f_s seconds either way.

    Args:
        params: Converter parameters
        f_s: Sampling (switching decision) frequency in hertz
        omega_base: Angular base of the per-unit time axis
        positive_coupling: Passed to ``build_continuous``

    Returns:
        SystemModel: Discrete plant carrying its source parameters

    Raises:
        StabilityError: If A_c is not Hurwitz or rho(A) >= 1
    """
    if not (math.isfinite(f_s) and f_s > 0):
        raise ParameterError(f"f_s must be positive, got {f_s}")
    A_c, b_c = build_continuous(params, positive_coupling=positive_coupling)
    if params.unit_system is UnitSystem.PER_UNIT:
        step = omega_base / f_s
    else:
        step = 1.0 / f_s
    A, b = zoh_discretize(A_c, b_c, step)

    rho = spectral_radius(A)
    if rho >= 1.0:
        raise StabilityError(f"discrete plant is not stable (rho(A)={rho:.12g})")
    logger.debug(f"Discretized plant at f_s={f_s:g} Hz: step={step:.6g}, rho(A)={rho:.9f}")
    return SystemModel(
        A=A,
        b=b,
        T=1.0 / f_s,
        params=params,
        omega_base=omega_base,
        positive_coupling=positive_coupling,
    )


def rescale_load(model: SystemModel, factor: float) -> SystemModel:
    """
    Rebuild ``model`` with the load resistance scaled by ``factor``.

    Raises:
        ParameterError: If the model was not built from converter parameters
    """
    if model.params is None:
        raise ParameterError("load rescaling needs a model built from converter parameters")
    if not (math.isfinite(factor) and factor > 0):
        raise ParameterError(f"load scale factor must be positive, got {factor}")
    params = replace(model.params, R=model.params.R * factor)
    logger.info(f"Rebuilding plant with R={params.R:.6g} (x{factor:g})")
    return discretize_plant(
        params,
        model.f_s,
        omega_base=model.omega_base if model.omega_base is not None else 1.0,
        positive_coupling=model.positive_coupling,
    )


def model_from_matrices(A: ArrayLike, b: ArrayLike, T: float = 1.0) -> SystemModel:
    """Wrap a bare (A, b) pair as a ``SystemModel``."""
    return SystemModel(A=np.array(A, dtype=float), b=np.array(b, dtype=float), T=T)

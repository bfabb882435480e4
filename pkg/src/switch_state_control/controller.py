"""
Switch-state optimal on-off controller.

The plant x_{k+1} = A x_k + b u_k is driven by a binary input u in {0, 1};
z is the switch position held at the previous step and every transition
|u - z| = 1 costs beta. This module holds the problem data, the closed-form
quadratic value function of the symmetrized Bellman equation, the affine
switching function derived from it, and the hysteresis policy.

The synthesized value function solves the symmetrized problem

    V(x) = q(x) + 1/2 (beta + alpha V(A x) + alpha V(A x + b)),

not the original two-branch Bellman system; the oracle module measures how far
the resulting policy is from optimal on the original cost.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike

from .errors import DimensionError, NonConvergenceError, NumericalError, ParameterError
from .errors import SingularMatrixError
from .linalg import Matrix, Vector, as_matrix, as_vector, solve_discounted_lyapunov
from .linalg import solve_linear, spectral_radius
from .plant import SystemModel

logger = logging.getLogger(__name__)

# Random-state box (p.u.) used for the synthesis postconditions.
CHECK_BOX = 2.0
CHECK_STATES = 1000
BELLMAN_TOL = 1e-8
AFFINE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """
    Regulation problem for a binary-input plant.

    Attributes:
        model: Discrete plant
        Q: Symmetric positive semidefinite state-error weight
        r: Set point
        alpha: Discount factor in (0, 1)
        beta: Switch-transition penalty, strictly positive
        test_mode: Admit the degenerate alpha = 0 and beta = 0 cases
    """

    model: SystemModel
    Q: Matrix
    r: Vector
    alpha: float
    beta: float
    test_mode: bool = False

    def __post_init__(self) -> None:
        n = self.model.n
        Q = as_matrix(self.Q, "Q", square=True)
        r = as_vector(self.r, "r")
        if Q.shape != (n, n):
            raise DimensionError(f"Q has shape {Q.shape}, expected ({n}, {n})")
        if r.shape != (n,):
            raise DimensionError(f"r has length {r.shape[0]}, expected {n}")
        scale = max(1.0, float(np.max(np.abs(Q))))
        if np.max(np.abs(Q - Q.T)) > 1e-12 * scale:
            raise ParameterError("Q must be symmetric")
        if float(np.min(np.linalg.eigvalsh(Q))) < -1e-12 * scale:
            raise ParameterError("Q must be positive semidefinite")

        alpha_ok = (0.0 <= self.alpha < 1.0) if self.test_mode else (0.0 < self.alpha < 1.0)
        if not alpha_ok:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        beta_ok = self.beta >= 0.0 if self.test_mode else self.beta > 0.0
        if not beta_ok:
            raise ParameterError(f"beta must be positive, got {self.beta}")

        rho = spectral_radius(self.model.A)
        if self.alpha * rho * rho >= 1.0:
            raise NonConvergenceError(
                f"alpha*rho(A)^2 = {self.alpha * rho * rho:.6g} must be below 1"
            )
        Q.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "r", r)

    @property
    def A(self) -> Matrix:
        return self.model.A

    @property
    def b(self) -> Vector:
        return self.model.b


@dataclass(frozen=True, eq=False)
class ValueFunction:
    """
    Quadratic value function V(x) = (x - theta)^T P (x - theta) + v.

    ``alpha`` and ``beta`` record the problem the function was synthesized for;
    ``bellman_residual_max`` is the worst residual of the synthesis check, None
    for value functions built by hand.
    """

    P: Matrix
    theta: Vector
    v: float
    alpha: float
    beta: float
    bellman_residual_max: Optional[float] = None


@dataclass(frozen=True, eq=False)
class AffinePolicy:
    """
    Affine switching function f(x) = delta^T x + zeta with hysteresis thresholds.

    The switch is closed (u = 1) when f(x) <= (beta / alpha)(2 z - 1).
    """

    delta: Vector
    zeta: float
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise ParameterError(f"policy needs alpha > 0, got {self.alpha}")

    def f(self, x: ArrayLike) -> float:
        """Evaluate the switching function."""
        return float(np.dot(self.delta, x) + self.zeta)

    def threshold(self, z: int) -> float:
        """Turn-on threshold for previous switch state ``z``."""
        return (self.beta / self.alpha) * (2 * z - 1)


def _check_binary(name: str, value: int) -> None:
    if value not in (0, 1):
        raise ParameterError(f"{name} must be 0 or 1, got {value}")


def regulation_targets(h: ArrayLike, s: float) -> Tuple[Matrix, Vector]:
    """
    Weight and set point for regulating the scalar output y = h x to s.

    Returns:
        Tuple[Matrix, Vector]: Q = h^T h and r = h^T s / (h h^T)
    """
    h = as_vector(h, "h")
    norm_sq = float(h @ h)
    if norm_sq == 0.0:
        raise ParameterError("output row h must be nonzero")
    return np.outer(h, h), h * (s / norm_sq)


def quadratic_distance(spec: ProblemSpec, x: ArrayLike) -> float:
    """(x - r)^T Q (x - r)."""
    e = np.asarray(x, dtype=float) - spec.r
    return float(e @ spec.Q @ e)


def stage_cost(spec: ProblemSpec, x: ArrayLike, z: int, u: int) -> float:
    """Running cost q(x) + beta |u - z|."""
    return quadratic_distance(spec, x) + spec.beta * abs(u - z)


def value_eval(V: ValueFunction, x: ArrayLike) -> float:
    """Evaluate (x - theta)^T P (x - theta) + v."""
    d = np.asarray(x, dtype=float) - V.theta
    return float(d @ V.P @ d) + V.v


def _quadratic_part(V: ValueFunction, x: Vector) -> float:
    d = x - V.theta
    return float(d @ V.P @ d)


def f_direct(V: ValueFunction, model: SystemModel, x: ArrayLike) -> float:
    """
    Switching function evaluated from the value function: V(A x + b) - V(A x).

    The constant v cancels and is left out of both terms.
    """
    Ax = model.A @ np.asarray(x, dtype=float)
    return _quadratic_part(V, Ax + model.b) - _quadratic_part(V, Ax)


def _bellman_residuals(spec: ProblemSpec, V: ValueFunction, states: np.ndarray) -> np.ndarray:
    return np.array([bellman_residual(spec, V, x) for x in states])


def synthesize(spec: ProblemSpec) -> ValueFunction:
    """
    Closed-form quadratic value function of the symmetrized Bellman equation.

    P = Q + alpha A^T P A,
    theta = P^{-1} (I - alpha A^T)^{-1} (Q r - 1/2 alpha A^T P b),
    v = (r^T Q r + beta/2 + (alpha - 1) theta^T P theta
         + alpha/2 b^T P b - alpha b^T P theta) / (1 - alpha).

    The Bellman residual is checked at random states in [-2, 2]^n.

    Raises:
        SingularMatrixError: If P is not positive definite or I - alpha A^T is singular
        NonConvergenceError: If alpha * rho(A)^2 >= 1
        NumericalError: If the Bellman residual check fails
    """
    A, b, Q, r = spec.A, spec.b, spec.Q, spec.r
    alpha, beta = spec.alpha, spec.beta
    n = spec.model.n

    P = solve_discounted_lyapunov(A, Q, alpha)
    eigenvalues = np.linalg.eigvalsh(P)
    if float(eigenvalues[0]) <= 1e-14 * max(1.0, float(eigenvalues[-1])):
        raise SingularMatrixError(
            f"P is not positive definite (smallest eigenvalue {eigenvalues[0]:.3g})"
        )

    rhs = Q @ r - 0.5 * alpha * (A.T @ P @ b)
    theta = solve_linear(P, solve_linear(np.eye(n) - alpha * A.T, rhs))
    v = (
        float(r @ Q @ r)
        + 0.5 * beta
        + (alpha - 1.0) * float(theta @ P @ theta)
        + 0.5 * alpha * float(b @ P @ b)
        - alpha * float(b @ P @ theta)
    ) / (1.0 - alpha)
    V = ValueFunction(P=P, theta=theta, v=v, alpha=alpha, beta=beta)

    rng = np.random.default_rng(0)
    states = rng.uniform(-CHECK_BOX, CHECK_BOX, size=(CHECK_STATES, n))
    worst = float(np.max(np.abs(_bellman_residuals(spec, V, states))))
    if worst > BELLMAN_TOL:
        raise NumericalError(f"Bellman residual {worst:.3g} exceeds {BELLMAN_TOL:.3g}")
    logger.info(
        f"Synthesized value function: eig(P)={np.round(eigenvalues, 6).tolist()}, "
        f"theta={np.round(theta, 6).tolist()}, v={v:.6g}, max residual={worst:.3g}"
    )
    return replace(V, bellman_residual_max=worst)


def affine_coeffs(V: ValueFunction, model: SystemModel) -> AffinePolicy:
    """
    Coefficients of f(x) = V(A x + b) - V(A x) = delta^T x + zeta.

    Expanding the quadratic form gives delta = 2 A^T P b and
    zeta = b^T P b - 2 theta^T P b. Agreement with ``f_direct`` is checked at
    random states.
    """
    P, theta = V.P, V.theta
    A, b = model.A, model.b
    Pb = P @ b
    delta = 2.0 * (A.T @ Pb)
    zeta = float(b @ Pb) - 2.0 * float(theta @ Pb)
    pol = AffinePolicy(delta=delta, zeta=zeta, alpha=V.alpha, beta=V.beta)

    rng = np.random.default_rng(1)
    states = rng.uniform(-CHECK_BOX, CHECK_BOX, size=(CHECK_STATES, model.n))
    direct = np.array([f_direct(V, model, x) for x in states])
    gap = float(np.max(np.abs(direct - (states @ delta + zeta))))
    tol = AFFINE_TOL * max(1.0, float(np.max(np.abs(direct))))
    if gap > tol:
        raise NumericalError(f"affine switching function deviates by {gap:.3g}")
    return pol


def theta_form_coeffs(V: ValueFunction, model: SystemModel) -> Tuple[Vector, float]:
    """
    Variant coefficients with the roles of b and theta exchanged.

    delta' = -2 A^T P theta and zeta' = theta^T P theta - 2 b^T P theta. These do
    not reproduce f(x) in general; they are computed for the discrepancy report
    and never drive the policy.
    """
    P, theta = V.P, V.theta
    delta = -2.0 * (model.A.T @ P @ theta)
    zeta = float(theta @ P @ theta) - 2.0 * float(model.b @ P @ theta)
    return delta, zeta


def sliding_equilibrium(V: ValueFunction, model: SystemModel) -> Tuple[float, Vector]:
    """
    Steady operating point the closed loop chatters around.

    A constant duty d holds the plant at x_d = d (I - A)^{-1} b, where
    A x_d = x_d - d b. The switching surface f(x) = 2 (A x + b/2 - theta)^T P b
    vanishes on that line at

        d = (theta - b/2)^T P b / ((I - A)^{-1} b - b)^T P b.

    Neither beta nor v enters, so every transition penalty regulates toward the
    same point; with small thresholds the mean of the closed-loop state sits
    near x_d.

    Returns:
        Tuple[float, Vector]: (duty d, state x_d)

    Raises:
        SingularMatrixError: If I - A is singular or the surface is parallel to
            the steady-state line
    """
    A, b = model.A, model.b
    Pb = V.P @ b
    gain = solve_linear(np.eye(model.n) - A, b)
    slope = float((gain - b) @ Pb)
    if abs(slope) <= 1e-14 * max(1.0, float(np.linalg.norm(Pb))):
        raise SingularMatrixError("switching surface is parallel to the steady-state line")
    duty = float((V.theta - 0.5 * b) @ Pb) / slope
    return duty, duty * gain


def policy(pol: AffinePolicy, x: ArrayLike, z: int) -> int:
    """
    Hysteresis switching decision.

    u = 1 if delta^T x + zeta <= (beta / alpha)(2 z - 1), else 0; ties close
    the switch.
    """
    _check_binary("z", z)
    return 1 if pol.f(x) <= pol.threshold(z) else 0


def policy_direct(V: ValueFunction, spec: ProblemSpec, x: ArrayLike, z: int) -> int:
    """
    Switching decision from the two branches of the Bellman minimization.

    Compares beta z + alpha V(A x) (stay off) with beta (1 - z) + alpha V(A x + b)
    (turn on); q(x) is common to both and dropped. Ties close the switch.
    """
    _check_binary("z", z)
    Ax = spec.A @ np.asarray(x, dtype=float)
    off = spec.beta * z + spec.alpha * value_eval(V, Ax)
    on = spec.beta * (1 - z) + spec.alpha * value_eval(V, Ax + spec.b)
    return 1 if on <= off else 0


def modified_stage_cost(spec: ProblemSpec, V: ValueFunction, x: ArrayLike, z: int) -> float:
    """Symmetrizing stage cost q(x) + 1/2 |beta + (1 - 2 z) alpha f(x)|."""
    _check_binary("z", z)
    f = f_direct(V, spec.model, x)
    return quadratic_distance(spec, x) + 0.5 * abs(spec.beta + (1 - 2 * z) * spec.alpha * f)


def bellman_residual(spec: ProblemSpec, V: ValueFunction, x: ArrayLike) -> float:
    """V(x) - [q(x) + 1/2 (beta + alpha V(A x) + alpha V(A x + b))]."""
    x = np.asarray(x, dtype=float)
    Ax = spec.A @ x
    rhs = quadratic_distance(spec, x) + 0.5 * (
        spec.beta + spec.alpha * value_eval(V, Ax) + spec.alpha * value_eval(V, Ax + spec.b)
    )
    return value_eval(V, x) - rhs

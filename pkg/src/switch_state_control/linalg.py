"""
Small dense linear algebra for switch-state control.

Matrix exponential, zero-order-hold discretization, spectral radius, the
discounted Lyapunov solve and a guarded linear solve. Every function is pure and
works on plain ``numpy`` arrays; matrices are 2-D float arrays, vectors 1-D.
"""

import logging
import math
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    DimensionError,
    NonConvergenceError,
    NumericalError,
    ParameterError,
    SingularMatrixError,
)

logger = logging.getLogger(__name__)

Matrix = NDArray[np.float64]
Vector = NDArray[np.float64]

# Scaled argument norm bound for the Taylor stage of mat_exp.
_EXP_NORM_BOUND = 0.5
_EXP_MAX_TERMS = 30

CONDITION_LIMIT = 1e12
FIXED_POINT_TOL = 1e-14
FIXED_POINT_MAX_ITER = 1_000_000


def as_matrix(value: ArrayLike, name: str = "matrix", square: bool = False) -> Matrix:
    """
    Convert ``value`` to a finite 2-D float array.

    Args:
        value: Array-like input
        name: Name used in error messages
        square: Require a square matrix

    Returns:
        Matrix: A float64 copy of the input
    """
    arr = np.array(value, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} has non-finite entries")
    return arr


def as_vector(value: ArrayLike, name: str = "vector") -> Vector:
    """Convert ``value`` to a finite 1-D float array."""
    arr = np.array(value, dtype=float)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} has non-finite entries")
    return arr


def mat_exp(M: ArrayLike, t: float = 1.0) -> Matrix:
    """
    Matrix exponential e^{M t} by scaling and squaring.

    The argument is halved until its 1-norm is at most 0.5, the exponential of
    the scaled matrix is summed as a Taylor series until the next term no longer
    changes the sum in double precision, and the result is squared back. For the
    small matrices used here (at most 3x3 after augmentation) this reaches
    relative accuracy near machine precision.

    Args:
        M: Square matrix
        t: Time scale multiplying ``M``

    Returns:
        Matrix: e^{M t}
    """
    M = as_matrix(M, "M", square=True)
    if not math.isfinite(t):
        raise ParameterError(f"t must be finite, got {t}")

    X = M * t
    n = X.shape[0]
    norm = float(np.linalg.norm(X, 1))
    squarings = 0
    if norm > _EXP_NORM_BOUND:
        squarings = int(math.ceil(math.log2(norm / _EXP_NORM_BOUND)))
        X = X / (2.0**squarings)

    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, _EXP_MAX_TERMS + 1):
        term = term @ X / k
        result = result + term
        if np.linalg.norm(term, 1) <= np.finfo(float).eps * np.linalg.norm(result, 1):
            break

    for _ in range(squarings):
        result = result @ result
    return result


def zoh_discretize(A_c: ArrayLike, b_c: ArrayLike, T: float) -> Tuple[Matrix, Vector]:
    """
    Zero-order-hold discretization of x' = A_c x + b_c u.

    Uses the augmented exponential exp([[A_c, b_c], [0, 0]] T), whose top-left
    block is e^{A_c T} and whose top-right column is the held-input integral
    (int_0^T e^{A_c s} ds) b_c.

    Args:
        A_c: Continuous state matrix (n x n)
        b_c: Continuous input vector (n)
        T: Sample interval, strictly positive

    Returns:
        Tuple[Matrix, Vector]: Discrete pair (A, b)
    """
    A_c = as_matrix(A_c, "A_c", square=True)
    b_c = as_vector(b_c, "b_c")
    n = A_c.shape[0]
    if b_c.shape[0] != n:
        raise DimensionError(f"b_c has length {b_c.shape[0]}, expected {n}")
    if not (math.isfinite(T) and T > 0):
        raise ParameterError(f"sample interval must be positive, got {T}")

    augmented = np.zeros((n + 1, n + 1))
    augmented[:n, :n] = A_c
    augmented[:n, n] = b_c
    E = mat_exp(augmented, T)
    return E[:n, :n].copy(), E[:n, n].copy()


def spectral_radius(A: ArrayLike) -> float:
    """
    Largest eigenvalue magnitude of a square matrix.

    1x1 and 2x2 matrices are handled through the characteristic polynomial
    (trace and determinant); larger ones fall back to ``numpy.linalg.eigvals``.
    """
    A = as_matrix(A, "A", square=True)
    n = A.shape[0]
    if n == 1:
        return abs(float(A[0, 0]))
    if n == 2:
        tr = float(A[0, 0] + A[1, 1])
        det = float(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])
        disc = tr * tr - 4.0 * det
        if disc < 0.0:
            # complex pair, |lambda|^2 = det
            return math.sqrt(det)
        root = math.sqrt(disc)
        return max(abs(0.5 * (tr + root)), abs(0.5 * (tr - root)))
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def solve_linear(M: ArrayLike, y: ArrayLike) -> Vector:
    """
    Solve M x = y, refusing near-singular systems.

    Raises:
        SingularMatrixError: If the condition number exceeds ``CONDITION_LIMIT``
    """
    M = as_matrix(M, "M", square=True)
    y = as_vector(y, "y")
    if y.shape[0] != M.shape[0]:
        raise DimensionError(f"y has length {y.shape[0]}, expected {M.shape[0]}")

    with np.errstate(divide="ignore", invalid="ignore"):
        cond = float(np.linalg.cond(M))
    if not math.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularMatrixError(f"matrix is singular or near-singular (condition {cond:.3g})")

    x = np.linalg.solve(M, y)
    y_norm = float(np.linalg.norm(y))
    if y_norm > 0.0 and np.linalg.norm(M @ x - y) > 1e-10 * y_norm:
        raise SingularMatrixError("linear solve residual above tolerance")
    return x


def _check_lyapunov_inputs(A: Matrix, Q: Matrix, alpha: float) -> None:
    if A.shape != Q.shape:
        raise DimensionError(f"A has shape {A.shape} but Q has shape {Q.shape}")
    scale = max(1.0, float(np.max(np.abs(Q))))
    if np.max(np.abs(Q - Q.T)) > 1e-12 * scale:
        raise ParameterError("Q must be symmetric")
    if float(np.min(np.linalg.eigvalsh(Q))) < -1e-12 * scale:
        raise ParameterError("Q must be positive semidefinite")
    if not (0.0 <= alpha < 1.0):
        raise ParameterError(f"alpha must lie in [0, 1), got {alpha}")
    rho = spectral_radius(A)
    if alpha * rho * rho >= 1.0:
        raise NonConvergenceError(
            f"discounted series diverges: alpha*rho(A)^2 = {alpha * rho * rho:.6g} >= 1"
        )


def lyapunov_kronecker(A: ArrayLike, Q: ArrayLike, alpha: float) -> Matrix:
    """
    Direct solve of P = Q + alpha A^T P A via its vectorized form.

    (I - alpha A^T kron A^T) vec(P) = vec(Q), an n^2 x n^2 linear system.
    """
    A = as_matrix(A, "A", square=True)
    Q = as_matrix(Q, "Q", square=True)
    _check_lyapunov_inputs(A, Q, alpha)
    n = A.shape[0]
    system = np.eye(n * n) - alpha * np.kron(A.T, A.T)
    P = solve_linear(system, Q.reshape(-1)).reshape(n, n)
    return 0.5 * (P + P.T)


def lyapunov_fixed_point(
    A: ArrayLike,
    Q: ArrayLike,
    alpha: float,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = FIXED_POINT_MAX_ITER,
) -> Matrix:
    """
    Fixed-point iteration P <- Q + alpha A^T P A starting from P = Q.

    Stops when successive iterates differ by less than ``tol`` relative to
    max(1, |P|_inf).

    Raises:
        NonConvergenceError: If ``max_iter`` iterations are exhausted
    """
    A = as_matrix(A, "A", square=True)
    Q = as_matrix(Q, "Q", square=True)
    _check_lyapunov_inputs(A, Q, alpha)
    P = Q.copy()
    for iteration in range(1, max_iter + 1):
        P_next = Q + alpha * (A.T @ P @ A)
        change = float(np.max(np.abs(P_next - P)))
        P = P_next
        if change < tol * max(1.0, float(np.max(np.abs(P)))):
            logger.debug(f"Lyapunov fixed point converged after {iteration} iterations")
            return 0.5 * (P + P.T)
    raise NonConvergenceError(f"Lyapunov fixed point did not converge in {max_iter} iterations")


def solve_discounted_lyapunov(
    A: ArrayLike, Q: ArrayLike, alpha: float, cross_check: bool = True
) -> Matrix:
    """
    Solve the discounted Lyapunov equation P = Q + alpha A^T P A.

    The Kronecker solve is the primary result; the fixed-point iteration is run
    alongside as an independent check when ``cross_check`` is set.

    Args:
        A: Discrete state matrix
        Q: Symmetric positive semidefinite weight
        alpha: Discount factor with alpha * rho(A)^2 < 1
        cross_check: Also run the fixed-point iteration and compare

    Returns:
        Matrix: Symmetric positive semidefinite P

    Raises:
        NonConvergenceError: If alpha * rho(A)^2 >= 1
        ParameterError: If Q is not symmetric positive semidefinite
        NumericalError: If the residual or the cross-check fails
    """
    A = as_matrix(A, "A", square=True)
    Q = as_matrix(Q, "Q", square=True)
    P = lyapunov_kronecker(A, Q, alpha)
    scale = max(1.0, float(np.max(np.abs(P))))

    residual = float(np.max(np.abs(P - Q - alpha * (A.T @ P @ A))))
    if residual > 1e-12 * scale:
        raise NumericalError(f"Lyapunov residual {residual:.3g} above tolerance")

    if cross_check:
        P_iter = lyapunov_fixed_point(A, Q, alpha)
        gap = float(np.max(np.abs(P_iter - P)))
        if gap > 1e-10 * scale:
            raise NumericalError(f"Lyapunov solvers disagree by {gap:.3g}")
    return P

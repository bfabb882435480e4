"""
Ground-truth machinery for judging the closed-form policy.

Two independent references on the original (unmodified) cost:

- exhaustive search over all 2^N binary input sequences of a truncated
  horizon, in lexicographic order or in Gray-code order with prefix reuse;
- value iteration of the exact two-branch Bellman operator on a state grid
  with multilinear interpolation of off-grid successors.

Both report how far the affine policy is from optimal; neither asserts a bound.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy.interpolate import RegularGridInterpolator

from .controller import AffinePolicy, ProblemSpec, policy, stage_cost
from .errors import NonConvergenceError, ParameterError
from .linalg import Matrix, Vector, as_vector
from .plant import SystemModel

logger = logging.getLogger(__name__)

MAX_HORIZON = 20
MAX_AGREEMENT_HORIZON = 16
MAX_ROLLOUT = 1_000_000
MIN_GRID_RESOLUTION = 11
ENUMERATION_ORDERS = ("naive", "gray")


@dataclass(frozen=True)
class HorizonResult:
    """
    Exhaustive optimum of the N-step discounted cost.

    Attributes:
        best_sequence: Optimal inputs, lexicographically smallest among ties
        best_cost: Optimal truncated cost
        best_cost_by_first_action: Best cost with u_0 fixed to 0 and to 1
        max_stage_cost: Largest stage cost along the optimal trajectory
        policy_cost: Truncated cost of the affine policy, when compared
    """

    best_sequence: Tuple[int, ...]
    best_cost: float
    best_cost_by_first_action: Tuple[float, float]
    max_stage_cost: float
    policy_cost: Optional[float] = None

    @property
    def gap(self) -> Optional[float]:
        """policy_cost - best_cost."""
        if self.policy_cost is None:
            return None
        return self.policy_cost - self.best_cost


@dataclass(frozen=True)
class AgreementReport:
    """
    First-action agreement between the affine policy and exhaustive search.

    ``fraction`` counts a sample as agreeing when the policy's first action
    attains the optimal truncated cost; ``strict_fraction`` requires it to equal
    the first action of the lexicographic optimum.
    """

    fraction: float
    strict_fraction: float
    horizon: int
    tail_bound: float
    samples: int


@dataclass
class GridValue:
    """
    Result of value iteration on a rectangular grid.

    ``V`` and ``policy`` are indexed as [z, i_0, i_1, ...].
    """

    axes: Tuple[np.ndarray, ...]
    box: Tuple[Tuple[float, float], ...]
    resolution: int
    V: np.ndarray
    policy: np.ndarray
    sweeps: int
    history: List[float] = field(default_factory=list)
    clamped_successor_count: int = 0
    converged: bool = False

    @property
    def V0_grid(self) -> np.ndarray:
        return self.V[0]

    @property
    def V1_grid(self) -> np.ndarray:
        return self.V[1]

    @property
    def policy_grid(self) -> np.ndarray:
        return self.policy

    def nodes(self) -> np.ndarray:
        """Grid nodes as an (M, n) array in C order."""
        return _grid_nodes(self.axes)

    def contraction_ratios(self) -> np.ndarray:
        """Ratios of successive sup-norm changes."""
        h = np.asarray(self.history, dtype=float)
        if h.size < 2:
            return np.empty(0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return h[1:] / h[:-1]

    def hysteresis_violations(self) -> int:
        """Nodes where the switch closes from z = 0 but not from z = 1."""
        return int(np.sum((self.policy[0] == 1) & (self.policy[1] == 0)))


def _grid_nodes(axes: Sequence[np.ndarray]) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _advance(A: Matrix, b: Vector, x: Vector, u: int) -> Vector:
    return A @ x + b * u


def _discounts(alpha: float, N: int) -> List[float]:
    out = []
    d = 1.0
    for _ in range(N):
        out.append(d)
        d *= alpha
    return out


def _check_start(model: SystemModel, x0: ArrayLike, z0: int) -> Vector:
    x = as_vector(x0, "x0")
    if x.shape[0] != model.n:
        raise ParameterError(f"x0 has length {x.shape[0]}, expected {model.n}")
    if z0 not in (0, 1):
        raise ParameterError(f"z0 must be 0 or 1, got {z0}")
    return x


def _bits(g: int, N: int) -> List[int]:
    """Sequence encoded by ``g`` with u_0 in the most significant bit."""
    return [(g >> (N - 1 - k)) & 1 for k in range(N)]


def _enumerate_naive(
    model: SystemModel, spec: ProblemSpec, x0: Vector, z0: int, N: int, disc: List[float]
) -> Tuple[int, float, List[float]]:
    A, b = model.A, model.b
    best_g, best = 0, math.inf
    by_first = [math.inf, math.inf]
    for g in range(1 << N):
        x, z, J = x0, z0, 0.0
        for k, u in enumerate(_bits(g, N)):
            J = J + disc[k] * stage_cost(spec, x, z, u)
            x = _advance(A, b, x, u)
            z = u
        first = g >> (N - 1)
        by_first[first] = min(by_first[first], J)
        if J < best:
            best_g, best = g, J
    return best_g, best, by_first


def _enumerate_gray(
    model: SystemModel, spec: ProblemSpec, x0: Vector, z0: int, N: int, disc: List[float]
) -> Tuple[int, float, List[float]]:
    A, b = model.A, model.b
    seq = [0] * N
    xs: List[Vector] = [x0] + [x0] * N
    Js = [0.0] * (N + 1)

    def replay(start: int) -> None:
        for k in range(start, N):
            z = z0 if k == 0 else seq[k - 1]
            Js[k + 1] = Js[k] + disc[k] * stage_cost(spec, xs[k], z, seq[k])
            xs[k + 1] = _advance(A, b, xs[k], seq[k])

    replay(0)
    best_g, best = 0, Js[N]
    by_first = [math.inf, math.inf]
    by_first[0] = Js[N]
    g_prev = 0
    for i in range(1, 1 << N):
        g = i ^ (i >> 1)
        k = N - (g ^ g_prev).bit_length()
        seq[k] ^= 1
        replay(k)
        J = Js[N]
        first = seq[0]
        by_first[first] = min(by_first[first], J)
        if J < best or (J == best and g < best_g):
            best_g, best = g, J
        g_prev = g
    return best_g, best, by_first


def brute_force(
    model: SystemModel,
    spec: ProblemSpec,
    x0: ArrayLike,
    z0: int,
    N: int,
    order: str = "naive",
) -> HorizonResult:
    """
    Exact minimum of sum_{k<N} alpha^k c(x_k, z_k, u_k) over all 2^N sequences.

    Both orders evaluate each sequence with the same state update and the same
    prefix-sum accumulation, so they return identical costs and, under the
    lexicographic tie rule, identical sequences.

    Args:
        model: Plant
        spec: Problem data
        x0: Initial state
        z0: Initial switch state
        N: Horizon, 1 <= N <= 20
        order: ``naive`` (lexicographic) or ``gray`` (Gray code, prefix reuse)

    Raises:
        ParameterError: If N is outside [1, 20] or ``order`` is unknown
    """
    x = _check_start(model, x0, z0)
    if not 1 <= N <= MAX_HORIZON:
        raise ParameterError(f"horizon must lie in [1, {MAX_HORIZON}], got {N}")
    if order not in ENUMERATION_ORDERS:
        raise ParameterError(f"unknown enumeration order '{order}'")

    disc = _discounts(spec.alpha, N)
    enumerate_fn = _enumerate_gray if order == "gray" else _enumerate_naive
    best_g, best, by_first = enumerate_fn(model, spec, x, z0, N, disc)
    logger.debug(f"enumerated {1 << N} sequences ({order}), best cost {best:.12g}")

    best_sequence = tuple(_bits(best_g, N))
    worst = 0.0
    xk, zk = x, z0
    for u in best_sequence:
        worst = max(worst, stage_cost(spec, xk, zk, u))
        xk = _advance(model.A, model.b, xk, u)
        zk = u
    return HorizonResult(
        best_sequence=best_sequence,
        best_cost=best,
        best_cost_by_first_action=(by_first[0], by_first[1]),
        max_stage_cost=worst,
    )


def rollout(
    model: SystemModel, spec: ProblemSpec, pol: AffinePolicy, x0: ArrayLike, z0: int, N: int
) -> Tuple[float, Tuple[int, ...]]:
    """Truncated cost and input sequence of the affine policy over N steps."""
    x = _check_start(model, x0, z0)
    if not 0 <= N <= MAX_ROLLOUT:
        raise ParameterError(f"rollout horizon must lie in [0, {MAX_ROLLOUT}], got {N}")
    disc = _discounts(spec.alpha, N)
    z, J = z0, 0.0
    inputs = []
    for k in range(N):
        u = policy(pol, x, z)
        J = J + disc[k] * stage_cost(spec, x, z, u)
        x = _advance(model.A, model.b, x, u)
        z = u
        inputs.append(u)
    return J, tuple(inputs)


def rollout_cost(
    model: SystemModel, spec: ProblemSpec, pol: AffinePolicy, x0: ArrayLike, z0: int, N: int
) -> float:
    """Truncated discounted cost of the trajectory the affine policy generates."""
    return rollout(model, spec, pol, x0, z0, N)[0]


def compare_horizon(
    model: SystemModel,
    spec: ProblemSpec,
    pol: AffinePolicy,
    x0: ArrayLike,
    z0: int,
    N: int,
    order: str = "gray",
) -> HorizonResult:
    """``brute_force`` with the policy's rollout cost filled in."""
    result = brute_force(model, spec, x0, z0, N, order=order)
    return HorizonResult(
        best_sequence=result.best_sequence,
        best_cost=result.best_cost,
        best_cost_by_first_action=result.best_cost_by_first_action,
        max_stage_cost=result.max_stage_cost,
        policy_cost=rollout_cost(model, spec, pol, x0, z0, N),
    )


def first_action_agreement(
    model: SystemModel,
    spec: ProblemSpec,
    pol: AffinePolicy,
    sample_states: Iterable[ArrayLike],
    z_values: Sequence[int] = (0, 1),
    N: int = 12,
    order: str = "gray",
) -> AgreementReport:
    """
    Share of sampled (x, z) where the policy's first action is optimal over N steps.

    The report carries the discount tail bound alpha^N c_max / (1 - alpha),
    with c_max the largest stage cost seen along the optimal trajectories, so
    the truncation error can be judged next to the fraction.
    """
    if not 1 <= N <= MAX_AGREEMENT_HORIZON:
        raise ParameterError(f"horizon must lie in [1, {MAX_AGREEMENT_HORIZON}], got {N}")
    hits = strict_hits = total = 0
    c_max = 0.0
    for x in sample_states:
        for z in z_values:
            result = brute_force(model, spec, x, z, N, order=order)
            u = policy(pol, x, z)
            tol = 1e-12 * max(1.0, abs(result.best_cost))
            if result.best_cost_by_first_action[u] <= result.best_cost + tol:
                hits += 1
            if u == result.best_sequence[0]:
                strict_hits += 1
            c_max = max(c_max, result.max_stage_cost)
            total += 1
    if total == 0:
        raise ParameterError("no sample states given")
    tail = spec.alpha**N * c_max / (1.0 - spec.alpha)
    logger.info(f"First-action agreement {hits}/{total} at N={N}, tail bound {tail:.6g}")
    return AgreementReport(
        fraction=hits / total,
        strict_fraction=strict_hits / total,
        horizon=N,
        tail_bound=tail,
        samples=total,
    )


def grid_value_iteration(
    model: SystemModel,
    spec: ProblemSpec,
    box: Sequence[Tuple[float, float]],
    resolution: int,
    max_sweeps: int = 1000,
    tol: float = 1e-9,
) -> GridValue:
    """
    Value iteration of the exact Bellman operator on a grid.

    V_{i+1}(x, z) = min_u {q(x) + beta |u - z| + alpha V_i(A x + b u, u)},
    starting from V_0 = 0, with multilinear interpolation of V_i between grid
    nodes. Successors outside the box are clamped to its boundary and counted.

    Args:
        model: Plant
        spec: Problem data
        box: (low, high) per state dimension
        resolution: Points per axis, at least 11
        max_sweeps: Sweep limit
        tol: Stop once the sup-norm change drops below this

    Returns:
        GridValue: Value grids, greedy policy grids and the sweep history

    Raises:
        NonConvergenceError: If the sup-norm change grows over five consecutive sweeps
    """
    n = model.n
    if len(box) != n:
        raise ParameterError(f"box has {len(box)} intervals, expected {n}")
    if resolution < MIN_GRID_RESOLUTION:
        raise ParameterError(f"resolution must be at least {MIN_GRID_RESOLUTION}")
    if max_sweeps < 1:
        raise ParameterError("max_sweeps must be positive")
    bounds = tuple((float(lo), float(hi)) for lo, hi in box)
    for lo, hi in bounds:
        if not lo < hi:
            raise ParameterError(f"empty box interval [{lo}, {hi}]")

    axes = tuple(np.linspace(lo, hi, resolution) for lo, hi in bounds)
    shape = (resolution,) * n
    points = _grid_nodes(axes)
    lows = np.array([lo for lo, _ in bounds])
    highs = np.array([hi for _, hi in bounds])

    err = points - spec.r
    q = np.einsum("ij,jk,ik->i", err, spec.Q, err)
    succ_off = points @ model.A.T
    succ_on = succ_off + model.b
    clamped_off = np.clip(succ_off, lows, highs)
    clamped_on = np.clip(succ_on, lows, highs)
    clamped = int(np.sum(np.any(clamped_off != succ_off, axis=1)))
    clamped += int(np.sum(np.any(clamped_on != succ_on, axis=1)))
    if clamped:
        logger.warning(f"{clamped} grid successors fall outside the box and were clamped")

    alpha, beta = spec.alpha, spec.beta

    def successor_values(V: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        off = RegularGridInterpolator(axes, V[0].reshape(shape))(clamped_off)
        on = RegularGridInterpolator(axes, V[1].reshape(shape))(clamped_on)
        return off, on

    V = np.zeros((2, points.shape[0]))
    history: List[float] = []
    converged = False
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        off, on = successor_values(V)
        V_new = np.empty_like(V)
        V_new[0] = np.minimum(q + alpha * off, q + beta + alpha * on)
        V_new[1] = np.minimum(q + beta + alpha * off, q + alpha * on)
        change = float(np.max(np.abs(V_new - V)))
        history.append(change)
        V = V_new
        if sweep % 50 == 0:
            logger.debug(f"sweep {sweep}: sup-norm change {change:.3g}")
        if len(history) >= 6 and all(history[-i] > history[-i - 1] for i in range(1, 6)):
            raise NonConvergenceError(
                f"value iteration is not contracting (change {change:.3g} at sweep {sweep})"
            )
        if change < tol:
            converged = True
            break

    off, on = successor_values(V)
    d = alpha * (on - off)
    greedy = np.stack([d <= -beta, d <= beta]).astype(np.int8)
    logger.info(
        f"Value iteration finished after {sweep} sweeps "
        f"(change {history[-1]:.3g}, converged={converged})"
    )
    return GridValue(
        axes=axes,
        box=bounds,
        resolution=resolution,
        V=V.reshape((2,) + shape),
        policy=greedy.reshape((2,) + shape),
        sweeps=sweep,
        history=history,
        clamped_successor_count=clamped,
        converged=converged,
    )


def grid_policy_agreement(grid: GridValue, pol: AffinePolicy) -> float:
    """Share of (node, z) pairs where the greedy grid policy equals the affine policy."""
    points = grid.nodes()
    f = points @ pol.delta + pol.zeta
    matches = 0
    for z in (0, 1):
        affine_on = (f <= pol.threshold(z)).astype(np.int8)
        matches += int(np.sum(affine_on == grid.policy[z].reshape(-1)))
    return matches / (2 * points.shape[0])

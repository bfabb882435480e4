"""
Tests for exhaustive search and grid value iteration.
"""

import itertools
import unittest
from unittest.mock import patch

import numpy as np

from switch_state_control.controller import AffinePolicy, ProblemSpec, affine_coeffs
from switch_state_control.controller import quadratic_distance, synthesize
from switch_state_control.errors import NonConvergenceError, ParameterError
from switch_state_control.oracle import (
    brute_force,
    compare_horizon,
    first_action_agreement,
    grid_policy_agreement,
    grid_value_iteration,
    rollout,
)
from switch_state_control.plant import REFERENCE_FS_HZ, REFERENCE_PU, discretize_plant
from switch_state_control.plant import model_from_matrices

REFERENCE_MODEL = discretize_plant(REFERENCE_PU, REFERENCE_FS_HZ)
BUCK_BOX = ((-0.5, 1.5), (-1.5, 2.5))


def buck_design(beta=0.025):
    spec = ProblemSpec(
        model=REFERENCE_MODEL, Q=[[1.0, 0.0], [0.0, 0.0]], r=[0.4, 0.0], alpha=0.9999, beta=beta
    )
    return spec, affine_coeffs(synthesize(spec), REFERENCE_MODEL)


def scalar_design(beta=2.0):
    model = model_from_matrices([[0.5]], [1.0])
    spec = ProblemSpec(model=model, Q=[[1.0]], r=[0.0], alpha=0.5, beta=beta)
    return model, spec, affine_coeffs(synthesize(spec), model)


class TestBruteForce(unittest.TestCase):
    """Tests for exhaustive search."""

    def test_single_step_stays_open(self):
        model, spec, _ = scalar_design()
        result = brute_force(model, spec, [-5.0], 0, 1)
        self.assertEqual(result.best_sequence, (0,))
        self.assertAlmostEqual(result.best_cost, 25.0)
        self.assertEqual(result.best_cost_by_first_action, (25.0, 27.0))
        self.assertIsNone(result.gap)

    def test_prohibitive_penalty(self):
        model, spec, _ = scalar_design(beta=1e9)
        result = brute_force(model, spec, [-5.0], 0, 8)
        self.assertEqual(result.best_sequence, (0,) * 8)

    def test_orders_agree(self):
        """Lexicographic and Gray-code enumeration return the same optimum."""
        spec, _ = buck_design()
        rng = np.random.default_rng(4)
        for x in rng.uniform(-0.5, 1.0, size=(5, 2)):
            for z in (0, 1):
                naive = brute_force(REFERENCE_MODEL, spec, x, z, 8, order="naive")
                gray = brute_force(REFERENCE_MODEL, spec, x, z, 8, order="gray")
                self.assertEqual(naive.best_sequence, gray.best_sequence)
                self.assertEqual(naive.best_cost, gray.best_cost)
                self.assertEqual(naive.best_cost_by_first_action, gray.best_cost_by_first_action)

    def test_argument_guards(self):
        model, spec, _ = scalar_design()
        for N in (0, 21):
            with self.assertRaises(ParameterError):
                brute_force(model, spec, [0.0], 0, N)
        with self.assertRaises(ParameterError):
            brute_force(model, spec, [0.0], 0, 3, order="random")
        with self.assertRaises(ParameterError):
            brute_force(model, spec, [0.0, 0.0], 0, 3)
        with self.assertRaises(ParameterError):
            brute_force(model, spec, [0.0], 2, 3)


class TestRollout(unittest.TestCase):
    """Tests for policy rollouts against the optimum."""

    def test_empty_horizon(self):
        model, spec, pol = scalar_design()
        self.assertEqual(rollout(model, spec, pol, [1.0], 0, 0), (0.0, ()))
        with self.assertRaises(ParameterError):
            rollout(model, spec, pol, [1.0], 0, -1)

    def test_policy_never_beats_optimum(self):
        spec, pol = buck_design()
        rng = np.random.default_rng(5)
        states = rng.uniform(-0.5, 1.5, size=(100, 2))
        for x, z in zip(states, rng.integers(0, 2, size=100)):
            result = compare_horizon(REFERENCE_MODEL, spec, pol, x, int(z), 12)
            self.assertGreaterEqual(result.gap, -1e-12)

    def test_zero_gap_when_switching_is_prohibitive(self):
        model, spec, pol = scalar_design(beta=1e9)
        result = compare_horizon(model, spec, pol, [-5.0], 0, 10)
        self.assertEqual(result.gap, 0.0)
        self.assertEqual(rollout(model, spec, pol, [-5.0], 0, 10)[1], (0,) * 10)


class TestAgreement(unittest.TestCase):
    """Tests for first-action agreement."""

    def test_degenerate_problem_always_agrees(self):
        """With zero costs every first action is optimal, though not lexicographically first."""
        model = model_from_matrices([[0.5]], [1.0])
        spec = ProblemSpec(model=model, Q=[[0.0]], r=[0.0], alpha=0.5, beta=0.0, test_mode=True)
        pol = AffinePolicy(delta=np.array([1.0]), zeta=0.0, alpha=0.5, beta=0.0)
        report = first_action_agreement(model, spec, pol, [[-1.0], [1.0]], N=4)
        self.assertEqual(report.fraction, 1.0)
        self.assertEqual(report.strict_fraction, 0.5)
        self.assertEqual(report.samples, 4)
        self.assertEqual(report.tail_bound, 0.0)

    def test_buck_agreement_is_reported(self):
        spec, pol = buck_design()
        report = first_action_agreement(REFERENCE_MODEL, spec, pol, [[0.0, 0.0], [0.6, 0.0]], N=6)
        self.assertGreaterEqual(report.fraction, report.strict_fraction)
        self.assertLessEqual(report.fraction, 1.0)
        self.assertGreater(report.tail_bound, 0.0)

    def test_argument_guards(self):
        model, spec, pol = scalar_design()
        with self.assertRaises(ParameterError):
            first_action_agreement(model, spec, pol, [], N=4)
        with self.assertRaises(ParameterError):
            first_action_agreement(model, spec, pol, [[0.0]], N=17)


class TestGridValueIteration(unittest.TestCase):
    """Tests for value iteration on a grid."""

    def setUp(self):
        """Set up an uncontrolled constant plant with a known value."""
        self.model = model_from_matrices(np.zeros((2, 2)), [0.0, 0.0])
        self.spec = ProblemSpec(
            model=self.model, Q=np.eye(2), r=[0.3, -0.2], alpha=0.5, beta=1.0
        )
        self.box = ((-1.0, 1.0), (-1.0, 1.0))

    def test_myopic_single_sweep(self):
        spec = ProblemSpec(
            model=self.model, Q=np.eye(2), r=[0.3, -0.2], alpha=0.0, beta=1.0, test_mode=True
        )
        grid = grid_value_iteration(self.model, spec, self.box, 11, max_sweeps=1)
        q = np.array([quadratic_distance(spec, x) for x in grid.nodes()])
        np.testing.assert_allclose(grid.V0_grid.reshape(-1), q)
        np.testing.assert_allclose(grid.V1_grid.reshape(-1), q)
        self.assertEqual(grid.sweeps, 1)

    def test_closed_form_value(self):
        """V(x, z) = q(x) + alpha q(0) / (1 - alpha) = q(x) + 0.13."""
        grid = grid_value_iteration(self.model, self.spec, self.box, 11)
        self.assertTrue(grid.converged)
        self.assertEqual(grid.clamped_successor_count, 0)
        q = np.array([quadratic_distance(self.spec, x) for x in grid.nodes()])
        np.testing.assert_allclose(grid.V0_grid.reshape(-1), q + 0.13, atol=1e-8)
        np.testing.assert_allclose(grid.V1_grid.reshape(-1), q + 0.13, atol=1e-8)
        self.assertTrue(np.all(grid.policy_grid[0] == 0))
        self.assertTrue(np.all(grid.policy_grid[1] == 1))
        pol = AffinePolicy(delta=np.zeros(2), zeta=0.0, alpha=0.5, beta=1.0)
        self.assertEqual(grid_policy_agreement(grid, pol), 1.0)

    def test_buck_sweeps_contract(self):
        spec, pol = buck_design()
        with self.assertLogs("switch_state_control.oracle", level="INFO"):
            grid = grid_value_iteration(REFERENCE_MODEL, spec, BUCK_BOX, 11, max_sweeps=10)
        self.assertEqual(grid.sweeps, 10)
        self.assertFalse(grid.converged)
        self.assertTrue(np.all(grid.contraction_ratios() <= spec.alpha + 0.01))
        self.assertEqual(grid.hysteresis_violations(), 0)
        self.assertGreaterEqual(grid_policy_agreement(grid, pol), 0.0)

    def test_growing_changes_abort(self):
        calls = itertools.count(1)

        def growing_interpolator(axes, values):
            scale = 10.0 ** next(calls)
            return lambda points: np.full(len(points), scale)

        with patch(
            "switch_state_control.oracle.RegularGridInterpolator", side_effect=growing_interpolator
        ):
            with self.assertRaises(NonConvergenceError):
                grid_value_iteration(self.model, self.spec, self.box, 11, max_sweeps=20)

    def test_argument_guards(self):
        with self.assertRaises(ParameterError):
            grid_value_iteration(self.model, self.spec, self.box, 10)
        with self.assertRaises(ParameterError):
            grid_value_iteration(self.model, self.spec, ((-1.0, 1.0),), 11)
        with self.assertRaises(ParameterError):
            grid_value_iteration(self.model, self.spec, ((1.0, -1.0), (-1.0, 1.0)), 11)
        with self.assertRaises(ParameterError):
            grid_value_iteration(self.model, self.spec, self.box, 11, max_sweeps=0)


if __name__ == "__main__":
    unittest.main()

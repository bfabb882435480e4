"""
Tests for presets, sweeps and summary reports.
"""

import sys
import unittest
from unittest.mock import patch

import numpy as np

from switch_state_control.errors import MetricsError, ParameterError, SingularMatrixError
from switch_state_control.errors import StabilityError
from switch_state_control.plotting import plot_trace
from switch_state_control.report import build_summary, claims_block, synthesis_summary
from switch_state_control.scenarios import (
    PREROLL_STEPS,
    PRESETS,
    build_problem,
    design,
    effective_weights,
    preset_config,
    run_preset,
    sweep_beta,
)
from switch_state_control.utils.config_loader import apply_overrides, load_reference_config
from switch_state_control.utils.config_loader import parse_document, reference_document


def reference_with(*overrides):
    return parse_document(apply_overrides(reference_document(), list(overrides)))


class TestProblemConstruction(unittest.TestCase):
    """Tests for weights and problem construction."""

    def test_si_weights_scale_to_per_unit(self):
        Q, beta = effective_weights(load_reference_config())
        np.testing.assert_allclose(Q, [[1.0, 0.0], [0.0, 0.0]])
        self.assertAlmostEqual(beta, 0.025)

    def test_per_unit_weights_pass_through(self):
        Q, beta = effective_weights(reference_with("controller.weight_units=pu"))
        np.testing.assert_allclose(Q, [[1.0, 0.0], [0.0, 0.0]])
        self.assertEqual(beta, 10.0)

    def test_si_current_weight(self):
        Q, _ = effective_weights(reference_with("controller.Q=[[1.0,0.0],[0.0,1.0]]"))
        np.testing.assert_allclose(Q, [[1.0, 0.0], [0.0, 1.0 / 81.0]])

    def test_reference_problem(self):
        model, spec = build_problem(load_reference_config())
        np.testing.assert_allclose(spec.r, [0.4, 0.0])
        self.assertAlmostEqual(model.T, 5e-5)
        self.assertIs(spec.model, model)

    def test_literal_signs_fail_the_stability_gate(self):
        with self.assertRaises(StabilityError):
            design(load_reference_config(), literal_signs=True)


class TestPresets(unittest.TestCase):
    """Tests for the named experiments."""

    def test_known_presets(self):
        self.assertEqual(
            set(PRESETS),
            {
                "startup",
                "load-increase",
                "load-increase-current",
                "load-decrease",
                "steady-state",
                "noise-low",
                "noise-high",
            },
        )
        self.assertEqual(preset_config("noise-high").sim.noise_amplitude, 0.3)
        self.assertEqual(preset_config("load-increase").sim.events[0].factor, 1.3)
        with self.assertRaises(ParameterError):
            preset_config("brownout")

    def test_startup_closes_the_switch(self):
        result = run_preset("startup", ["sim.steps=200"])
        self.assertEqual(len(result.trace), 200)
        self.assertEqual(result.trace.rows[0].u, 1)
        self.assertIsNotNone(result.metrics)
        self.assertIsNone(result.preroll)

    def test_empty_run_reports_metrics_error(self):
        result = run_preset("startup", ["sim.steps=0"])
        self.assertIsNone(result.metrics)
        self.assertIn("empty", result.metrics_error)
        summary = build_summary(result).to_dict()
        self.assertIsNone(summary["metrics"])
        self.assertEqual(summary["claims"], {})

    def test_load_decrease_continues_from_preroll(self):
        result = run_preset("load-decrease")
        self.assertEqual(result.preroll["steps"], PREROLL_STEPS)
        self.assertEqual(result.preroll["events"], [{"at_step": 800, "load_scale": 1.3}])
        self.assertEqual(result.trace.rows[0].x, tuple(result.preroll["final_state"]))
        self.assertEqual(result.trace.rows[0].z, result.preroll["final_z"])

    def test_steady_state_preroll(self):
        result = run_preset("steady-state", ["sim.steps=100"])
        self.assertEqual(result.preroll["events"], [])
        self.assertNotEqual(result.trace.rows[0].x, (0.0, 0.0))


class TestSweepBeta(unittest.TestCase):
    """Tests for the transition-penalty sweep."""

    def test_rows_keep_input_order(self):
        base = reference_with("sim.steps=200")
        values = [40.0, 1.0, 10.0]
        serial = sweep_beta(values, base)
        parallel = sweep_beta(values, base, max_workers=3)
        self.assertEqual([row.beta for row in parallel], values)
        self.assertEqual(serial, parallel)

    def test_rejects_bad_values(self):
        base = load_reference_config()
        with self.assertRaises(ParameterError):
            sweep_beta([], base)
        with self.assertRaises(ParameterError):
            sweep_beta([1.0, -1.0], base)

    def test_larger_penalty_trades_switching_for_ripple(self):
        rows = sweep_beta([1.0, 10.0, 100.0], load_reference_config())
        counts = [row.switch_count for row in rows]
        ripples = [row.ripple_pp for row in rows]
        self.assertEqual(counts, sorted(counts, reverse=True))
        self.assertEqual(ripples, sorted(ripples))
        self.assertEqual(counts, [1400, 711, 152])
        for ripple, expected in zip(ripples, (0.00775, 0.01025, 0.16968)):
            self.assertAlmostEqual(ripple, expected, delta=2e-4)

    def test_every_penalty_settles_below_the_band(self):
        """The tail mean follows the operating point at v = 0.3688, not the set point."""
        rows = sweep_beta([1.0, 10.0, 100.0], load_reference_config())
        for row, expected in zip(rows, (0.37393, 0.37985, 0.36615)):
            self.assertAlmostEqual(row.mean_tail_v, expected, delta=5e-4)
            self.assertLess(abs(row.mean_tail_v - 0.368821), 0.015)
            self.assertLess(row.mean_tail_v, 0.4 * 0.98)
            self.assertIsNone(row.settling_time)

    def test_failure_names_the_penalty(self):
        base = reference_with("sim.steps=0")
        with self.assertLogs("switch_state_control.scenarios", level="WARNING"):
            with self.assertRaises(MetricsError) as ctx:
                sweep_beta([2.0], base)
        self.assertIn("beta=2", str(ctx.exception))


class TestReports(unittest.TestCase):
    """Tests for summary reports."""

    def test_summary_blocks(self):
        result = run_preset("startup", ["sim.steps=200"])
        summary = build_summary(result).to_dict()
        self.assertEqual(len(summary["config_hash"]), 64)
        self.assertEqual(summary["generator"], "numpy.random.PCG64")
        self.assertAlmostEqual(summary["weights"]["beta_effective"], 0.025)
        coupling = summary["discrepancies"]["positive_coupling"]
        self.assertFalse(coupling["hurwitz"])
        self.assertLess(coupling["det"], 0.0)
        self.assertIsInstance(summary["discrepancies"]["theta_form"]["agrees"], bool)
        self.assertIn("settling_time_s", summary["claims"])
        self.assertIn("on_until_band_entry", summary["claims"])
        self.assertNotIn("frequency_change", summary["claims"])

    def test_load_presets_report_frequency_change(self):
        result = run_preset("load-increase", ["sim.steps=1200"])
        claims = claims_block(result.trace, 0.4, 0.02, result.name)
        self.assertIn("frequency_change", claims)
        self.assertGreaterEqual(claims["frequency_change"]["before_hz"], 0.0)

    def test_synthesis_summary(self):
        config = load_reference_config()
        summary = synthesis_summary(config, design(config))
        self.assertEqual(summary["converter_units"], "per_unit")
        self.assertAlmostEqual(summary["f_s_hz"], 20000.0, places=6)
        self.assertEqual(summary["gains"]["threshold_on"], -summary["gains"]["threshold_off"])

    def test_synthesis_summary_carries_residual_and_offset(self):
        config = load_reference_config()
        summary = synthesis_summary(config, design(config))
        self.assertLess(summary["gains"]["bellman_residual_max"], 1e-8)
        offset = summary["discrepancies"]["steady_offset"]
        self.assertAlmostEqual(offset["duty"], 0.431521, delta=1e-5)
        self.assertAlmostEqual(offset["v_offset_fraction"], -0.077948, delta=1e-4)
        self.assertFalse(offset["within_band"])

    def test_missing_operating_point_is_reported_as_none(self):
        config = load_reference_config()
        d = design(config)
        with patch(
            "switch_state_control.report.sliding_equilibrium",
            side_effect=SingularMatrixError("parallel"),
        ):
            with self.assertLogs("switch_state_control.report", level="WARNING"):
                summary = synthesis_summary(config, d)
        self.assertIsNone(summary["discrepancies"]["steady_offset"])

    def test_plot_without_matplotlib(self):
        result = run_preset("startup", ["sim.steps=10"])
        with patch.dict(sys.modules, {"matplotlib": None}):
            with self.assertLogs("switch_state_control.plotting", level="WARNING"):
                self.assertIsNone(plot_trace(result.trace, "unused.png"))


class TestReferenceClaims(unittest.TestCase):
    """Claims measured on the reference converter, which regulates below the band."""

    @classmethod
    def setUpClass(cls):
        cls.claims = {}
        for name in ("startup", "load-decrease", "noise-high"):
            cls.claims[name] = build_summary(run_preset(name)).to_dict()["claims"]

    def test_startup_never_reaches_the_band(self):
        result = run_preset("startup")
        self.assertLess(float(np.max(result.trace.column("v_c"))), 0.4 * 0.98)
        claims = self.claims["startup"]
        self.assertIsNone(claims["settling_time_s"]["value"])
        self.assertFalse(claims["settling_time_s"]["holds"])
        entry = claims["on_until_band_entry"]
        self.assertIsNone(entry["first_band_entry_step"])
        self.assertEqual(entry["first_off_switch_step"], 4)
        self.assertFalse(entry["holds"])
        self.assertAlmostEqual(claims["final_half_mean_v"]["value"], 0.37986, delta=5e-4)
        self.assertFalse(claims["final_half_mean_v"]["holds"])

    def test_load_decrease_stays_below_the_band(self):
        claims = self.claims["load-decrease"]
        self.assertIsNone(claims["settling_time_s"]["value"])
        self.assertFalse(claims["settling_time_s"]["holds"])
        self.assertAlmostEqual(claims["final_half_mean_v"]["value"], 0.37978, delta=5e-4)
        self.assertFalse(claims["final_half_mean_v"]["holds"])
        change = claims["frequency_change"]
        self.assertAlmostEqual(change["before_hz"], 4450.0, delta=100.0)
        self.assertAlmostEqual(change["after_hz"], 4450.0, delta=100.0)
        self.assertLess(change["value"], 0.05)
        self.assertTrue(change["holds"])

    def test_high_noise_mean_misses_tolerance(self):
        half_mean = self.claims["noise-high"]["final_half_mean_v"]
        self.assertAlmostEqual(half_mean["value"], 0.37597, delta=1.5e-3)
        self.assertFalse(half_mean["holds"])

    def test_per_unit_penalty_keeps_the_switch_open(self):
        result = run_preset("startup", ["controller.weight_units=pu"])
        self.assertEqual(result.metrics.switch_count, 0)
        self.assertEqual(float(np.max(np.abs(result.trace.column("v_c")))), 0.0)


if __name__ == "__main__":
    unittest.main()

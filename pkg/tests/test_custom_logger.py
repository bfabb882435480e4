"""
Tests for run logging.
"""

import io
import logging
import os
import shutil
import tempfile
import unittest

from switch_state_control.utils.custom_logger import (
    PACKAGE_LOGGER,
    ConsoleEventFilter,
    setup_run_logging,
)


def make_record(message, level=logging.INFO):
    return logging.LogRecord("switch_state_control.test", level, __file__, 1, message, None, None)


def reset_package_logger():
    logger = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    logger.propagate = True
    logger.setLevel(logging.NOTSET)


class TestConsoleEventFilter(unittest.TestCase):
    """Tests for the console event filter."""

    def test_drops_event_chatter(self):
        console_filter = ConsoleEventFilter()
        self.assertFalse(console_filter.filter(make_record("step 800: load scaled to 1.3x")))
        self.assertFalse(console_filter.filter(make_record("sweep 50: sup-norm change 0.1")))
        self.assertFalse(console_filter.filter(make_record("enumerated 4096 sequences (gray)")))
        self.assertTrue(console_filter.filter(make_record("Running preset 'startup'")))

    def test_warnings_always_pass(self):
        console_filter = ConsoleEventFilter()
        self.assertTrue(console_filter.filter(make_record("step 3: diverging", logging.WARNING)))

    def test_custom_patterns(self):
        console_filter = ConsoleEventFilter([r"^noisy"])
        self.assertFalse(console_filter.filter(make_record("noisy message")))
        self.assertTrue(console_filter.filter(make_record("step 1: kept")))


class TestSetupRunLogging(unittest.TestCase):
    """Tests for logger configuration."""

    def setUp(self):
        """Set up a temporary log directory."""
        self.temp_dir = tempfile.mkdtemp()
        self.log_path = os.path.join(self.temp_dir, "logs", "run.log")

    def tearDown(self):
        """Remove handlers and the temporary directory."""
        reset_package_logger()
        shutil.rmtree(self.temp_dir)

    def test_file_gets_everything(self):
        console = io.StringIO()
        logger = setup_run_logging(self.log_path, console=console)
        child = logging.getLogger("switch_state_control.simulator")
        child.info("Trace written to out/trace.csv")
        child.info("step 800: load scaled to 1.3 x nominal")
        child.debug("Discretized plant")

        with open(self.log_path) as f:
            content = f.read()
        self.assertIn("Session started at", content)
        self.assertIn("Trace written to out/trace.csv", content)
        self.assertIn("step 800: load scaled", content)
        self.assertIn("Discretized plant", content)

        shown = console.getvalue()
        self.assertIn("INFO: Trace written to out/trace.csv", shown)
        self.assertNotIn("step 800", shown)
        self.assertNotIn("Discretized plant", shown)
        self.assertFalse(logger.propagate)

    def test_verbose_console(self):
        console = io.StringIO()
        setup_run_logging(None, verbose=True, console=console)
        logging.getLogger("switch_state_control.plant").debug("Continuous model: trace=-1")
        self.assertIn("DEBUG: Continuous model", console.getvalue())

    def test_repeated_setup_replaces_handlers(self):
        setup_run_logging(self.log_path, console=io.StringIO())
        logger = setup_run_logging(self.log_path, console=io.StringIO())
        self.assertEqual(len(logger.handlers), 2)
        self.assertEqual(len(setup_run_logging(None, console=io.StringIO()).handlers), 1)


if __name__ == "__main__":
    unittest.main()

"""
Tests for the switch-state-control package.
"""

#!/usr/bin/env python3
"""
Setup script for the switch-state-control package.
Kept for older pip versions; pyproject.toml holds the package metadata.
"""

from setuptools import setup

if __name__ == "__main__":
    setup()

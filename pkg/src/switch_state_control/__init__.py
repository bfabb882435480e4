"""
switch-state-control - optimal on-off control of binary-actuated linear plants

Closed-form synthesis of a hysteresis switching policy for plants driven by a
two-position switch, with a buck converter model, a closed-loop simulator and
exhaustive-search and value-iteration references.
"""

__version__ = "0.1.0"

"""
Signal Lab

Decentralized traffic-signal-control laboratory: point-queue network
simulation, GPA / MaxPressure / fixed-time / proportional-fair junction
controllers and an experiment harness.
"""

__version__ = "1.0.0"
__author__ = "Signal Lab Team"

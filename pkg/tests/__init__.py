"""Test package for groundwater monitoring system."""

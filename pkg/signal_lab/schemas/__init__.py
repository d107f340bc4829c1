"""Pydantic schemas for the network, controller, scenario and result types."""

"""Sensor scheduling for energy-harvesting cognitive radio sensor networks."""

__version__ = "0.1.0"

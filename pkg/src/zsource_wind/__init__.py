"""Averaged simulation and small-signal analysis of a PMSG wind generator
feeding the grid through a Z-source inverter."""

__version__ = "0.1.0"

"""Simulation of measurement-device-independent certification of
continuous-variable entanglement and quantum memories."""
__version__ = "0.1.0"

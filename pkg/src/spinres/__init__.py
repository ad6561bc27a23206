"""Skyrmion physical reservoir computing: micromagnetic devices, surrogate
reservoirs, ridge readouts and autonomous forecasting."""

__version__ = "0.1.0"

"""Simulation and analysis toolkit for downlink TDoA UWB positioning."""

__version__ = "0.1.0"

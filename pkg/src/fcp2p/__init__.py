"""Peer-to-peer electricity trading between dwellings with fuel-cell CHP units."""

__version__ = "0.1.0"

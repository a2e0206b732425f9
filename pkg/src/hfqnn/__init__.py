"""Hybrid quantum-classical anomaly detection for ADS-B flight records."""

__version__ = "0.1.0"

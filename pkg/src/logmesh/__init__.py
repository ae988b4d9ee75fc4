"""logmesh: event logs to attributed directed graphs to one-class
graph-level anomaly detection with per-node explanations."""

__version__ = "0.1.0"

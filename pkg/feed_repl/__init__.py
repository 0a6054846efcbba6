"""Workload-adaptive replication between an off-chain store and a modeled chain."""

__version__ = "0.3.0"

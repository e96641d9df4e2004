"""Monitoring module."""
from .provenance import RunRecord, RunTracker

__all__ = ["RunRecord", "RunTracker"]

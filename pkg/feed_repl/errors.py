"""Exception hierarchy shared by every feed_repl module."""

from __future__ import annotations


class FeedReplError(Exception):
    """Base class for all feed_repl errors."""


class ScheduleError(FeedReplError, ValueError):
    """A gas schedule has a non-positive or otherwise unusable field."""


class TraceParseError(FeedReplError, ValueError):
    """A trace file line could not be parsed.

    Attributes:
        line_no: 1-based line number of the offending line.
    """

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class WorkloadError(FeedReplError, ValueError):
    """Invalid generator parameters."""


class DecisionError(FeedReplError, ValueError):
    """Invalid decision-algorithm parameters or oracle input."""


class AdsError(FeedReplError, ValueError):
    """Malformed input to the authenticated data structure."""


class IntegrityError(AdsError):
    """A proof supplied by the storage provider failed verification."""


class SimulationError(FeedReplError):
    """Internal invariant violation during a simulation run."""


class ConfigError(FeedReplError, ValueError):
    """Unreadable or invalid experiment spec."""

"""Exception hierarchy.

Errors split into two families so the CLI can map them onto exit codes:
``InputError`` (bad files, bad configuration) and ``ComputationError``
(the data is well-formed but the model cannot be fitted or simulated).
"""

from __future__ import annotations


class WismcError(Exception):
    """Base class for every error raised by this package."""


class InputError(WismcError):
    pass


class ComputationError(WismcError):
    pass


class FormatError(InputError):
    """The input table cannot be interpreted with the declared column map."""


class IngestionError(InputError):
    """Too many malformed rows, or tick data that cannot be resampled."""

    def __init__(self, message: str, rows: list[int] | None = None):
        super().__init__(message)
        self.rows = list(rows or [])


class PreconditionError(ComputationError):
    pass


class DegenerateIndexError(ComputationError):
    pass


class UnvisitedStateError(ComputationError):
    def __init__(self, message: str, states: list[int]):
        super().__init__(message)
        self.states = list(states)


class NoSupportError(ComputationError):
    """A kernel cell ``(i, x)`` has no observed departures."""

    def __init__(self, state: int, index_bin: int):
        super().__init__(f"no support for state {state} in index bin {index_bin}")
        self.state = state
        self.index_bin = index_bin


class FitError(ComputationError):
    pass


class ZeroVarianceError(ComputationError):
    pass

"""Exception hierarchy for the simulator."""

from __future__ import annotations


class QGillespieError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(QGillespieError, ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ModelError(QGillespieError, ValueError):
    """A Lindblad model or one of its builder parameters is invalid."""


class InvalidStateError(QGillespieError, ValueError):
    """A density matrix or state vector violates trace, norm or positivity."""


class TableError(QGillespieError):
    """Base class for failures while building or querying precomputed tables."""


class TailMassTooLarge(TableError):
    """Survival probability at the end of the grid exceeds the tolerance.

    Either the time grid is too short or the model has a dark subspace.
    """

    def __init__(self, tail: float, tolerance: float, t_max: float):
        self.tail = tail
        self.tolerance = tolerance
        self.t_max = t_max
        super().__init__(
            f"survival probability {tail:.3e} at t_max={t_max:g} exceeds tolerance {tolerance:.1e}"
        )


class GapExceedsTable(TableError):
    """Requested propagation time lies beyond the tabulated grid."""


class AllZeroWeights(QGillespieError):
    """Waiting-time weights vanish: the state is dark on this grid."""


class VanishingTrace(QGillespieError):
    """No-jump evolution drove the trace below numerical resolution."""


class ZeroJumpProbability(QGillespieError):
    """Every monitored channel has zero probability for the current state."""


class PartialMonitoringUnsupported(QGillespieError):
    """Pure-state evolution requires every jump channel to be monitored."""


class DegenerateSteadyState(QGillespieError):
    """The Liouvillian null space is not one-dimensional."""


class NoJumps(QGillespieError):
    """An ensemble contains no usable waiting times."""


class ConfigError(QGillespieError, ValueError):
    """A run configuration could not be parsed or validated."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ParseError(ConfigError):
    """The configuration text is malformed or contains unknown keys."""

"""Exception types shared across the engine."""


class TrialflowError(Exception):
    """Base class for all engine errors."""


class ValidationError(TrialflowError):
    """Malformed or inconsistent input data.

    Carries file/row/column context when raised during ingestion so the
    offending cell can be reported to the user.
    """

    def __init__(self, message: str, *, source: str | None = None,
                 row: int | None = None, column: str | None = None):
        self.source = source
        self.row = row
        self.column = column
        parts = []
        if source is not None:
            parts.append(str(source))
        if row is not None:
            parts.append(f"row {row}")
        if column is not None:
            parts.append(f"column {column!r}")
        prefix = ", ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class InvalidSpec(TrialflowError):
    """Synthetic cohort specification is inconsistent."""


class InvalidK(TrialflowError):
    """Requested cluster or neighbor count is out of range."""


class DegenerateInput(TrialflowError):
    """Input too small or empty for the requested operation."""


class NonFiniteError(TrialflowError):
    """A numeric computation produced NaN or infinity."""


class DivergenceError(TrialflowError):
    """Training loss became non-finite."""

    def __init__(self, message: str, epoch: int | None = None):
        self.epoch = epoch
        super().__init__(message)


class UntrainedPipeline(TrialflowError):
    """An explanation was requested before the models were trained."""


class EmptyCluster(TrialflowError):
    """Cluster-level aggregation over zero members."""


class EmptyGroup(TrialflowError):
    """Statistic requested for an empty group."""


class LengthMismatch(TrialflowError):
    """Sequences of unequal length where equal length is required."""


class NegativeEntry(TrialflowError):
    """A count vector contained a negative entry."""

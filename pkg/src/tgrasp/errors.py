"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes (see cli.EXIT_CODES); library code
raises them directly.
"""


class TgraspError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TgraspError):
    """Invalid configuration: unknown keys, out-of-range values, bad corpus dims."""


class DataFormatError(TgraspError):
    """Malformed file content (bad magic, truncation, version mismatch)."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class InvariantViolation(TgraspError):
    """A stored artifact fails one of its declared invariants."""


class TrainingDiverged(TgraspError):
    """NaN loss or gradient encountered during optimization."""


class ShapeError(TgraspError):
    """Array shape mismatch; names both offending shapes."""

    def __init__(self, op, got, expected):
        super().__init__(f"{op}: got shape {tuple(got)}, expected {expected}")


class InvalidRotation(TgraspError):
    """Quaternion is too far from unit norm to denote a rotation."""


class EmptyTarget(TgraspError):
    """Target mask has no member points."""


class EmptyCloud(TgraspError):
    """Operation produced or received a cloud with no points."""


class OracleUnsupported(TgraspError):
    """Mesh cannot be labeled (e.g. not watertight)."""

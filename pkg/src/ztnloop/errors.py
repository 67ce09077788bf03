"""Exception hierarchy. Exit codes: 2 config, 3 data/schema, 4 divergence."""


class ZtnLoopError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(ZtnLoopError):
    """Invalid configuration value or combination."""

    exit_code = 2


class InvalidActionError(ConfigError):
    """Action outside the configured action space."""


class DataError(ZtnLoopError):
    """Bad input data, file schema, or insufficient samples."""

    exit_code = 3


class ShapeError(DataError):
    """Mismatched lengths or feature widths."""


class InsufficientDataError(DataError):
    """Not enough samples for the requested operation."""


class DegenerateScalerError(DataError):
    """Series has no spread; min-max scaling undefined."""


class CheckpointError(DataError):
    """Unreadable checkpoint or unsupported schema version."""


class WarmupError(DataError):
    """Too little history to form the first prediction window."""


class DivergenceError(ZtnLoopError):
    """Training produced a non-finite loss."""

    exit_code = 4

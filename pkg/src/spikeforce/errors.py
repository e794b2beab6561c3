"""Exception types raised across the package."""


class SpikeForceError(Exception):
    """Base class for all package errors."""


class ParameterError(SpikeForceError, ValueError):
    """A numerical parameter is outside its valid domain."""


class ShapeError(SpikeForceError, ValueError):
    """Array dimensions do not agree."""


class SequencingError(SpikeForceError, ValueError):
    """Frames out of order, or signals on mismatched time grids."""


class ConfigError(SpikeForceError, ValueError):
    """Invalid model or experiment configuration."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyFeatureError(SpikeForceError, ValueError):
    """Sequence too short to produce a single feature window."""


class DataError(SpikeForceError, ValueError):
    """Non-finite or otherwise unusable numeric data."""


class DatasetError(SpikeForceError, ValueError):
    """A dataset file or in-memory dataset violates its schema."""

    def __init__(self, message, record=None):
        self.record = record
        if record is not None:
            message = f"record {record}: {message}"
        super().__init__(message)


class CalibrationError(SpikeForceError, RuntimeError):
    """Encoder threshold calibration could not reach its target."""


class DivergenceError(SpikeForceError, RuntimeError):
    """Training loss became non-finite."""


class ArtifactError(SpikeForceError, RuntimeError):
    """A run directory is missing the files a step needs."""

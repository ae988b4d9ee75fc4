"""Exception types shared across the logmesh package."""


class LogmeshError(Exception):
    """Base class for all logmesh errors."""


class ConfigError(LogmeshError):
    """Invalid configuration (bad value, missing file, unsupported option)."""


class MalformedDescriptor(ConfigError):
    """Log format descriptor is structurally invalid."""


class MalformedLine(LogmeshError):
    """A log line does not match its format descriptor."""


class IoError(LogmeshError):
    """File could not be read or written."""


class MissingIdentifier(LogmeshError):
    """A record has no identifier to group by."""


class FormatError(LogmeshError):
    """A data file violates its documented format."""


class MissingEmbedding(LogmeshError):
    """A template id has no attribute vector in the embedding table."""


class ShapeMismatch(LogmeshError):
    """Matrix shapes are inconsistent."""


class NoConvergence(LogmeshError):
    """Iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class EmptyGraph(LogmeshError):
    """Operation requires a graph with at least one node."""


class EmptyTrainingSet(LogmeshError):
    """Training requires at least one graph."""


class NonFiniteLoss(LogmeshError):
    """Training loss became NaN or infinite."""


class SchemaError(LogmeshError):
    """Serialized artifact does not match the expected schema."""


class ZeroScore(LogmeshError):
    """Anomaly score is (numerically) zero; importance is undefined."""


class UnattributableReadout(LogmeshError):
    """Readout mode does not support score decomposition."""


class OneClassOnly(LogmeshError):
    """Metric needs both positive and negative labels."""


class NoPositives(LogmeshError):
    """Metric needs at least one positive label."""


class PoolTooSmall(LogmeshError):
    """Anomaly pool cannot supply the requested contamination."""

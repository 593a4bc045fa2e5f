class NumericFailure(RuntimeError):
    """A solver produced non-finite values."""


class DegenerateEpsilonError(ValueError):
    """Epsilon cannot be derived from an all-zero cost matrix."""


class UndefinedMetricError(ValueError):
    """A metric is undefined for the given input (e.g. all-zero displacements)."""


class ArtifactError(ValueError):
    """A persisted map artifact is unreadable or fails its integrity check."""


class ConfigError(ValueError):
    """Inconsistent experiment or CLI configuration."""

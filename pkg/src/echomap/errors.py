"""Exception types shared across the package."""


class EchomapError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(EchomapError):
    """Invalid run configuration or settings (bad key, bad value, bad file)."""


class AudioDecodeError(EchomapError):
    """A file could not be decoded (unsupported codec, truncated payload, bad header)."""


class ArtifactMissingError(EchomapError):
    """A persisted artifact was requested before it was produced."""

    def __init__(self, message, paths=()):
        super().__init__(message)
        self.paths = list(paths)


class ArtifactCorruptError(EchomapError):
    """A persisted artifact exists but cannot be parsed."""


class MetadataMissingError(ArtifactMissingError):
    """Distinct signal that a (dataset, model) pair has not been processed yet."""


class BackendError(EchomapError):
    """A feature-extractor backend violated its contract or failed at runtime."""


class AnnotationError(EchomapError):
    """A ground-truth annotation table violates its column or row contract."""

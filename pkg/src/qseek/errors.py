"""Exception hierarchy shared across the package."""


class QseekError(Exception):
    """Base class for all package errors."""


class ValidationError(QseekError):
    """A domain invariant was violated (overlapping chunks, duplicate ids, ...)."""


class ManifestParseError(QseekError):
    """A manifest or questionnaire file could not be parsed."""


class ProviderError(QseekError):
    """A feature provider is unavailable or produced invalid output."""


class CacheCorruptionError(QseekError):
    """An embedding cache file is truncated or inconsistent with its header."""


class NumericError(QseekError):
    """A non-finite value appeared somewhere it must not."""


class ConfigError(QseekError):
    """Invalid or unknown configuration."""


class UnlocatableQuestionError(QseekError):
    """A question span overlaps no chunk; the question cannot be scored."""


class StaleIndexError(QseekError):
    """An index no longer matches the manifest or checkpoint it was built from."""

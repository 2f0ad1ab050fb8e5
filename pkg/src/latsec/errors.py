"""Shared exception types."""


class ValidationError(ValueError):
    """Malformed value: bad probability mass, shape, or field."""


class DomainError(ValueError):
    """Arguments outside an operation's domain."""


class ResourceCapError(RuntimeError):
    """An exhaustive enumeration would exceed the configured cap."""


class ConfigError(ValueError):
    """Inconsistent experiment configuration."""

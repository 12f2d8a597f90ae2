"""Exception types shared across the package."""


class FramecastError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FramecastError):
    """Invalid configuration value or inconsistent run setup."""


class DependencyError(FramecastError):
    """A pipeline stage was invoked before the artifacts it needs exist."""


class HorizonError(FramecastError):
    """A rollout or decode was asked to step past the model's frame budget."""

"""Exception hierarchy for the caching simulator."""


class CacheSimError(Exception):
    """Base class for simulator errors."""


class ConfigError(CacheSimError, ValueError):
    """Invalid or unknown configuration value."""


class TopologyError(CacheSimError, ValueError):
    """A topology that cannot be built from the configuration."""


class NonTerminationError(CacheSimError, RuntimeError):
    """Deferred acceptance exceeded its round bound."""


class UnstableMatchingError(CacheSimError, AssertionError):
    """A placement failed the stability or trace checks."""


class MalformedResultsError(CacheSimError, ValueError):
    """An experiment CSV that does not follow the result schema."""

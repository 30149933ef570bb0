"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised when a problem description violates a structural requirement
    (dissipativity, positivity, step-size bounds, malformed config files)."""


class UnsupportedOracleError(ConfigError):
    """Raised when a closed-form averaged drift is requested for a setup
    that only admits the ergodic (sample-based) estimate."""

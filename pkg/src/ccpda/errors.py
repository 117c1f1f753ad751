"""Exception types shared across the package."""

from .autodiff import DimensionError


class ConfigError(ValueError):
    """Invalid configuration value or unknown configuration key."""


class ContractError(ValueError):
    """A caller violated an operation's precondition (bad label, bad range, ...)."""


class EmptyInputError(ValueError):
    """An operation that needs at least one sample received none."""


class ParseError(ValueError):
    """Malformed input file; the message names the offending line."""


__all__ = ["ConfigError", "ContractError", "DimensionError", "EmptyInputError", "ParseError"]

"""Exception hierarchy; each class maps to a CLI exit code."""


class TourmapError(Exception):
    exit_code = 1


class ConfigError(TourmapError):
    """Bad or missing configuration (exit code 2)."""

    exit_code = 2


class DataError(TourmapError):
    """Input data violates a contract (exit code 3)."""

    exit_code = 3


class NumericError(TourmapError):
    """A computation is undefined for the given data (exit code 4)."""

    exit_code = 4

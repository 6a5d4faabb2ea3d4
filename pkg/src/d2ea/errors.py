"""Exception hierarchy shared by the library and the command line."""


class D2eaError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(D2eaError, ValueError):
    """Malformed or invalid configuration (CLI exit code 2)."""

    exit_code = 2


class DataError(D2eaError, ValueError):
    """Malformed, empty, or inconsistent data (CLI exit code 3)."""

    exit_code = 3


class RangeError(D2eaError, ValueError):
    """A value lies outside its permitted range (CLI exit code 4)."""

    exit_code = 4

    def __init__(self, field, value, lo, hi, where=""):
        self.field = field
        self.value = value
        self.lo = lo
        self.hi = hi
        loc = f" ({where})" if where else ""
        super().__init__(f"{field}={value!r} outside [{lo}, {hi}]{loc}")

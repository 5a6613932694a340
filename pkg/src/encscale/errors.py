"""Exception hierarchy shared by all encscale modules.

Two broad classes matter to callers (and to the CLI exit codes):
``InputError`` for anything wrong with inputs or configuration, and
``NumericError`` for failures that arise during computation itself.
"""


class EncscaleError(Exception):
    """Base class for all errors raised by encscale."""


class InputError(EncscaleError, ValueError):
    """Invalid input data, file, or configuration (CLI exit code 2)."""


class NumericError(EncscaleError, ArithmeticError):
    """Numeric failure during computation (CLI exit code 3)."""

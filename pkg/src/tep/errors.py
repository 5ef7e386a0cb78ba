"""Exception hierarchy; each class maps to one CLI exit code."""


class TepError(Exception):
    exit_code = 4
    kind = "internal"


class ConfigError(TepError, ValueError):
    exit_code = 1
    kind = "config"


class ImageIOError(TepError, OSError):
    exit_code = 2
    kind = "io"


class NumericalError(TepError, ArithmeticError):
    exit_code = 3
    kind = "numeric"

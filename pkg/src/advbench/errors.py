"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 usage, 3 data/format,
4 numeric divergence.
"""


class AdvbenchError(Exception):
    exit_code = 3


class DimensionError(AdvbenchError, ValueError):
    pass


class RangeError(AdvbenchError, ValueError):
    pass


class LabelError(AdvbenchError, ValueError):
    pass


class FormatError(AdvbenchError, ValueError):
    pass


class LengthError(FormatError):
    pass


class SizeError(AdvbenchError, ValueError):
    pass


class CatalogError(AdvbenchError, KeyError):
    exit_code = 2

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConfigError(AdvbenchError, ValueError):
    exit_code = 2


class DivergenceError(AdvbenchError, FloatingPointError):
    exit_code = 4


class FitError(AdvbenchError, ValueError):
    pass


class DomainError(FitError):
    pass


class FamilyError(FitError):
    pass


class NoIntersectionError(FitError):
    pass


class AlignmentError(AdvbenchError, ValueError):
    pass


class ParseError(FormatError):
    pass


class PlotError(AdvbenchError, ValueError):
    pass

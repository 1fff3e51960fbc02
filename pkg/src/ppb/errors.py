"""Exception hierarchy.

Each class carries the CLI exit code it maps to: 2 for validation problems,
3 for I/O and corrupt files, 4 for numerical failures.
"""


class PPBError(Exception):
    exit_code = 1


class ParameterError(PPBError, ValueError):
    """A physical or configuration parameter is out of its allowed range."""

    exit_code = 2


class InputError(PPBError, ValueError):
    """Malformed input data (unsorted streams, non-uniform grids, bad widths)."""

    exit_code = 2


class ConfigError(PPBError, ValueError):
    """Scenario file could not be parsed or validated.

    ``field`` is the dotted key path, ``line`` the 1-based line when known.
    """

    exit_code = 2

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class CorruptFileError(PPBError, OSError):
    exit_code = 3


class NumericalError(PPBError, ArithmeticError):
    exit_code = 4


class NoPeakError(NumericalError):
    """Curve has no maximum above its baseline."""


class NormalizationError(NumericalError):
    """A normalization denominator (singles rate, duration) vanished."""


class SaturationError(NumericalError):
    """Dead-time correction requested at or beyond detector saturation."""


class EstimateError(NumericalError):
    """An estimator is undefined for the given inputs (e.g. zero coincidences)."""


class FitError(NumericalError):
    """Least-squares fit failed to converge; ``diagnostics`` holds solver state."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


def exit_code_for(exc):
    if isinstance(exc, PPBError):
        return exc.exit_code
    if isinstance(exc, OSError):
        return 3
    return 1

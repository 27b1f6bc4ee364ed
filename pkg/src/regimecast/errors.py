"""Exception types raised across the pipeline.

Two broad families matter for the CLI exit-code mapping: ``DataError``
(bad or insufficient input data) and ``NumericalError`` (a computation
that could not be completed). Everything derives from ``RegimecastError``
so callers can catch the whole library with one clause.
"""


class RegimecastError(Exception):
    """Base class for all errors raised by this package."""


class DataError(RegimecastError):
    """Input data violates a documented contract."""


class NumericalError(RegimecastError):
    """A numerical procedure failed or was handed degenerate values."""


# --- linear algebra ---

class InvalidMatrix(NumericalError):
    """Matrix contains non-finite entries or has an unusable shape."""


class ConvergenceFailure(NumericalError):
    """Iterative solver did not reach its tolerance within the cap."""


class DimensionMismatch(NumericalError):
    """Operands have incompatible shapes."""


# --- ingestion ---

class MalformedCsv(DataError):
    """CSV structure is wrong: bad header, ragged row, unparsable cell."""


class NonPositivePrice(DataError):
    """A present price cell is zero or negative."""


class DuplicateDate(DataError):
    """The same date appears on more than one row."""


class UnsortedDates(DataError):
    """Dates are not strictly increasing."""


class TooFewRows(DataError):
    """Not enough rows for the requested operation."""


class InsufficientAssets(DataError):
    """Fewer complete-history columns survive than required."""


# --- factor model ---

class DegenerateColumn(DataError):
    """A column has (near-)zero variance and cannot be standardized."""


# --- hidden Markov model ---

class NonPositiveVariance(NumericalError):
    """A Gaussian variance parameter is zero or negative."""


class TooFewObservations(DataError):
    """Observation sequence too short for the requested state count."""


class AllFitsFailed(NumericalError):
    """Every candidate state count failed to fit."""


class EmptyStateWarning(UserWarning):
    """A state received (almost) no responsibility mass in an EM step."""


# --- backtest & metrics ---

class InsufficientHistory(DataError):
    """Panel is shorter than window_length plus the forecast horizon."""


class EmptyInput(DataError):
    """Metric received no scorable observations."""


class ZeroVolatility(NumericalError):
    """Return series is constant; Sharpe ratio undefined."""


class TooShort(DataError):
    """Return series has fewer than two observations."""


class NoPositions(DataError):
    """All forecast signs are zero; no trade this period."""


class EmptyReport(DataError):
    """Backtest report contains no successful windows."""

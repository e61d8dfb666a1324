"""Exception hierarchy for the fusionids package.

Three bases map onto the CLI exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4. Constructor misuse (invariant violations on the frozen
domain types) raises plain ValueError and is considered a programming error,
not a pipeline failure.
"""

from __future__ import annotations


class FusionIdsError(Exception):
    """Base class for all package errors."""


class ConfigError(FusionIdsError):
    """Invalid configuration or parameters."""


class DataError(FusionIdsError):
    """Malformed, inconsistent, or insufficient input data."""


class NumericError(FusionIdsError):
    """Numeric failure: non-finite inputs or degenerate computations."""


# --- dataset ---------------------------------------------------------------

class MissingLabelColumnError(DataError):
    def __init__(self, column: str):
        super().__init__(f"label column {column!r} not found in header")
        self.column = column


class NonNumericCellError(DataError):
    def __init__(self, row: int, col: str):
        super().__init__(f"cell at data row {row}, column {col!r} is not numeric")
        self.row = row
        self.col = col


class EmptyTableError(DataError):
    pass


class BadMagicError(DataError):
    pass


class TruncatedFileError(DataError):
    pass


class DimMismatchError(DataError):
    pass


class EmptyIntersectionError(DataError):
    pass


class UnknownLabelError(DataError):
    def __init__(self, name: str):
        super().__init__(f"label {name!r} is not in the label map")
        self.name = name


class ClassTooSmallError(DataError):
    def __init__(self, name: str, count: int):
        super().__init__(f"class {name!r} has {count} sample(s); need at least 2 to split")
        self.name = name
        self.count = count


class NoAttackSamplesError(DataError):
    pass


# --- feature fusion --------------------------------------------------------

class SelectionOutOfRangeError(DataError):
    pass


# --- reduction -------------------------------------------------------------

class TargetExceedsSourceError(ConfigError):
    pass


class KTooLargeError(ConfigError):
    pass


class DegenerateDataError(NumericError):
    pass


# --- classifier ------------------------------------------------------------

class SingleClassInputError(DataError):
    pass


class NonFiniteFeatureError(NumericError):
    pass


# --- cascade ---------------------------------------------------------------

class FewerThanTwoAttackClassesError(DataError):
    pass


# --- metrics ---------------------------------------------------------------

class LabelOutOfRangeError(DataError):
    pass


# --- cli -------------------------------------------------------------------

class ConfigInvalidError(ConfigError):
    pass


class SpecInvalidError(ConfigError):
    pass
